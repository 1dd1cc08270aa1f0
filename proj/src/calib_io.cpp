#include <charconv>
#include <fstream>
#include <sstream>

#include "bevcal/calibrate.hpp"

namespace bevcal::calibrate {

namespace {

constexpr const char* kHeader = "bevcal-calib";
constexpr int kVersion = 1;

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("bad real in calib file: " + s);
  return v;
}

std::string expect_word(std::istream& in, const char* what) {
  std::string w;
  if (!(in >> w)) throw FormatError(std::string("calib file truncated before ") + what);
  return w;
}

void expect_key(std::istream& in, const std::string& key) {
  const std::string w = expect_word(in, key.c_str());
  if (w != key) throw FormatError("calib file: expected '" + key + "', found '" + w + "'");
}

}  // namespace

std::string to_calib_text(const CalibFile& file) {
  std::ostringstream out;
  out << kHeader << ' ' << kVersion << '\n';
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IsotonicMap>) {
          out << "kind isotonic\n";
        } else if constexpr (std::is_same_v<T, BetaMap>) {
          out << "kind beta\n";
        } else {
          out << "kind quantile\n";
        }
      },
      file.map);
  for (const auto& [key, value] : file.metadata) {
    if (key.find_first_of(" \t\n") != std::string::npos || value.find_first_of(" \t\n") != std::string::npos ||
        key.empty() || value.empty()) {
      throw ValidationError("calib metadata must be non-empty single words: " + key);
    }
    out << "meta " << key << ' ' << value << '\n';
  }
  if (const auto* iso = std::get_if<IsotonicMap>(&file.map)) {
    out << "mode " << (iso->mode == IsotonicMode::step ? "step" : "interpolate") << '\n';
    out << "clip_floor " << fmt(iso->clip_floor) << '\n';
    out << "points " << iso->breakpoints.size() << '\n';
    for (std::size_t i = 0; i < iso->breakpoints.size(); ++i) {
      out << fmt(iso->breakpoints[i]) << ' ' << fmt(iso->values[i]) << '\n';
    }
  } else if (const auto* beta = std::get_if<BetaMap>(&file.map)) {
    out << "a " << fmt(beta->a) << '\n' << "b " << fmt(beta->b) << '\n' << "c " << fmt(beta->c) << '\n';
  } else {
    const auto& q = std::get<QuantileMap>(file.map);
    out << "points " << q.frequency.size() << '\n';
    for (std::size_t k = 0; k < q.frequency.size(); ++k) out << k << ' ' << fmt(q.frequency[k]) << '\n';
  }
  out << "end\n";
  return out.str();
}

CalibFile from_calib_text(const std::string& text) {
  std::istringstream in(text);
  expect_key(in, kHeader);
  const std::string version = expect_word(in, "version");
  if (version != std::to_string(kVersion)) throw FormatError("unsupported calib version " + version);
  expect_key(in, "kind");
  const std::string kind = expect_word(in, "kind");
  CalibFile file;
  std::string word = expect_word(in, "body");
  while (word == "meta") {
    const std::string key = expect_word(in, "meta key");
    file.metadata[key] = expect_word(in, "meta value");
    word = expect_word(in, "body");
  }
  if (kind == "isotonic") {
    IsotonicMap m;
    if (word != "mode") throw FormatError("calib file: expected 'mode'");
    const std::string mode = expect_word(in, "mode");
    if (mode == "step") {
      m.mode = IsotonicMode::step;
    } else if (mode != "interpolate") {
      throw FormatError("calib file: unknown isotonic mode " + mode);
    }
    expect_key(in, "clip_floor");
    m.clip_floor = parse_double(expect_word(in, "clip_floor"));
    expect_key(in, "points");
    const std::size_t n = std::stoul(expect_word(in, "points"));
    for (std::size_t i = 0; i < n; ++i) {
      m.breakpoints.push_back(parse_double(expect_word(in, "breakpoint")));
      m.values.push_back(parse_double(expect_word(in, "value")));
    }
    file.map = std::move(m);
  } else if (kind == "beta") {
    BetaMap m;
    if (word != "a") throw FormatError("calib file: expected 'a'");
    m.a = parse_double(expect_word(in, "a"));
    expect_key(in, "b");
    m.b = parse_double(expect_word(in, "b"));
    expect_key(in, "c");
    m.c = parse_double(expect_word(in, "c"));
    file.map = m;
  } else if (kind == "quantile") {
    QuantileMap m;
    if (word != "points") throw FormatError("calib file: expected 'points'");
    const std::size_t n = std::stoul(expect_word(in, "points"));
    if (n != m.frequency.size()) throw FormatError("calib file: quantile map must have 101 points");
    for (std::size_t k = 0; k < n; ++k) {
      expect_word(in, "level");
      m.frequency[k] = parse_double(expect_word(in, "frequency"));
    }
    file.map = m;
  } else {
    throw FormatError("calib file: unknown kind " + kind);
  }
  expect_key(in, "end");
  return file;
}

void write_calib(const std::filesystem::path& path, const CalibFile& file) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << to_calib_text(file);
  if (!out) throw IoError("write failed: " + path.string());
}

CalibFile read_calib(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_calib_text(buf.str());
}

}  // namespace bevcal::calibrate
