#include "bevcal/grid_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace bevcal {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    bytes_.push_back(std::uint8_t(v & 0xFFU));
    bytes_.push_back(std::uint8_t(v >> 8U));
  }
  void u32(std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) bytes_.push_back(std::uint8_t((v >> shift) & 0xFFU));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s, const char* field) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ValidationError(std::string(field) + " longer than 65535 bytes");
    }
    u16(std::uint16_t(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }
  void reserve(std::size_t n) { bytes_.reserve(n); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    auto v = std::uint16_t(bytes_[pos_] | (bytes_[pos_ + 1] << 8U));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint16_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw LengthError("BEVG file truncated at byte " + std::to_string(pos_));
    }
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_grid_file(const FrameRecord& record) {
  record.validate();
  const GridMeta& m = record.meta();
  Writer w;
  w.reserve(64 + record.frame_id.size() + record.episode_id.size() + 5 * m.cell_count() * record.grids.size());
  for (char c : std::string_view("BEVG")) w.u8(std::uint8_t(c));
  w.u16(kBevgVersion);
  w.u16(0);
  w.u32(m.height_cells);
  w.u32(m.width_cells);
  w.f32(m.cell_size_m);
  w.f32(m.ego_row);
  w.f32(m.ego_col);
  w.u16(m.num_future_steps);
  w.f32(m.step_seconds);
  w.str(record.frame_id, "frame_id");
  w.str(record.episode_id, "episode_id");
  for (std::size_t t = 0; t < record.grids.size(); ++t) {
    for (float p : record.grids[t].cells()) w.f32(p);
    const AnnotationMask& ann = record.annotations[t];
    for (std::uint8_t v : ann.occupied()) w.u8(v);
    w.u32(std::uint32_t(ann.instances().size()));
    for (const AnnotatedObject& obj : ann.instances()) {
      w.u32(obj.object_id);
      w.f32(obj.center_row);
      w.f32(obj.center_col);
      w.u32(std::uint32_t(obj.pixels.size()));
      for (const Cell& px : obj.pixels) {
        w.u16(std::uint16_t(px.row));
        w.u16(std::uint16_t(px.col));
      }
    }
  }
  return w.take();
}

FrameRecord decode_grid_file(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "BEVG", 4) != 0) {
    if (bytes.size() < 4) throw LengthError("BEVG file truncated in magic");
    throw FormatError("bad magic: not a BEVG file");
  }
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint16_t version = r.u16();
  if (version != kBevgVersion) throw FormatError("unsupported BEVG version " + std::to_string(version));
  if (r.u16() != 0) throw FormatError("reserved header bytes must be zero");

  GridMeta m;
  m.height_cells = r.u32();
  m.width_cells = r.u32();
  m.cell_size_m = r.f32();
  m.ego_row = r.f32();
  m.ego_col = r.f32();
  m.num_future_steps = r.u16();
  m.step_seconds = r.f32();
  if (m.height_cells == 0 || m.width_cells == 0 || m.height_cells > 65536 || m.width_cells > 65536) {
    throw FormatError("bad grid dimensions");
  }
  m.validate();

  FrameRecord record;
  record.frame_id = r.str();
  record.episode_id = r.str();
  const std::size_t n = m.cell_count();
  for (int t = 0; t <= m.num_future_steps; ++t) {
    r.need(n * 5);
    std::vector<float> cells(n);
    for (float& p : cells) p = r.f32();
    record.grids.emplace_back(m, t, std::move(cells));

    std::vector<std::uint8_t> occupied(n);
    for (auto& v : occupied) v = r.u8();
    const std::uint32_t count = r.u32();
    std::vector<AnnotatedObject> instances;
    for (std::uint32_t i = 0; i < count; ++i) {
      AnnotatedObject obj;
      obj.object_id = r.u32();
      obj.center_row = r.f32();
      obj.center_col = r.f32();
      const std::uint32_t npx = r.u32();
      r.need(std::size_t{npx} * 4);
      obj.pixels.resize(npx);
      for (Cell& px : obj.pixels) {
        px.row = r.u16();
        px.col = r.u16();
      }
      instances.push_back(std::move(obj));
    }
    record.annotations.emplace_back(m, t, std::move(occupied), std::move(instances));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after BEVG payload");
  record.validate();
  return record;
}

void write_grid_file(const FrameRecord& record, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_grid_file(record);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

FrameRecord read_grid_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  try {
    return decode_grid_file(bytes);
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  } catch (const LengthError& e) {
    throw LengthError(where + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  }
}

}  // namespace bevcal
