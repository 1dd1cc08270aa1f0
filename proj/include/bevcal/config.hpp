#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "bevcal/pipeline.hpp"
#include "bevcal/synth.hpp"

namespace bevcal::config {

struct GenerateConfig {
  synth::SynthConfig synth;
  std::filesystem::path output_dir = "dataset";
  std::string hash;  // FNV-1a of the config file text
};

// Parse JSON text. Relative paths resolve against base_dir. Unknown keys and
// type mismatches throw ConfigError naming the key.
GenerateConfig parse_generate_config(std::string_view text, const std::filesystem::path& base_dir = {});
pipeline::RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});

GenerateConfig load_generate_config(const std::filesystem::path& path);
pipeline::RunConfig load_run_config(const std::filesystem::path& path);

// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace bevcal::config
