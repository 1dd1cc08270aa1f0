#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bevcal/core.hpp"

namespace bevcal {

// BEVG binary layout, little-endian:
//   "BEVG" | u16 version=1 | u16 reserved=0
//   u32 height | u32 width | f32 cell_size_m | f32 ego_row | f32 ego_col
//   u16 num_future_steps | f32 step_seconds
//   u16 len + frame_id bytes | u16 len + episode_id bytes
//   per timestep 0..num_future_steps:
//     f32[height*width] probabilities | u8[height*width] occupancy
//     u32 instance count | per instance: u32 id, f32 center_row, f32 center_col,
//     u32 pixel count, (u16 row, u16 col) pairs
inline constexpr std::uint16_t kBevgVersion = 1;

std::vector<std::uint8_t> encode_grid_file(const FrameRecord& record);
FrameRecord decode_grid_file(std::span<const std::uint8_t> bytes);

void write_grid_file(const FrameRecord& record, const std::filesystem::path& path);
FrameRecord read_grid_file(const std::filesystem::path& path);

}  // namespace bevcal
