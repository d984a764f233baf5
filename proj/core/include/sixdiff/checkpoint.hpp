#pragma once

// Versioned binary model container: ModelConfig followed by named tensors.
//
// Layout (little-endian):
//   magic "SIXDCKPT", u32 version
//   i32 d_embed, d_ff, n_layers, n_heads_global, n_heads_local, seq_len, vocab
//   f64 dropout, u32 window count, i32 windows[count]
//   u32 tensor count, then per tensor: u32 name length, name bytes,
//   u64 rows, u64 cols, f64 data[rows*cols] (row-major)

#include <filesystem>
#include <istream>
#include <ostream>

#include "sixdiff/denoiser.hpp"

namespace sixdiff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const DenoiserModel& model);
DenoiserModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const DenoiserModel& model);
DenoiserModel load_checkpoint(const std::filesystem::path& path);

}  // namespace sixdiff
