#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kseg/model.hpp"
#include "kseg/phantom.hpp"

namespace kseg {

/// Dataset container, little-endian throughout:
///   magic "KSEG", version byte,
///   header: count, T, H, W as u32,
///   per scan: image as f32 (T·H·W, row-major) then labels as u8 (T·H·W).
inline constexpr char kDatasetMagic[4] = {'K', 'S', 'E', 'G'};
inline constexpr std::uint8_t kDatasetVersion = 1;

void save_dataset(const std::string& path, const std::vector<CineScan>& scans);
std::vector<CineScan> load_dataset(const std::string& path);

/// Expected on-disk size in bytes for `count` scans of T×H×W.
std::size_t dataset_file_size(int count, int frames, int height, int width);

/// Checkpoint, little-endian:
///   magic "KSEGCKPT", ModelConfig as 8 u32 fields,
///   u32 parameter count, per parameter: name (u32 length + bytes),
///   rank u32, extents u32..., payload f64,
///   then i64 training-step counter and u64 rng seed.
inline constexpr char kCheckpointMagic[8] = {'K', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    std::int64_t step = 0;
    std::uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Per-step loss log: "step,dice_loss,bce_loss,total" CSV with header.
void save_loss_csv(const std::string& path, const std::vector<double>& dice,
                   const std::vector<double>& bce, const std::vector<double>& total,
                   std::int64_t first_step = 0);

}  // namespace kseg
