#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kseg/model.hpp"
#include "kseg/phantom.hpp"

namespace kseg {

/// 2|P∩G|/(|P|+|G|); 1 if both masks are empty, 0 if exactly one is.
double dice_score(const std::vector<std::uint8_t>& pred,
                  const std::vector<std::uint8_t>& gt, std::uint8_t cls);

/// Symmetric Hausdorff distance over boundary pixels (4-neighborhood),
/// per frame, averaged over frames. Frames where either mask is empty are
/// excluded; nullopt when no frame is usable.
struct HausdorffResult {
    std::optional<double> value;
    int frames_used = 0;
    int frames_skipped = 0;
};
HausdorffResult hausdorff(const std::vector<std::uint8_t>& pred,
                          const std::vector<std::uint8_t>& gt, std::uint8_t cls,
                          int frames, int height, int width);

/// Single-frame symmetric Hausdorff between two point sets (test oracle hook).
double hausdorff_frame(const std::vector<std::pair<int, int>>& a,
                       const std::vector<std::pair<int, int>>& b);

struct ClassStats {
    double dice_mean = 0.0, dice_std = 0.0;
    double hd_mean = 0.0, hd_std = 0.0;
    int hd_missing = 0;  // scans with no usable Hausdorff frame
};

struct MetricReport {
    struct Row {
        double acceleration = 0.0;
        std::vector<ClassStats> per_class;  // foreground classes, order 1, 2, ...
        ClassStats foreground_mean;         // per-scan mean over foreground classes
        std::vector<double> scan_dice;      // per-scan foreground-mean dice
    };
    std::vector<Row> rows;

    std::string to_table() const;      // Table-1-style text
    std::string to_key_values() const; // machine-readable "key=value" lines
};

struct EvalConfig {
    std::vector<double> accelerations = {4, 8, 16, 32, 64};
    std::uint64_t seed = 0;
    UndersampleOptions sampling;
};

/// Undersample each scan with a fixed per-scan seed, run full-grid prediction
/// and aggregate per-class Dice / Hausdorff per acceleration factor.
MetricReport evaluate(const ModelParams& params, const ModelConfig& model_config,
                      const std::vector<CineScan>& scans, const EvalConfig& config);

}  // namespace kseg
