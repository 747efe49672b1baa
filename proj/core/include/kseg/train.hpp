#pragma once

#include <cstdint>
#include <vector>

#include "kseg/kspace.hpp"
#include "kseg/model.hpp"
#include "kseg/phantom.hpp"
#include "kseg/tensor.hpp"

namespace kseg {

struct TrainConfig {
    double acceleration = 8.0;
    int steps = 1000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int queries_per_step = 1024;  // P_train; half uniform, half foreground
    std::uint64_t seed = 0;
    double w_dice = 1.0;
    double w_bce = 1.0;
    UndersampleOptions sampling;  // acceleration is overridden per step
};

/// mean over classes of 1 − (2Σpg + ε)/(Σp + Σg + ε), ε = 1e-6.
Tensor soft_dice_loss(Tape& tape, const Tensor& probs, const Tensor& targets);

/// mean of −[t·log p + (1−t)·log(1−p)] with p clamped to [1e-7, 1−1e-7].
Tensor bce_loss(Tape& tape, const Tensor& probs, const Tensor& targets);

/// One first-moment and one second-moment buffer per parameter.
struct AdamState {
    std::vector<std::vector<double>> m, v;
    std::int64_t step = 0;
};

AdamState init_adam_state(const ModelParams& params);

/// Standard Adam with bias correction; reads param->grad, updates values.
void adam_step(ModelParams& params, AdamState& state, const TrainConfig& config);

struct StepLoss {
    double dice = 0.0, bce = 0.0, total = 0.0;
};

struct TrainResult {
    std::vector<StepLoss> losses;  // one entry per step
    std::int64_t steps_done = 0;
};

/// On-the-fly training: each step draws fresh masks and B0 for the visited
/// scan, samples P_train query coordinates, and applies one Adam update.
/// Deterministic given config.seed. `start_step` continues a checkpoint.
TrainResult train(ModelParams& params, AdamState& adam, const ModelConfig& model_config,
                  const std::vector<CineScan>& dataset, const TrainConfig& config,
                  std::int64_t start_step = 0);

}  // namespace kseg
