#include "kseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kseg/rng.hpp"

namespace kseg {

Tensor soft_dice_loss(Tape& tape, const Tensor& probs, const Tensor& targets) {
    if (probs->shape != targets->shape || probs->shape.size() != 2)
        throw std::invalid_argument("soft_dice_loss: probs/targets must be matching [n,C]");
    constexpr double eps = 1e-6;
    const Tensor inter = tape.column_sums(tape.mul(probs, targets));   // [C]
    const Tensor p_sum = tape.column_sums(probs);
    const Tensor g_sum = tape.column_sums(targets);
    const Tensor num = tape.add_scalar(tape.scale(inter, 2.0), eps);
    const Tensor den = tape.add_scalar(tape.add(p_sum, g_sum), eps);
    const Tensor dice = tape.div(num, den);
    return tape.add_scalar(tape.scale(tape.mean(dice), -1.0), 1.0);
}

Tensor bce_loss(Tape& tape, const Tensor& probs, const Tensor& targets) {
    if (probs->shape != targets->shape)
        throw std::invalid_argument("bce_loss: shape mismatch");
    constexpr double lo = 1e-7;
    const Tensor p = tape.clamp(probs, lo, 1.0 - lo);
    const Tensor one_minus_p = tape.add_scalar(tape.scale(p, -1.0), 1.0);
    const Tensor one_minus_t = tape.add_scalar(tape.scale(targets, -1.0), 1.0);
    const Tensor ll = tape.add(tape.mul(targets, tape.log(p)),
                               tape.mul(one_minus_t, tape.log(one_minus_p)));
    return tape.scale(tape.mean(ll), -1.0);
}

AdamState init_adam_state(const ModelParams& params) {
    AdamState s;
    s.m.reserve(params.entries.size());
    for (const auto& [name, t] : params.entries) {
        s.m.emplace_back(t->numel(), 0.0);
        s.v.emplace_back(t->numel(), 0.0);
    }
    return s;
}

void adam_step(ModelParams& params, AdamState& state, const TrainConfig& cfg) {
    if (state.m.size() != params.entries.size())
        throw std::invalid_argument("adam_step: state does not match parameter list");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t pi = 0; pi < params.entries.size(); ++pi) {
        Tensor& t = params.entries[pi].second;
        if (state.m[pi].size() != t->numel())
            throw std::invalid_argument("adam_step: moment buffer shape mismatch for " +
                                        params.entries[pi].first);
        t->ensure_grad();
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        for (std::size_t i = 0; i < t->numel(); ++i) {
            const double g = t->grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            t->values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

namespace {

// P_train coordinates: half uniform over the grid, half from foreground voxels
void sample_queries(const CineScan& scan, int count, Rng& rng,
                    std::vector<double>& coords, std::vector<double>& targets, int classes) {
    std::vector<std::size_t> fg;
    for (std::size_t i = 0; i < scan.labels.size(); ++i)
        if (scan.labels[i] != kBackground) fg.push_back(i);

    coords.clear();
    targets.clear();
    coords.reserve(static_cast<std::size_t>(count) * 3);
    targets.reserve(static_cast<std::size_t>(count) * classes);
    const std::size_t hw = static_cast<std::size_t>(scan.height) * scan.width;
    for (int q = 0; q < count; ++q) {
        std::size_t idx;
        if (q % 2 == 1 && !fg.empty())
            idx = fg[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(fg.size()) - 1))];
        else
            idx = static_cast<std::size_t>(
                uniform_int(rng, 0, static_cast<int>(scan.labels.size()) - 1));
        const int t = static_cast<int>(idx / hw);
        const int y = static_cast<int>((idx % hw) / scan.width);
        const int x = static_cast<int>(idx % scan.width);
        double c3[3];
        normalized_coord(x, y, t, scan.width, scan.height, scan.frames, c3);
        coords.insert(coords.end(), {c3[0], c3[1], c3[2]});
        for (int c = 0; c < classes; ++c)
            targets.push_back(scan.labels[idx] == c ? 1.0 : 0.0);
    }
}

}  // namespace

TrainResult train(ModelParams& params, AdamState& adam, const ModelConfig& mc,
                  const std::vector<CineScan>& dataset, const TrainConfig& cfg,
                  std::int64_t start_step) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.queries_per_step < 1)
        throw std::invalid_argument("train: queries_per_step must be >= 1");

    TrainResult result;
    result.losses.reserve(cfg.steps);

    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    UndersampleOptions sampling = cfg.sampling;
    sampling.acceleration = cfg.acceleration;

    std::vector<double> coords, targets_flat;
    for (int step = 0; step < cfg.steps; ++step) {
        const std::int64_t global_step = start_step + step;
        const std::size_t epoch = static_cast<std::size_t>(global_step) / dataset.size();
        const std::size_t pos = static_cast<std::size_t>(global_step) % dataset.size();
        if (pos == 0 || step == 0) {
            Rng shuffle_rng(mix_seed(cfg.seed, 0xE90C0 + epoch));
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), shuffle_rng);
        }
        const CineScan& scan = dataset[order[pos]];

        // fresh masks and B0 on every visit (on-the-fly undersampling)
        Rng step_rng(mix_seed(cfg.seed, 0x57E9 + static_cast<std::uint64_t>(global_step)));
        const auto under = undersample(scan, sampling, step_rng);

        sample_queries(scan, cfg.queries_per_step, step_rng, coords, targets_flat, mc.classes);
        const Tensor targets =
            make_tensor({cfg.queries_per_step, mc.classes}, targets_flat);

        Tape tape;
        const Tensor latents = encoder_forward(tape, under.samples, params, mc);
        const Tensor logits =
            decoder_forward(tape, latents, coords, cfg.queries_per_step, params, mc);
        const Tensor probs = tape.sigmoid(logits);
        const Tensor dice = soft_dice_loss(tape, probs, targets);
        const Tensor bce = bce_loss(tape, probs, targets);
        const Tensor total =
            tape.add(tape.scale(dice, cfg.w_dice), tape.scale(bce, cfg.w_bce));

        for (auto& [name, t] : params.entries) t->zero_grad();
        tape.backward(total);
        adam_step(params, adam, cfg);

        result.losses.push_back({dice->values[0], bce->values[0], total->values[0]});
    }
    result.steps_done = start_step + cfg.steps;
    return result;
}

}  // namespace kseg
