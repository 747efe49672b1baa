#include <benchmark/benchmark.h>

#include "kseg/kspace.hpp"
#include "kseg/metrics.hpp"
#include "kseg/model.hpp"
#include "kseg/phantom.hpp"
#include "kseg/train.hpp"

using namespace kseg;

namespace {

CineScan bench_scan() {
    PhantomParams p;
    p.rng_seed = 77;
    return generate_phantom(p);
}

KSpaceSampleSet bench_samples(double R) {
    CineScan scan = bench_scan();
    UndersampleOptions opt;
    opt.acceleration = R;
    Rng rng(3);
    return undersample(scan, opt, rng).samples;
}

}  // namespace

static void BM_fft2_centered_64(benchmark::State& state) {
    CineScan scan = bench_scan();
    std::vector<double> frame(scan.image.begin(), scan.image.begin() + 64 * 64);
    for (auto _ : state) benchmark::DoNotOptimize(fft2_centered(frame, 64, 64));
}
BENCHMARK(BM_fft2_centered_64);

static void BM_undersample_scan(benchmark::State& state) {
    CineScan scan = bench_scan();
    UndersampleOptions opt;
    opt.acceleration = static_cast<double>(state.range(0));
    Rng rng(9);
    for (auto _ : state) benchmark::DoNotOptimize(undersample(scan, opt, rng));
}
BENCHMARK(BM_undersample_scan)->Arg(4)->Arg(8)->Arg(32);

static void BM_encoder_forward(benchmark::State& state) {
    ModelConfig cfg;
    ModelParams params = init_params(cfg, 1);
    KSpaceSampleSet samples = bench_samples(8.0);
    samples.samples.resize(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        Tape tape;
        benchmark::DoNotOptimize(encoder_forward(tape, samples, params, cfg));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_encoder_forward)->Arg(64)->Arg(1024)->Arg(4096);

static void BM_train_step(benchmark::State& state) {
    ModelConfig cfg;
    cfg.latents = 32;
    cfg.width = 32;
    ModelParams params = init_params(cfg, 1);
    AdamState adam = init_adam_state(params);
    std::vector<CineScan> data = {bench_scan()};
    TrainConfig tc;
    tc.steps = 1;
    std::int64_t step = 0;
    for (auto _ : state) {
        tc.seed = static_cast<std::uint64_t>(step);
        benchmark::DoNotOptimize(train(params, adam, cfg, data, tc, step++));
    }
}
BENCHMARK(BM_train_step)->Unit(benchmark::kMillisecond);

static void BM_hausdorff_volume(benchmark::State& state) {
    CineScan scan = bench_scan();
    std::vector<std::uint8_t> shifted(scan.labels.size(), 0);
    for (int t = 0; t < scan.frames; ++t)
        for (int y = 0; y < scan.height; ++y)
            for (int x = 1; x < scan.width; ++x)
                shifted[(static_cast<std::size_t>(t) * scan.height + y) * scan.width + x] =
                    scan.label(t, y, x - 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            hausdorff(shifted, scan.labels, 1, scan.frames, scan.height, scan.width));
}
BENCHMARK(BM_hausdorff_volume);

BENCHMARK_MAIN();
