#include "kseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kseg/rng.hpp"

namespace kseg {

void PhantomParams::validate() const {
    if (height <= 0 || width <= 0 || frames <= 0)
        throw std::invalid_argument("phantom: dimensions must be positive");
    if (!(inner_radius > 0 && inner_radius < outer_radius &&
          outer_radius < std::min(height, width) / 2.0))
        throw std::invalid_argument("phantom: need 0 < inner < outer < min(H,W)/2");
    if (!(contraction_fraction > 0 && contraction_fraction < 1))
        throw std::invalid_argument("phantom: contraction_fraction must be in (0,1)");
    if (aspect <= 0) throw std::invalid_argument("phantom: aspect must be positive");
    if (noise_std < 0) throw std::invalid_argument("phantom: noise_std must be >= 0");
}

double contracted_radius(double r_ed, double cf, int t, int frames) {
    const double s = std::sin(std::numbers::pi * static_cast<double>(t) / frames);
    return r_ed * (1.0 - cf * s * s);
}

CineScan generate_phantom(const PhantomParams& p) {
    p.validate();
    CineScan scan;
    scan.frames = p.frames;
    scan.height = p.height;
    scan.width = p.width;
    scan.image.assign(static_cast<std::size_t>(p.frames) * p.height * p.width, 0.0);
    scan.labels.assign(scan.image.size(), kBackground);

    Rng rng(p.rng_seed);

    // smooth background: two low-frequency sinusoids with random phase
    const double ph1 = uniform(rng, 0, 2 * std::numbers::pi);
    const double ph2 = uniform(rng, 0, 2 * std::numbers::pi);
    const double amp = 0.05;

    std::size_t idx = 0;
    // noise drawn after geometry so the texture stream stays frame-independent
    std::vector<double> noise(scan.image.size(), 0.0);
    if (p.noise_std > 0)
        for (auto& v : noise) v = normal(rng, 0.0, p.noise_std);

    for (int t = 0; t < p.frames; ++t) {
        const double r_in = contracted_radius(p.inner_radius, p.contraction_fraction, t, p.frames);
        const double r_out = contracted_radius(p.outer_radius, p.contraction_fraction, t, p.frames);
        for (int y = 0; y < p.height; ++y) {
            for (int x = 0; x < p.width; ++x, ++idx) {
                const double dy = (y - p.center_y);
                const double dx = (x - p.center_x) / p.aspect;
                const double r = std::sqrt(dx * dx + dy * dy);
                double v;
                std::uint8_t cls;
                if (r <= r_in) {
                    v = p.intensity_blood;
                    cls = kBloodPool;
                } else if (r <= r_out) {
                    v = p.intensity_myocardium;
                    cls = kMyocardium;
                } else {
                    v = p.intensity_background +
                        amp * std::sin(2 * std::numbers::pi * y / p.height + ph1) *
                              std::cos(2 * std::numbers::pi * x / p.width + ph2);
                    cls = kBackground;
                }
                v += noise[idx];
                scan.image[idx] = std::clamp(v, 0.0, 1.0);
                scan.labels[idx] = cls;
            }
        }
    }
    return scan;
}

std::vector<CineScan> generate_dataset(int count, const PhantomParams& base,
                                       std::uint64_t seed) {
    if (count <= 0) throw std::invalid_argument("generate_dataset: count must be > 0");
    std::vector<CineScan> scans;
    scans.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng jit(mix_seed(seed, static_cast<std::uint64_t>(i)));
        PhantomParams p = base;
        // Jitter ranges are calibrated so that scan identity is dominated by
        // global shape parameters (radius, aspect, contraction) that a
        // set-based encoder can recover from a handful of k-space samples,
        // with a small positional jitter on top.
        p.center_y = base.center_y + uniform(jit, -1.5, 1.5);
        p.center_x = base.center_x + uniform(jit, -1.5, 1.5);
        const double rscale = uniform(jit, 0.75, 1.25);
        p.inner_radius = base.inner_radius * rscale;
        p.outer_radius = base.outer_radius * rscale * uniform(jit, 0.95, 1.1);
        p.aspect = uniform(jit, 0.9, 1.1);
        p.contraction_fraction = std::clamp(
            base.contraction_fraction + uniform(jit, -0.12, 0.12), 0.05, 0.95);
        p.intensity_blood = std::clamp(base.intensity_blood + uniform(jit, -0.05, 0.05), 0.0, 1.0);
        p.intensity_myocardium =
            std::clamp(base.intensity_myocardium + uniform(jit, -0.05, 0.05), 0.0, 1.0);
        p.rng_seed = mix_seed(seed, 0x10000ULL + i);
        scans.push_back(generate_phantom(p));
    }
    return scans;
}

DatasetSplits split_dataset(int count, int n_train, int n_val, int n_test) {
    if (n_train + n_val + n_test > count)
        throw std::invalid_argument("split_dataset: split sizes exceed count");
    DatasetSplits s;
    int i = 0;
    for (int k = 0; k < n_train; ++k) s.train.push_back(i++);
    for (int k = 0; k < n_val; ++k) s.val.push_back(i++);
    for (int k = 0; k < n_test; ++k) s.test.push_back(i++);
    return s;
}

}  // namespace kseg
