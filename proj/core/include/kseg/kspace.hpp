#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "kseg/phantom.hpp"
#include "kseg/rng.hpp"

namespace kseg {

using Complex = std::complex<double>;

/// H×W complex grid with the DC component at (H/2, W/2).
struct KSpaceFrame {
    int height = 0, width = 0;
    std::vector<Complex> values;  // row-major

    Complex& at(int ky, int kx) { return values[static_cast<std::size_t>(ky) * width + kx]; }
    Complex at(int ky, int kx) const { return values[static_cast<std::size_t>(ky) * width + kx]; }
};

/// Unitary (1/√(HW)) centered 2-D DFT. Radix-2 fast path when H and W are
/// powers of two, direct DFT otherwise.
KSpaceFrame fft2_centered(const std::vector<Complex>& frame, int height, int width);
KSpaceFrame fft2_centered(const std::vector<double>& frame, int height, int width);
std::vector<Complex> ifft2_centered(const KSpaceFrame& spectrum);

/// Random linear phase ramp; coefficients a, b (rad/pixel) and c (rad) are
/// drawn Normal(0, σ) per frame. Breaks the conjugate symmetry of real images.
struct B0Params {
    double sigma_ramp = 0.1;    // std of a, b
    double sigma_offset = 0.5;  // std of c
};

/// frame · exp(i·(a·x̄ + b·ȳ + c)) with x̄, ȳ centered pixel coordinates.
std::vector<Complex> apply_b0(const std::vector<double>& frame, int height, int width,
                              const B0Params& b0, Rng& rng);
/// Same, with explicit coefficients (σ = 0 path and tests).
std::vector<Complex> apply_phase_ramp(const std::vector<double>& frame, int height,
                                      int width, double a, double b, double c);

/// Selected phase-encode line (row) indices per frame.
struct UndersamplingMask {
    std::vector<std::vector<int>> lines;  // per frame, sorted ascending
};

/// max(1, round(H/R)) distinct lines; the DC line H/2 first, the rest drawn
/// from round(Normal(H/2, σ_lines)) clamped to [0, H−1], duplicates rejected.
std::vector<int> sample_mask(int height, double acceleration, double sigma_lines, Rng& rng);

struct KSpaceSample {
    int ky = 0, kx = 0, t = 0;
    double re = 0.0, im = 0.0;
};

/// The set K of sampled points, the model's only input. Order-independent
/// semantics; complex values normalized so max magnitude is 1.
struct KSpaceSampleSet {
    std::vector<KSpaceSample> samples;
    int height = 0, width = 0, frames = 0;
    double normalization_factor = 1.0;  // scan-level max magnitude pre-normalization

    std::size_t size() const { return samples.size(); }
};

struct UndersampleOptions {
    double acceleration = 8.0;
    double sigma_lines = 0.0;  // <=0 means default H/4
    B0Params b0;
    double sigma_b0_scale = 1.0;  // 0 disables B0 entirely
    bool per_frame_masks = true;
};

struct UndersampleResult {
    KSpaceSampleSet samples;
    UndersamplingMask mask;
};

/// Per frame: apply_b0 → fft2_centered → keep masked lines; all kept points
/// concatenated into one set and normalized by the scan-level max magnitude.
UndersampleResult undersample(const CineScan& scan, const UndersampleOptions& opt, Rng& rng);

/// Scatter samples onto a zero grid, inverse FFT per frame, return the
/// magnitude image rescaled by normalization_factor.
std::vector<double> zero_fill_recon(const KSpaceSampleSet& samples);

}  // namespace kseg
