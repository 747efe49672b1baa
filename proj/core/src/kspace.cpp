#include "kseg/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace kseg {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// in-place radix-2 Cooley-Tukey; sign = -1 forward, +1 inverse (unscaled)
void fft_pow2(Complex* data, int n, int stride, int sign) {
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[static_cast<std::size_t>(i) * stride],
                             data[static_cast<std::size_t>(j) * stride]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / len;
        const Complex wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                Complex* u = data + static_cast<std::size_t>(i + k) * stride;
                Complex* v = data + static_cast<std::size_t>(i + k + len / 2) * stride;
                const Complex t = *v * w;
                *v = *u - t;
                *u += t;
                w *= wl;
            }
        }
    }
}

// direct DFT fallback for non-power-of-two extents
void dft_slow(Complex* data, int n, int stride, int sign) {
    std::vector<Complex> out(n);
    for (int k = 0; k < n; ++k) {
        Complex acc(0.0, 0.0);
        for (int j = 0; j < n; ++j) {
            const double ang = sign * 2.0 * std::numbers::pi * k * j / n;
            acc += data[static_cast<std::size_t>(j) * stride] * Complex(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    for (int k = 0; k < n; ++k) data[static_cast<std::size_t>(k) * stride] = out[k];
}

void fft_1d(Complex* data, int n, int stride, int sign) {
    if (is_pow2(n))
        fft_pow2(data, n, stride, sign);
    else
        dft_slow(data, n, stride, sign);
}

// swap half-spaces so index n/2 becomes index 0 (and back)
void shift_rows(std::vector<Complex>& v, int h, int w, bool inverse) {
    const int sh = inverse ? (h - h / 2) : h / 2;
    std::vector<Complex> tmp(v.size());
    for (int y = 0; y < h; ++y) {
        const int src = (y + sh) % h;
        std::copy_n(v.begin() + static_cast<std::size_t>(src) * w, w,
                    tmp.begin() + static_cast<std::size_t>(y) * w);
    }
    v.swap(tmp);
}

void shift_cols(std::vector<Complex>& v, int h, int w, bool inverse) {
    const int sw = inverse ? (w - w / 2) : w / 2;
    std::vector<Complex> tmp(v.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            tmp[static_cast<std::size_t>(y) * w + x] =
                v[static_cast<std::size_t>(y) * w + (x + sw) % w];
    v.swap(tmp);
}

void fft2_core(std::vector<Complex>& v, int h, int w, int sign) {
    for (int y = 0; y < h; ++y) fft_1d(v.data() + static_cast<std::size_t>(y) * w, w, 1, sign);
    for (int x = 0; x < w; ++x) fft_1d(v.data() + x, h, w, sign);
}

}  // namespace

KSpaceFrame fft2_centered(const std::vector<Complex>& frame, int height, int width) {
    if (frame.size() != static_cast<std::size_t>(height) * width)
        throw std::invalid_argument("fft2_centered: frame size mismatch");
    std::vector<Complex> v = frame;
    // ifftshift → row/col FFT → fftshift, unitary scaling
    shift_rows(v, height, width, true);
    shift_cols(v, height, width, true);
    fft2_core(v, height, width, -1);
    shift_rows(v, height, width, false);
    shift_cols(v, height, width, false);
    const double scale = 1.0 / std::sqrt(static_cast<double>(height) * width);
    for (auto& c : v) c *= scale;
    KSpaceFrame out;
    out.height = height;
    out.width = width;
    out.values = std::move(v);
    return out;
}

KSpaceFrame fft2_centered(const std::vector<double>& frame, int height, int width) {
    std::vector<Complex> c(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) c[i] = Complex(frame[i], 0.0);
    return fft2_centered(c, height, width);
}

std::vector<Complex> ifft2_centered(const KSpaceFrame& spectrum) {
    const int h = spectrum.height, w = spectrum.width;
    std::vector<Complex> v = spectrum.values;
    shift_rows(v, h, w, true);
    shift_cols(v, h, w, true);
    fft2_core(v, h, w, +1);
    shift_rows(v, h, w, false);
    shift_cols(v, h, w, false);
    const double scale = 1.0 / std::sqrt(static_cast<double>(h) * w);
    for (auto& c : v) c *= scale;
    return v;
}

std::vector<Complex> apply_phase_ramp(const std::vector<double>& frame, int height,
                                      int width, double a, double b, double c) {
    std::vector<Complex> out(frame.size());
    std::size_t i = 0;
    for (int y = 0; y < height; ++y) {
        const double yc = y - height / 2.0;
        for (int x = 0; x < width; ++x, ++i) {
            const double xc = x - width / 2.0;
            const double phi = a * xc + b * yc + c;
            out[i] = frame[i] * Complex(std::cos(phi), std::sin(phi));
        }
    }
    return out;
}

std::vector<Complex> apply_b0(const std::vector<double>& frame, int height, int width,
                              const B0Params& b0, Rng& rng) {
    const double a = normal(rng, 0.0, b0.sigma_ramp);
    const double b = normal(rng, 0.0, b0.sigma_ramp);
    const double c = normal(rng, 0.0, b0.sigma_offset);
    return apply_phase_ramp(frame, height, width, a, b, c);
}

std::vector<int> sample_mask(int height, double acceleration, double sigma_lines, Rng& rng) {
    if (acceleration < 1.0) throw std::invalid_argument("sample_mask: acceleration must be >= 1");
    if (sigma_lines <= 0) sigma_lines = height / 4.0;
    const int target = std::max(1, static_cast<int>(std::lround(height / acceleration)));
    std::set<int> lines;
    lines.insert(height / 2);  // DC always acquired
    while (static_cast<int>(lines.size()) < target) {
        const int idx = std::clamp(
            static_cast<int>(std::lround(normal(rng, height / 2.0, sigma_lines))), 0, height - 1);
        lines.insert(idx);  // rejection: re-draw until target distinct lines
    }
    return {lines.begin(), lines.end()};
}

UndersampleResult undersample(const CineScan& scan, const UndersampleOptions& opt, Rng& rng) {
    const int T = scan.frames, H = scan.height, W = scan.width;
    UndersampleResult res;
    res.samples.height = H;
    res.samples.width = W;
    res.samples.frames = T;

    B0Params b0 = opt.b0;
    b0.sigma_ramp *= opt.sigma_b0_scale;
    b0.sigma_offset *= opt.sigma_b0_scale;

    std::vector<int> shared_lines;
    if (!opt.per_frame_masks)
        shared_lines = sample_mask(H, opt.acceleration, opt.sigma_lines, rng);

    for (int t = 0; t < T; ++t) {
        std::vector<double> frame(static_cast<std::size_t>(H) * W);
        std::copy_n(scan.image.begin() + static_cast<std::size_t>(t) * H * W, frame.size(),
                    frame.begin());
        const auto phased = apply_b0(frame, H, W, b0, rng);
        const KSpaceFrame spec = fft2_centered(phased, H, W);
        const std::vector<int> lines =
            opt.per_frame_masks ? sample_mask(H, opt.acceleration, opt.sigma_lines, rng)
                                : shared_lines;
        res.mask.lines.push_back(lines);
        for (int ky : lines)
            for (int kx = 0; kx < W; ++kx) {
                const Complex v = spec.at(ky, kx);
                res.samples.samples.push_back({ky, kx, t, v.real(), v.imag()});
            }
    }

    double max_mag = 0.0;
    for (const auto& s : res.samples.samples)
        max_mag = std::max(max_mag, std::hypot(s.re, s.im));
    if (max_mag > 0.0) {
        for (auto& s : res.samples.samples) {
            s.re /= max_mag;
            s.im /= max_mag;
        }
        res.samples.normalization_factor = max_mag;
    }
    return res;
}

std::vector<double> zero_fill_recon(const KSpaceSampleSet& set) {
    const int T = set.frames, H = set.height, W = set.width;
    std::vector<double> out(static_cast<std::size_t>(T) * H * W, 0.0);
    std::vector<KSpaceFrame> grids(T);
    for (auto& g : grids) {
        g.height = H;
        g.width = W;
        g.values.assign(static_cast<std::size_t>(H) * W, Complex(0.0, 0.0));
    }
    for (const auto& s : set.samples) {
        if (s.t < 0 || s.t >= T || s.ky < 0 || s.ky >= H || s.kx < 0 || s.kx >= W)
            throw std::out_of_range("zero_fill_recon: sample index out of range");
        grids[s.t].at(s.ky, s.kx) = Complex(s.re, s.im);
    }
    for (int t = 0; t < T; ++t) {
        const auto img = ifft2_centered(grids[t]);
        for (std::size_t i = 0; i < img.size(); ++i)
            out[static_cast<std::size_t>(t) * H * W + i] =
                std::abs(img[i]) * set.normalization_factor;
    }
    return out;
}

}  // namespace kseg
