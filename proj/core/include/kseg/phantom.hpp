#pragma once

#include <cstdint>
#include <vector>

namespace kseg {

/// Geometry and appearance of one synthetic cine scan. The left-ventricle
/// cavity is a bright disc enclosed by a darker myocardium ring; both
/// contract sinusoidally over the cardiac cycle.
struct PhantomParams {
    int height = 64;
    int width = 64;
    int frames = 8;
    double center_y = 32.0;  // subpixel
    double center_x = 32.0;
    double inner_radius = 10.0;  // LV cavity at end-diastole, pixels
    double outer_radius = 16.0;  // myocardium outer edge at end-diastole
    double aspect = 1.0;         // x-radius multiplier (mild ellipticity)
    double contraction_fraction = 0.3;
    double intensity_background = 0.2;
    double intensity_blood = 0.9;
    double intensity_myocardium = 0.45;
    double noise_std = 0.03;
    std::uint64_t rng_seed = 0;

    void validate() const;  // throws std::invalid_argument
};

enum TissueClass : std::uint8_t {
    kBackground = 0,
    kBloodPool = 1,
    kMyocardium = 2,
};

/// Real-valued 2D+time sequence, values in [0,1], with per-pixel class labels.
struct CineScan {
    int frames = 0, height = 0, width = 0;
    std::vector<double> image;        // T·H·W row-major
    std::vector<std::uint8_t> labels; // T·H·W, values in {0,1,2}

    std::size_t voxels() const { return image.size(); }
    double& pixel(int t, int y, int x) {
        return image[(static_cast<std::size_t>(t) * height + y) * width + x];
    }
    double pixel(int t, int y, int x) const {
        return image[(static_cast<std::size_t>(t) * height + y) * width + x];
    }
    std::uint8_t label(int t, int y, int x) const {
        return labels[(static_cast<std::size_t>(t) * height + y) * width + x];
    }
};

/// Frame-t radius under the contraction law r(t) = r_ED·(1 − cf·sin²(πt/T)).
double contracted_radius(double r_ed, double contraction_fraction, int t, int frames);

/// Deterministic given params; frame 0 is end-diastole, frame ⌊T/2⌋ end-systole.
CineScan generate_phantom(const PhantomParams& params);

struct DatasetSplits {
    std::vector<int> train, val, test;
};

/// `count` scans with jittered center/radii/intensities, seeded per scan.
std::vector<CineScan> generate_dataset(int count, const PhantomParams& base,
                                       std::uint64_t seed);

/// Disjoint deterministic index splits; sizes must sum to <= count.
DatasetSplits split_dataset(int count, int n_train, int n_val, int n_test);

}  // namespace kseg
