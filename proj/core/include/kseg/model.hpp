#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kseg/kspace.hpp"
#include "kseg/tensor.hpp"

namespace kseg {

struct ModelConfig {
    int latents = 64;       // M
    int width = 64;         // D
    int heads = 4;
    int encoder_layers = 4; // L_enc, cross-attention + self-attention each
    int decoder_layers = 4; // L_dec, cross-attention blocks
    int pos_frequencies = 8;  // F, octave Fourier features
    int classes = 3;        // C
    int ff_mult = 2;

    void validate() const;  // throws std::invalid_argument
    bool operator==(const ModelConfig&) const = default;
};

/// Named parameter store. Iteration order is the registration order, which
/// is fixed by ModelConfig, so serialization and Adam sweeps are stable.
struct ModelParams {
    std::vector<std::pair<std::string, Tensor>> entries;

    Tensor& operator[](const std::string& name);
    const Tensor& at(const std::string& name) const;
    std::size_t count() const;  // total scalar parameters
};

/// Fresh parameters for `config`, deterministic given `seed`.
/// Projections are Xavier-uniform, biases zero, latent init Normal(0, 0.02).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Tracks attention score-matrix sizes so the latent bottleneck's memory
/// contract can be asserted (no N×N buffer, largest score matrix bounded).
struct AttentionStats {
    std::size_t max_score_entries = 0;
    std::size_t score_matrices = 0;
    void reset() { *this = {}; }
};
AttentionStats& attention_stats();

/// [c, sin(π·2⁰·c), cos(π·2⁰·c), …, sin(π·2^{F−1}·c), cos(π·2^{F−1}·c)]
/// per component; coords must lie in [−1, 1].
Tensor encode_positions(const std::vector<double>& coords, int n, int dim, int frequencies);

/// Per sample: concat(re, im, encode_positions(kx̄, kȳ, t̄)) → linear to D.
Tensor embed_samples(Tape& tape, const KSpaceSampleSet& samples, const ModelParams& params,
                     const ModelConfig& config);

/// Pre-norm multi-head attention + feed-forward, both with residuals.
/// `prefix` selects the block's parameters.
Tensor attention_block(Tape& tape, const Tensor& queries, const Tensor& keys_values,
                       const ModelParams& params, const std::string& prefix,
                       const ModelConfig& config);

/// Learned M×D latents refined by L_enc (cross-attention, self-attention) pairs.
Tensor encoder_forward(Tape& tape, const KSpaceSampleSet& samples, const ModelParams& params,
                       const ModelConfig& config);

/// L_dec cross-attention blocks conditioning encoded query coordinates on the
/// latents, then a linear head to per-class logits.
Tensor decoder_forward(Tape& tape, const Tensor& latents,
                       const std::vector<double>& query_coords, int n_queries,
                       const ModelParams& params, const ModelConfig& config);

struct Segmentation {
    int frames = 0, height = 0, width = 0, classes = 0;
    std::vector<double> probabilities;  // T·H·W·C
    std::vector<std::uint8_t> labels;   // T·H·W, argmax with background tie-break
};

/// Decode every grid coordinate (normalized to [−1,1]³) in chunks.
Segmentation predict_segmentation(const ModelParams& params, const ModelConfig& config,
                                  const KSpaceSampleSet& samples, int frames, int height,
                                  int width, int chunk = 4096);

/// (x, y, t) grid coordinate normalized to [−1, 1] over each extent.
void normalized_coord(int x, int y, int t, int width, int height, int frames, double out[3]);

}  // namespace kseg
