#include "kseg/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kseg/rng.hpp"

namespace kseg {

void ModelConfig::validate() const {
    if (latents <= 0 || width <= 0 || heads <= 0 || encoder_layers <= 0 ||
        decoder_layers <= 0 || pos_frequencies <= 0 || classes <= 0 || ff_mult <= 0)
        throw std::invalid_argument("model config: all fields must be positive");
    if (width % heads != 0)
        throw std::invalid_argument("model config: width must be divisible by heads");
}

Tensor& ModelParams::operator[](const std::string& name) {
    for (auto& [n, t] : entries)
        if (n == name) return t;
    entries.emplace_back(name, nullptr);
    return entries.back().second;
}

const Tensor& ModelParams::at(const std::string& name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return t;
    throw std::out_of_range("model params: no parameter named " + name);
}

std::size_t ModelParams::count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries) n += t->numel();
    return n;
}

namespace {

Tensor xavier(int rows, int cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    Tensor t = make_tensor({rows, cols}, true);
    for (auto& v : t->values) v = uniform(rng, -limit, limit);
    return t;
}

Tensor zeros_vec(int n) { return make_tensor({n}, true); }

Tensor ones_vec(int n) {
    Tensor t = make_tensor({n}, true);
    for (auto& v : t->values) v = 1.0;
    return t;
}

void init_attention_block(ModelParams& p, const std::string& prefix, const ModelConfig& c,
                          Rng& rng) {
    const int d = c.width, f = c.ff_mult * c.width;
    p[prefix + ".ln_q.gamma"] = ones_vec(d);
    p[prefix + ".ln_q.beta"] = zeros_vec(d);
    p[prefix + ".ln_kv.gamma"] = ones_vec(d);
    p[prefix + ".ln_kv.beta"] = zeros_vec(d);
    p[prefix + ".wq"] = xavier(d, d, rng);
    p[prefix + ".wk"] = xavier(d, d, rng);
    p[prefix + ".wv"] = xavier(d, d, rng);
    p[prefix + ".wo"] = xavier(d, d, rng);
    p[prefix + ".bq"] = zeros_vec(d);
    p[prefix + ".bk"] = zeros_vec(d);
    p[prefix + ".bv"] = zeros_vec(d);
    p[prefix + ".bo"] = zeros_vec(d);
    p[prefix + ".ln_ff.gamma"] = ones_vec(d);
    p[prefix + ".ln_ff.beta"] = zeros_vec(d);
    p[prefix + ".ff1.w"] = xavier(d, f, rng);
    p[prefix + ".ff1.b"] = zeros_vec(f);
    p[prefix + ".ff2.w"] = xavier(f, d, rng);
    p[prefix + ".ff2.b"] = zeros_vec(d);
}

int pos_width(int dim, int frequencies) { return dim * (2 * frequencies + 1); }

}  // namespace

ModelParams init_params(const ModelConfig& c, std::uint64_t seed) {
    c.validate();
    Rng rng(mix_seed(seed, 0xA11CE));
    ModelParams p;

    const int sample_in = 2 + pos_width(3, c.pos_frequencies);
    const int query_in = pos_width(3, c.pos_frequencies);
    p["embed.w"] = xavier(sample_in, c.width, rng);
    p["embed.b"] = zeros_vec(c.width);
    p["query_embed.w"] = xavier(query_in, c.width, rng);
    p["query_embed.b"] = zeros_vec(c.width);

    Tensor lat = make_tensor({c.latents, c.width}, true);
    for (auto& v : lat->values) v = normal(rng, 0.0, 0.02);
    p["latent_init"] = lat;

    for (int l = 0; l < c.encoder_layers; ++l) {
        init_attention_block(p, "enc" + std::to_string(l) + ".ca", c, rng);
        init_attention_block(p, "enc" + std::to_string(l) + ".sa", c, rng);
    }
    for (int l = 0; l < c.decoder_layers; ++l)
        init_attention_block(p, "dec" + std::to_string(l), c, rng);

    p["head.w"] = xavier(c.width, c.classes, rng);
    p["head.b"] = zeros_vec(c.classes);
    return p;
}

AttentionStats& attention_stats() {
    static AttentionStats stats;
    return stats;
}

Tensor encode_positions(const std::vector<double>& coords, int n, int dim, int frequencies) {
    if (coords.size() != static_cast<std::size_t>(n) * dim)
        throw std::invalid_argument("encode_positions: coords length mismatch");
    const int out_d = pos_width(dim, frequencies);
    Tensor out = make_tensor({n, out_d});
    for (int i = 0; i < n; ++i) {
        double* row = out->values.data() + static_cast<std::size_t>(i) * out_d;
        for (int c = 0; c < dim; ++c) {
            const double v = coords[static_cast<std::size_t>(i) * dim + c];
            if (v < -1.0 || v > 1.0)
                throw std::invalid_argument("encode_positions: coordinate outside [-1,1]");
            double* o = row + c * (2 * frequencies + 1);
            o[0] = v;
            double freq = std::numbers::pi;
            for (int f = 0; f < frequencies; ++f) {
                o[1 + 2 * f] = std::sin(freq * v);
                o[2 + 2 * f] = std::cos(freq * v);
                freq *= 2.0;
            }
        }
    }
    return out;
}

void normalized_coord(int x, int y, int t, int width, int height, int frames, double out[3]) {
    auto norm = [](int i, int extent) {
        return extent > 1 ? 2.0 * i / (extent - 1) - 1.0 : 0.0;
    };
    out[0] = norm(x, width);
    out[1] = norm(y, height);
    out[2] = norm(t, frames);
}

Tensor embed_samples(Tape& tape, const KSpaceSampleSet& set, const ModelParams& params,
                     const ModelConfig& c) {
    if (set.samples.empty()) throw std::invalid_argument("embed_samples: empty sample set");
    const int n = static_cast<int>(set.samples.size());
    std::vector<double> coords(static_cast<std::size_t>(n) * 3);
    for (int i = 0; i < n; ++i) {
        const auto& s = set.samples[i];
        normalized_coord(s.kx, s.ky, s.t, set.width, set.height, set.frames,
                         coords.data() + static_cast<std::size_t>(i) * 3);
    }
    const Tensor pos = encode_positions(coords, n, 3, c.pos_frequencies);
    const int pd = pos->shape[1];
    Tensor feat = make_tensor({n, 2 + pd});
    for (int i = 0; i < n; ++i) {
        double* row = feat->values.data() + static_cast<std::size_t>(i) * (2 + pd);
        row[0] = set.samples[i].re;
        row[1] = set.samples[i].im;
        std::copy_n(pos->values.data() + static_cast<std::size_t>(i) * pd, pd, row + 2);
    }
    return tape.add_rowvec(tape.matmul(feat, params.at("embed.w")), params.at("embed.b"));
}

Tensor attention_block(Tape& tape, const Tensor& queries, const Tensor& keys_values,
                       const ModelParams& p, const std::string& prefix, const ModelConfig& c) {
    const int dh = c.width / c.heads;
    const Tensor qn = tape.layer_norm(queries, p.at(prefix + ".ln_q.gamma"),
                                      p.at(prefix + ".ln_q.beta"));
    const Tensor kvn = tape.layer_norm(keys_values, p.at(prefix + ".ln_kv.gamma"),
                                       p.at(prefix + ".ln_kv.beta"));
    const Tensor q = tape.add_rowvec(tape.matmul(qn, p.at(prefix + ".wq")), p.at(prefix + ".bq"));
    const Tensor k = tape.add_rowvec(tape.matmul(kvn, p.at(prefix + ".wk")), p.at(prefix + ".bk"));
    const Tensor v = tape.add_rowvec(tape.matmul(kvn, p.at(prefix + ".wv")), p.at(prefix + ".bv"));

    std::vector<Tensor> heads;
    heads.reserve(c.heads);
    for (int h = 0; h < c.heads; ++h) {
        const Tensor qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
        const Tensor kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
        const Tensor vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
        Tensor scores = tape.scale(tape.matmul(qh, tape.transpose_last_two(kh)),
                                   1.0 / std::sqrt(static_cast<double>(dh)));
        auto& stats = attention_stats();
        stats.score_matrices++;
        stats.max_score_entries = std::max(stats.max_score_entries, scores->numel());
        const Tensor weights = tape.softmax(scores, 1);
        heads.push_back(tape.matmul(weights, vh));
    }
    const Tensor mixed = c.heads == 1 ? heads[0] : tape.concat_last_axis(heads);
    const Tensor attn_out =
        tape.add_rowvec(tape.matmul(mixed, p.at(prefix + ".wo")), p.at(prefix + ".bo"));
    const Tensor x = tape.add(queries, attn_out);

    const Tensor xn = tape.layer_norm(x, p.at(prefix + ".ln_ff.gamma"),
                                      p.at(prefix + ".ln_ff.beta"));
    const Tensor h1 = tape.gelu(
        tape.add_rowvec(tape.matmul(xn, p.at(prefix + ".ff1.w")), p.at(prefix + ".ff1.b")));
    const Tensor h2 =
        tape.add_rowvec(tape.matmul(h1, p.at(prefix + ".ff2.w")), p.at(prefix + ".ff2.b"));
    return tape.add(x, h2);
}

Tensor encoder_forward(Tape& tape, const KSpaceSampleSet& samples, const ModelParams& p,
                       const ModelConfig& c) {
    const Tensor tokens = embed_samples(tape, samples, p, c);
    Tensor latents = p.at("latent_init");
    for (int l = 0; l < c.encoder_layers; ++l) {
        const std::string base = "enc" + std::to_string(l);
        latents = attention_block(tape, latents, tokens, p, base + ".ca", c);
        latents = attention_block(tape, latents, latents, p, base + ".sa", c);
    }
    return latents;
}

Tensor decoder_forward(Tape& tape, const Tensor& latents, const std::vector<double>& coords,
                       int n_queries, const ModelParams& p, const ModelConfig& c) {
    const Tensor pos = encode_positions(coords, n_queries, 3, c.pos_frequencies);
    Tensor q = tape.add_rowvec(tape.matmul(pos, p.at("query_embed.w")), p.at("query_embed.b"));
    for (int l = 0; l < c.decoder_layers; ++l)
        q = attention_block(tape, q, latents, p, "dec" + std::to_string(l), c);
    return tape.add_rowvec(tape.matmul(q, p.at("head.w")), p.at("head.b"));
}

Segmentation predict_segmentation(const ModelParams& params, const ModelConfig& config,
                                  const KSpaceSampleSet& samples, int frames, int height,
                                  int width, int chunk) {
    Tape enc_tape;
    const Tensor latents = encoder_forward(enc_tape, samples, params, config);

    const int C = config.classes;
    Segmentation seg;
    seg.frames = frames;
    seg.height = height;
    seg.width = width;
    seg.classes = C;
    const std::size_t total = static_cast<std::size_t>(frames) * height * width;
    seg.probabilities.assign(total * C, 0.0);
    seg.labels.assign(total, 0);

    std::vector<double> coords;
    coords.reserve(static_cast<std::size_t>(chunk) * 3);
    std::size_t base = 0;
    auto flush = [&](std::size_t n) {
        if (n == 0) return;
        Tape tape;
        const Tensor logits =
            decoder_forward(tape, latents, coords, static_cast<int>(n), params, config);
        const Tensor probs = tape.sigmoid(logits);
        std::copy_n(probs->values.begin(), n * C, seg.probabilities.begin() + base * C);
        base += n;
        coords.clear();
    };

    for (int t = 0; t < frames; ++t)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double c3[3];
                normalized_coord(x, y, t, width, height, frames, c3);
                coords.insert(coords.end(), {c3[0], c3[1], c3[2]});
                if (static_cast<int>(coords.size() / 3) == chunk) flush(chunk);
            }
    flush(coords.size() / 3);

    for (std::size_t i = 0; i < total; ++i) {
        int best = 0;  // background wins ties
        for (int c = 1; c < C; ++c)
            if (seg.probabilities[i * C + c] > seg.probabilities[i * C + best]) best = c;
        seg.labels[i] = static_cast<std::uint8_t>(best);
    }
    return seg;
}

}  // namespace kseg
