#include "kseg/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kseg {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace {

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ofstream& out, T v) {
    write_bytes(out, &v, sizeof(T));
}

void read_bytes(std::ifstream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("file truncated");
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v;
    read_bytes(in, &v, sizeof(T));
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

}  // namespace

std::size_t dataset_file_size(int count, int frames, int height, int width) {
    const std::size_t voxels = static_cast<std::size_t>(frames) * height * width;
    return 4 + 1 + 4 * 4 + static_cast<std::size_t>(count) * (voxels * 4 + voxels);
}

void save_dataset(const std::string& path, const std::vector<CineScan>& scans) {
    if (scans.empty()) throw std::invalid_argument("save_dataset: empty scan list");
    const int T = scans[0].frames, H = scans[0].height, W = scans[0].width;
    for (const auto& s : scans)
        if (s.frames != T || s.height != H || s.width != W)
            throw std::invalid_argument("save_dataset: scans must share a common shape");

    auto out = open_out(path);
    write_bytes(out, kDatasetMagic, 4);
    write_pod(out, kDatasetVersion);
    write_pod(out, static_cast<std::uint32_t>(scans.size()));
    write_pod(out, static_cast<std::uint32_t>(T));
    write_pod(out, static_cast<std::uint32_t>(H));
    write_pod(out, static_cast<std::uint32_t>(W));
    for (const auto& s : scans) {
        for (double v : s.image) write_pod(out, static_cast<float>(v));
        write_bytes(out, s.labels.data(), s.labels.size());
    }
    if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

std::vector<CineScan> load_dataset(const std::string& path) {
    auto in = open_in(path);
    char magic[4];
    read_bytes(in, magic, 4);
    if (std::memcmp(magic, kDatasetMagic, 4) != 0)
        throw std::runtime_error("load_dataset: bad magic in " + path);
    const auto version = read_pod<std::uint8_t>(in);
    if (version != kDatasetVersion)
        throw std::runtime_error("load_dataset: unsupported version " +
                                 std::to_string(version));
    const auto count = read_pod<std::uint32_t>(in);
    const auto T = read_pod<std::uint32_t>(in);
    const auto H = read_pod<std::uint32_t>(in);
    const auto W = read_pod<std::uint32_t>(in);
    const std::size_t voxels = static_cast<std::size_t>(T) * H * W;

    std::vector<CineScan> scans(count);
    for (auto& s : scans) {
        s.frames = static_cast<int>(T);
        s.height = static_cast<int>(H);
        s.width = static_cast<int>(W);
        s.image.resize(voxels);
        s.labels.resize(voxels);
        for (auto& v : s.image) v = static_cast<double>(read_pod<float>(in));
        read_bytes(in, s.labels.data(), voxels);
    }
    // declared sizes must match the payload exactly
    in.peek();
    if (!in.eof()) throw std::runtime_error("load_dataset: trailing bytes in " + path);
    return scans;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    auto out = open_out(path);
    write_bytes(out, kCheckpointMagic, 8);
    const ModelConfig& c = ckpt.config;
    for (int f : {c.latents, c.width, c.heads, c.encoder_layers, c.decoder_layers,
                  c.pos_frequencies, c.classes, c.ff_mult})
        write_pod(out, static_cast<std::uint32_t>(f));
    write_pod(out, static_cast<std::uint32_t>(ckpt.params.entries.size()));
    for (const auto& [name, t] : ckpt.params.entries) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        write_bytes(out, name.data(), name.size());
        write_pod(out, static_cast<std::uint32_t>(t->shape.size()));
        for (int e : t->shape) write_pod(out, static_cast<std::uint32_t>(e));
        write_bytes(out, t->values.data(), t->values.size() * sizeof(double));
    }
    write_pod(out, ckpt.step);
    write_pod(out, ckpt.seed);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    auto in = open_in(path);
    char magic[8];
    read_bytes(in, magic, 8);
    if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    Checkpoint ckpt;
    ModelConfig& c = ckpt.config;
    for (int* f : {&c.latents, &c.width, &c.heads, &c.encoder_layers, &c.decoder_layers,
                   &c.pos_frequencies, &c.classes, &c.ff_mult})
        *f = static_cast<int>(read_pod<std::uint32_t>(in));
    c.validate();
    const auto n_params = read_pod<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        read_bytes(in, name.data(), name_len);
        const auto rank = read_pod<std::uint32_t>(in);
        std::vector<int> shape(rank);
        for (auto& e : shape) e = static_cast<int>(read_pod<std::uint32_t>(in));
        Tensor t = make_tensor(shape, true);
        read_bytes(in, t->values.data(), t->values.size() * sizeof(double));
        ckpt.params.entries.emplace_back(std::move(name), std::move(t));
    }
    ckpt.step = read_pod<std::int64_t>(in);
    ckpt.seed = read_pod<std::uint64_t>(in);
    in.peek();
    if (!in.eof()) throw std::runtime_error("load_checkpoint: trailing bytes in " + path);
    return ckpt;
}

void save_loss_csv(const std::string& path, const std::vector<double>& dice,
                   const std::vector<double>& bce, const std::vector<double>& total,
                   std::int64_t first_step) {
    if (dice.size() != bce.size() || dice.size() != total.size())
        throw std::invalid_argument("save_loss_csv: column length mismatch");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "step,dice_loss,bce_loss,total\n";
    out.precision(17);
    for (std::size_t i = 0; i < dice.size(); ++i)
        out << (first_step + static_cast<std::int64_t>(i)) << ',' << dice[i] << ','
            << bce[i] << ',' << total[i] << '\n';
}

}  // namespace kseg
