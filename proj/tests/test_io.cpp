#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "kseg/config.hpp"
#include "kseg/io.hpp"

using namespace kseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("kseg_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("dataset roundtrip is bit-exact and size matches the format arithmetic") {
    TempDir tmp;
    PhantomParams p;
    p.height = p.width = 16;
    p.frames = 2;
    p.inner_radius = 3.0;
    p.outer_radius = 5.0;
    const auto scans = generate_dataset(4, p, 1);
    const auto path = tmp.file("d.kseg");
    save_dataset(path, scans);

    CHECK(fs::file_size(path) == dataset_file_size(4, 2, 16, 16));

    const auto loaded = load_dataset(path);
    REQUIRE(loaded.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(loaded[i].labels == scans[i].labels);
        // image payload is f32 on disk; compare through the same cast
        for (std::size_t j = 0; j < scans[i].image.size(); ++j)
            CHECK(loaded[i].image[j] == static_cast<double>(static_cast<float>(scans[i].image[j])));
    }

    // save(load(x)) is byte-identical
    const auto path2 = tmp.file("d2.kseg");
    save_dataset(path2, loaded);
    CHECK(read_all(path) == read_all(path2));
}

TEST_CASE("dataset rejects corrupt magic and truncation") {
    TempDir tmp;
    PhantomParams p;
    p.height = p.width = 16;
    p.frames = 2;
    p.inner_radius = 3.0;
    p.outer_radius = 5.0;
    const auto path = tmp.file("bad.kseg");
    save_dataset(path, generate_dataset(1, p, 2));

    auto bytes = read_all(path);
    bytes[0] = 'X';
    std::ofstream(path, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("magic"), std::runtime_error);

    const auto trunc = tmp.file("trunc.kseg");
    std::ofstream(trunc, std::ios::binary).write(bytes.data(), bytes.size() / 2);
    CHECK_THROWS_AS(load_dataset(trunc), std::runtime_error);
}

TEST_CASE("checkpoint roundtrip reproduces parameters bit-exactly") {
    TempDir tmp;
    Checkpoint ckpt;
    ckpt.config.latents = 8;
    ckpt.config.width = 16;
    ckpt.config.heads = 2;
    ckpt.params = init_params(ckpt.config, 77);
    ckpt.step = 1234;
    ckpt.seed = 99;

    const auto path = tmp.file("m.ckpt");
    save_checkpoint(path, ckpt);
    const auto loaded = load_checkpoint(path);

    CHECK(loaded.config == ckpt.config);
    CHECK(loaded.step == 1234);
    CHECK(loaded.seed == 99);
    REQUIRE(loaded.params.entries.size() == ckpt.params.entries.size());
    for (std::size_t i = 0; i < ckpt.params.entries.size(); ++i) {
        CHECK(loaded.params.entries[i].first == ckpt.params.entries[i].first);
        CHECK(loaded.params.entries[i].second->values == ckpt.params.entries[i].second->values);
        CHECK(loaded.params.entries[i].second->shape == ckpt.params.entries[i].second->shape);
    }

    const auto path2 = tmp.file("m2.ckpt");
    save_checkpoint(path2, loaded);
    CHECK(read_all(path) == read_all(path2));

    auto bytes = read_all(path);
    bytes[2] = '?';
    std::ofstream(path, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), std::runtime_error);
}

TEST_CASE("config: defaults, parsing, unknown-key rejection, resolved echo") {
    const RunConfig def = RunConfig::from_json_text("{}");
    CHECK(def.model.latents == 64);
    CHECK(def.train.learning_rate == 1e-3);
    CHECK(def.eval.accelerations == std::vector<double>{4, 8, 16, 32, 64});

    const RunConfig cfg = RunConfig::from_json_text(R"({
        "phantom": {"height": 32, "width": 32, "frames": 4, "count_train": 5},
        "kspace": {"R": 16, "per_frame_masks": false},
        "model": {"M": 16, "D": 32, "heads": 4},
        "train": {"steps": 50, "lr": 0.01, "P_train": 128, "seed": 3},
        "eval": {"R_list": [4, 8], "seed": 4}
    })");
    CHECK(cfg.phantom.height == 32);
    CHECK(cfg.count_train == 5);
    CHECK(cfg.kspace.acceleration == 16);
    CHECK(cfg.kspace.per_frame_masks == false);
    CHECK(cfg.model.latents == 16);
    CHECK(cfg.train.steps == 50);
    CHECK(cfg.train.acceleration == 16);  // shared acquisition settings
    CHECK(cfg.eval.accelerations == std::vector<double>{4, 8});

    CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"phantm": {}})"),
                         doctest::Contains("phantm"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"model": {"depth": 3}})"),
                         doctest::Contains("depth"), std::invalid_argument);

    // resolved dump parses back to the same config
    const RunConfig echo = RunConfig::from_json_text(cfg.to_json_text());
    CHECK(echo.to_json_text() == cfg.to_json_text());
}

TEST_CASE("loss csv has one row per step") {
    TempDir tmp;
    const auto path = tmp.file("loss.csv");
    save_loss_csv(path, {0.5, 0.4}, {0.7, 0.6}, {1.2, 1.0}, 10);
    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "step,dice_loss,bce_loss,total");
    CHECK(lines[1].starts_with("10,"));
    CHECK(lines[2].starts_with("11,"));
}
