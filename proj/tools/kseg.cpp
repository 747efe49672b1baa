// kseg: phantom cine generation, k-space undersampled training, Table-style
// evaluation, and figure panel export.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kseg/config.hpp"
#include "kseg/io.hpp"
#include "kseg/kspace.hpp"
#include "kseg/metrics.hpp"
#include "kseg/model.hpp"
#include "kseg/phantom.hpp"
#include "kseg/train.hpp"

namespace {

using namespace kseg;

RunConfig load_config(const std::string& path) {
    return path.empty() ? RunConfig::from_json_text("{}") : RunConfig::from_json_file(path);
}

int cmd_gen_data(const std::string& config_path, const std::string& out_prefix,
                 std::uint64_t seed_override, bool has_seed) {
    RunConfig cfg = load_config(config_path);
    if (has_seed) cfg.data_seed = seed_override;

    const int total = cfg.count_train + cfg.count_val + cfg.count_test;
    const auto scans = generate_dataset(total, cfg.phantom, cfg.data_seed);
    const auto splits = split_dataset(total, cfg.count_train, cfg.count_val, cfg.count_test);

    auto subset = [&](const std::vector<int>& idx) {
        std::vector<CineScan> out;
        out.reserve(idx.size());
        for (int i : idx) out.push_back(scans[i]);
        return out;
    };
    save_dataset(out_prefix + "-train.kseg", subset(splits.train));
    save_dataset(out_prefix + "-val.kseg", subset(splits.val));
    save_dataset(out_prefix + "-test.kseg", subset(splits.test));

    std::cout << "resolved config:\n" << cfg.to_json_text() << "\n";
    std::cout << "wrote " << splits.train.size() << " train / " << splits.val.size()
              << " val / " << splits.test.size() << " test scans (" << cfg.phantom.frames
              << "x" << cfg.phantom.height << "x" << cfg.phantom.width << ") to "
              << out_prefix << "-{train,val,test}.kseg\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_ckpt, const std::string& resume_path,
              std::uint64_t seed_override, bool has_seed) {
    RunConfig cfg = load_config(config_path);
    if (has_seed) cfg.train.seed = seed_override;

    const auto dataset = load_dataset(data_path);

    Checkpoint ckpt;
    std::int64_t start_step = 0;
    if (!resume_path.empty()) {
        ckpt = load_checkpoint(resume_path);
        if (!(ckpt.config == cfg.model))
            throw std::runtime_error("train: checkpoint model config disagrees with --config");
        start_step = ckpt.step;
    } else {
        ckpt.config = cfg.model;
        ckpt.params = init_params(cfg.model, cfg.train.seed);
        ckpt.seed = cfg.train.seed;
    }

    AdamState adam = init_adam_state(ckpt.params);
    adam.step = start_step;
    const auto result = train(ckpt.params, adam, ckpt.config, dataset, cfg.train, start_step);
    ckpt.step = result.steps_done;

    save_checkpoint(out_ckpt, ckpt);
    std::vector<double> dice, bce, total;
    for (const auto& l : result.losses) {
        dice.push_back(l.dice);
        bce.push_back(l.bce);
        total.push_back(l.total);
    }
    save_loss_csv(out_ckpt + ".loss.csv", dice, bce, total, start_step);
    std::cout << "trained " << cfg.train.steps << " steps (now at step " << ckpt.step
              << "), final loss " << (total.empty() ? 0.0 : total.back()) << "\n"
              << "checkpoint: " << out_ckpt << "\nloss log:   " << out_ckpt << ".loss.csv\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& data_path, const std::string& out_prefix,
             std::uint64_t seed_override, bool has_seed) {
    RunConfig cfg = load_config(config_path);
    if (has_seed) cfg.eval.seed = seed_override;

    const auto ckpt = load_checkpoint(ckpt_path);
    const auto scans = load_dataset(data_path);
    const auto report = evaluate(ckpt.params, ckpt.config, scans, cfg.eval);

    const std::string table = report.to_table();
    std::cout << table;
    if (!out_prefix.empty()) {
        std::ofstream(out_prefix + ".txt") << table;
        std::ofstream(out_prefix + ".kv") << report.to_key_values();
        std::cout << "wrote " << out_prefix << ".txt and " << out_prefix << ".kv\n";
    }
    return 0;
}

// binary PPM (P6) writer; rgb in [0,1]
void write_ppm(const std::string& path, const std::vector<double>& rgb, int h, int w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    for (double v : rgb) {
        const auto byte = static_cast<unsigned char>(
            std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        out.put(static_cast<char>(byte));
    }
}

// grayscale base with class 1 in red and class 2 in blue, weighted by confidence
std::vector<double> overlay(const std::vector<double>& gray,
                            const std::vector<double>& conf1,
                            const std::vector<double>& conf2, std::size_t n) {
    std::vector<double> rgb(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = gray[i], c1 = conf1[i], c2 = conf2[i];
        const double base = g * (1.0 - c1) * (1.0 - c2);
        rgb[i * 3 + 0] = base + c1;        // class 1: pure red at full confidence
        rgb[i * 3 + 1] = base;
        rgb[i * 3 + 2] = base + c2;        // class 2: pure blue
    }
    return rgb;
}

int cmd_visualize(const std::string& config_path, const std::string& ckpt_path,
                  const std::string& data_path, int scan_index, int frame,
                  const std::string& out_dir, std::uint64_t seed_override, bool has_seed) {
    RunConfig cfg = load_config(config_path);
    if (has_seed) cfg.eval.seed = seed_override;

    const auto ckpt = load_checkpoint(ckpt_path);
    const auto scans = load_dataset(data_path);
    if (scan_index < 0 || scan_index >= static_cast<int>(scans.size()))
        throw std::out_of_range("visualize: scan index out of range");
    const CineScan& scan = scans[scan_index];
    if (frame < 0 || frame >= scan.frames)
        throw std::out_of_range("visualize: frame out of range");

    std::filesystem::create_directories(out_dir);
    const int H = scan.height, W = scan.width;
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    const std::size_t off = static_cast<std::size_t>(frame) * hw;

    for (double R : cfg.eval.accelerations) {
        UndersampleOptions opt = cfg.kspace;
        opt.acceleration = R;
        Rng rng(mix_seed(cfg.eval.seed, (static_cast<std::uint64_t>(R) << 32) +
                                            static_cast<std::uint64_t>(scan_index)));
        const auto under = undersample(scan, opt, rng);
        const auto seg = predict_segmentation(ckpt.params, ckpt.config, under.samples,
                                              scan.frames, H, W);
        const auto zf = zero_fill_recon(under.samples);

        std::vector<double> gray(scan.image.begin() + off, scan.image.begin() + off + hw);
        std::vector<double> gt1(hw), gt2(hw), pr1(hw), pr2(hw), zfg(hw);
        for (std::size_t i = 0; i < hw; ++i) {
            gt1[i] = scan.labels[off + i] == 1 ? 1.0 : 0.0;
            gt2[i] = scan.labels[off + i] == 2 ? 1.0 : 0.0;
            pr1[i] = seg.labels[off + i] == 1 ? seg.probabilities[(off + i) * seg.classes + 1] : 0.0;
            pr2[i] = seg.labels[off + i] == 2 ? seg.probabilities[(off + i) * seg.classes + 2] : 0.0;
            zfg[i] = zf[off + i];
        }
        const std::string base = out_dir + "/R" + std::to_string(static_cast<int>(R));
        write_ppm(base + "_gt.ppm", overlay(gray, gt1, gt2, hw), H, W);
        write_ppm(base + "_pred.ppm", overlay(gray, pr1, pr2, hw), H, W);
        std::vector<double> zrgb(hw * 3);
        for (std::size_t i = 0; i < hw; ++i)
            zrgb[i * 3] = zrgb[i * 3 + 1] = zrgb[i * 3 + 2] = zfg[i];
        write_ppm(base + "_zerofill.ppm", zrgb, H, W);
    }
    std::cout << "wrote panels for " << cfg.eval.accelerations.size()
              << " acceleration factor(s) to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"segmentation direct from undersampled cine k-space"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path, ckpt_path, resume_path, out_dir;
    std::uint64_t seed = 0;
    int scan_index = 0, frame = 0;

    auto* gen = app.add_subcommand("gen-data", "generate phantom train/val/test datasets");
    gen->add_option("--config", config_path, "JSON run configuration");
    gen->add_option("--out", out_path, "output path prefix")->required();
    auto* gen_seed = gen->add_option("--seed", seed, "override the data seed");

    auto* tr = app.add_subcommand("train", "train a model on a dataset file");
    tr->add_option("--config", config_path, "JSON run configuration");
    tr->add_option("--data", data_path, "training dataset (.kseg)")->required();
    tr->add_option("--out", out_path, "output checkpoint path")->required();
    tr->add_option("--resume", resume_path, "checkpoint to continue from");
    auto* tr_seed = tr->add_option("--seed", seed, "override the training seed");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint across acceleration factors");
    ev->add_option("--config", config_path, "JSON run configuration");
    ev->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    ev->add_option("--data", data_path, "test dataset (.kseg)")->required();
    ev->add_option("--out", out_path, "output prefix for .txt/.kv reports");
    auto* ev_seed = ev->add_option("--seed", seed, "override the evaluation seed");

    auto* vis = app.add_subcommand("visualize",
                                   "export GT / prediction / zero-filling PPM panels");
    vis->add_option("--config", config_path, "JSON run configuration");
    vis->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    vis->add_option("--data", data_path, "dataset (.kseg)")->required();
    vis->add_option("--scan", scan_index, "scan index");
    vis->add_option("--frame", frame, "frame index");
    vis->add_option("--out", out_dir, "output directory")->required();
    auto* vis_seed = vis->add_option("--seed", seed, "override the evaluation seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_path, seed, !gen_seed->empty());
        if (tr->parsed())
            return cmd_train(config_path, data_path, out_path, resume_path, seed,
                             !tr_seed->empty());
        if (ev->parsed())
            return cmd_eval(config_path, ckpt_path, data_path, out_path, seed,
                            !ev_seed->empty());
        if (vis->parsed())
            return cmd_visualize(config_path, ckpt_path, data_path, scan_index, frame,
                                 out_dir, seed, !vis_seed->empty());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
