#include "kseg/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace kseg {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& section,
                    const std::set<std::string>& allowed) {
    for (const auto& [key, unused] : obj.items())
        if (!allowed.contains(key))
            throw std::invalid_argument("config: unknown key \"" + key + "\" in " + section);
}

template <typename T>
void get_to(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json root = json::parse(text);
    if (!root.is_object()) throw std::invalid_argument("config: root must be an object");
    reject_unknown(root, "root", {"phantom", "kspace", "model", "train", "eval"});

    RunConfig cfg;

    if (root.contains("phantom")) {
        const json& p = root["phantom"];
        reject_unknown(p, "phantom",
                       {"height", "width", "frames", "inner_radius", "outer_radius",
                        "contraction_fraction", "noise_std", "count_train", "count_val",
                        "count_test", "seed"});
        get_to(p, "height", cfg.phantom.height);
        get_to(p, "width", cfg.phantom.width);
        get_to(p, "frames", cfg.phantom.frames);
        get_to(p, "inner_radius", cfg.phantom.inner_radius);
        get_to(p, "outer_radius", cfg.phantom.outer_radius);
        get_to(p, "contraction_fraction", cfg.phantom.contraction_fraction);
        get_to(p, "noise_std", cfg.phantom.noise_std);
        get_to(p, "count_train", cfg.count_train);
        get_to(p, "count_val", cfg.count_val);
        get_to(p, "count_test", cfg.count_test);
        get_to(p, "seed", cfg.data_seed);
        cfg.phantom.center_y = cfg.phantom.height / 2.0;
        cfg.phantom.center_x = cfg.phantom.width / 2.0;
    }

    if (root.contains("kspace")) {
        const json& k = root["kspace"];
        reject_unknown(k, "kspace",
                       {"R", "sigma_lines", "sigma_b0", "per_frame_masks"});
        get_to(k, "R", cfg.kspace.acceleration);
        get_to(k, "sigma_lines", cfg.kspace.sigma_lines);
        get_to(k, "sigma_b0", cfg.kspace.sigma_b0_scale);
        get_to(k, "per_frame_masks", cfg.kspace.per_frame_masks);
    }

    if (root.contains("model")) {
        const json& m = root["model"];
        reject_unknown(m, "model", {"M", "D", "heads", "L_enc", "L_dec", "F"});
        get_to(m, "M", cfg.model.latents);
        get_to(m, "D", cfg.model.width);
        get_to(m, "heads", cfg.model.heads);
        get_to(m, "L_enc", cfg.model.encoder_layers);
        get_to(m, "L_dec", cfg.model.decoder_layers);
        get_to(m, "F", cfg.model.pos_frequencies);
        cfg.model.validate();
    }

    if (root.contains("train")) {
        const json& t = root["train"];
        reject_unknown(t, "train", {"steps", "lr", "P_train", "seed"});
        get_to(t, "steps", cfg.train.steps);
        get_to(t, "lr", cfg.train.learning_rate);
        get_to(t, "P_train", cfg.train.queries_per_step);
        get_to(t, "seed", cfg.train.seed);
    }

    if (root.contains("eval")) {
        const json& e = root["eval"];
        reject_unknown(e, "eval", {"R_list", "seed"});
        get_to(e, "R_list", cfg.eval.accelerations);
        get_to(e, "seed", cfg.eval.seed);
    }

    // training and evaluation share the acquisition settings
    cfg.train.acceleration = cfg.kspace.acceleration;
    cfg.train.sampling = cfg.kspace;
    cfg.eval.sampling = cfg.kspace;
    return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string RunConfig::to_json_text() const {
    json root;
    root["phantom"] = {
        {"height", phantom.height},
        {"width", phantom.width},
        {"frames", phantom.frames},
        {"inner_radius", phantom.inner_radius},
        {"outer_radius", phantom.outer_radius},
        {"contraction_fraction", phantom.contraction_fraction},
        {"noise_std", phantom.noise_std},
        {"count_train", count_train},
        {"count_val", count_val},
        {"count_test", count_test},
        {"seed", data_seed},
    };
    root["kspace"] = {
        {"R", kspace.acceleration},
        {"sigma_lines", kspace.sigma_lines},
        {"sigma_b0", kspace.sigma_b0_scale},
        {"per_frame_masks", kspace.per_frame_masks},
    };
    root["model"] = {
        {"M", model.latents},       {"D", model.width},
        {"heads", model.heads},     {"L_enc", model.encoder_layers},
        {"L_dec", model.decoder_layers}, {"F", model.pos_frequencies},
    };
    root["train"] = {
        {"steps", train.steps},
        {"lr", train.learning_rate},
        {"P_train", train.queries_per_step},
        {"seed", train.seed},
    };
    root["eval"] = {
        {"R_list", eval.accelerations},
        {"seed", eval.seed},
    };
    return root.dump(2);
}

}  // namespace kseg
