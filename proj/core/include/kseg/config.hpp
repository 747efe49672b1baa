#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kseg/kspace.hpp"
#include "kseg/metrics.hpp"
#include "kseg/model.hpp"
#include "kseg/phantom.hpp"
#include "kseg/train.hpp"

namespace kseg {

/// Resolved run configuration. Parsed from JSON with sections
/// phantom / kspace / model / train / eval; unknown keys are rejected,
/// absent optional fields take the defaults below.
struct RunConfig {
    PhantomParams phantom;
    int count_train = 200;
    int count_val = 10;
    int count_test = 20;
    std::uint64_t data_seed = 1;

    UndersampleOptions kspace;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;

    static RunConfig from_json_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
    /// Full resolved dump (defaults included), suitable for echoing back.
    std::string to_json_text() const;
};

}  // namespace kseg
