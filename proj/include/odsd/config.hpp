#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "odsd/aps.hpp"
#include "odsd/data.hpp"

namespace odsd::cli {

struct PathsConfig {
    std::string train;       // labeled train dir (x.odst + y.odst)
    std::string test;        // labeled test dir
    std::string pool;        // pool dir (x.odst + ids.txt [+ provenance.txt])
    std::string teacher;     // teacher checkpoint dir
    std::string checkpoint;  // generic model checkpoint dir (eval / embed)
    std::string scores;      // score csv (sample reads, score writes)
    std::string selection;   // selection list (distill reads, sample writes)
    std::string out = "out";
};

struct ApsConfig {
    std::size_t k = 5;
    std::uint64_t seed = 1;
    std::size_t n_select = 0;
    aps::OutlierSign outlier_sign = aps::OutlierSign::AsPrinted;
    std::string method = "aps";  // aps | random
};

struct DcrdConfig {
    double tau = 4.0;
    double tau1 = 0.5;
    double tau2 = 0.5;
    double lambda1 = 10.0;
    double lambda2 = 0.5;
    double delta = 1.0;
    std::size_t embed_dim = 0;
    bool kd_tau_squared = true;
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch = 64;
    double lr = 0.025;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::string schedule = "constant";  // constant | cosine
    std::uint64_t seed = 1;
    std::size_t stop_after_epoch = 0;  // nonzero: pause the run after this epoch
};

struct ModelConfig {
    std::vector<std::size_t> teacher_hidden = {64, 64};
    std::vector<std::size_t> student_hidden = {16};
};

struct AugConfig {
    nets::AugmentationSpec spec;
};

struct SynthConfig {
    std::uint64_t seed = 1;
    bool benchmark = true;  // currently the only generator
};

struct EmbedConfig {
    std::size_t batch = 32;  // leading rows embedded
    std::size_t dim = 2;
};

struct ExperimentConfig {
    PathsConfig paths;
    ApsConfig aps;
    DcrdConfig dcrd;
    TrainConfig train;
    ModelConfig model;
    AugConfig aug;
    SynthConfig synth;
    EmbedConfig embed;
};

/// Parses `section.key = value` lines; `#` starts a comment; blank lines are
/// skipped. Unknown keys and out-of-range values raise ConfigError with the
/// line number.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source);
ExperimentConfig load_config(const std::filesystem::path& path);

double schedule_lr(const TrainConfig& cfg, std::size_t epoch);

}  // namespace odsd::cli
