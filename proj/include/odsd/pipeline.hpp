#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "odsd/config.hpp"
#include "odsd/data.hpp"

namespace odsd::cli {

struct MetricsRecord {
    std::string run_id;
    std::size_t epoch = 0;  // 1-based, epochs completed
    double kd = 0.0;
    double denoise = 0.0;
    double contrast_inst = 0.0;
    double contrast_ts = 0.0;
    double total = 0.0;  // always kd + l1 * denoise + l2 * (inst + ts)
    std::optional<double> test_acc;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
};

void append_metrics(const std::filesystem::path& file, const MetricsRecord& rec);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& file);

// dataset directories: labeled = x.odst + y.odst; pool = x.odst + ids.txt
// (+ provenance.txt with one in/ood tag per row, used only for reporting)
void save_labeled(const std::filesystem::path& dir, const nets::LabeledDataset& ds);
nets::LabeledDataset load_labeled(const std::filesystem::path& dir);
void save_pool(const std::filesystem::path& dir, const nets::UnlabeledPool& pool);
nets::UnlabeledPool load_pool(const std::filesystem::path& dir);

/// Thread count from ODSD_THREADS (>= 1); used to fan out embarrassingly
/// parallel row work without changing any arithmetic.
std::size_t env_threads();

struct SynthOutcome {
    std::size_t train_rows = 0, test_rows = 0, pool_rows = 0;
    double pool_ood_fraction = 0.0;
};
SynthOutcome cmd_synth(const ExperimentConfig& cfg);

struct TeacherOutcome {
    double test_acc = 0.0;
    std::size_t epochs = 0;
    std::filesystem::path checkpoint;
};
TeacherOutcome cmd_train_teacher(const ExperimentConfig& cfg);

struct ScoreOutcome {
    std::filesystem::path csv;
    std::size_t pool_rows = 0;
    double pool_ood_fraction = 0.0;
};
ScoreOutcome cmd_score(const ExperimentConfig& cfg);

struct SampleOutcome {
    std::filesystem::path selection;
    std::size_t selected = 0;
    std::optional<double> selected_ood_fraction;
    std::optional<double> pool_ood_fraction;
};
SampleOutcome cmd_sample(const ExperimentConfig& cfg);

struct DistillOutcome {
    std::filesystem::path student;
    std::filesystem::path metrics;
    std::optional<double> final_test_acc;
    std::size_t epochs_run = 0;
    bool paused = false;
};
DistillOutcome cmd_distill(const ExperimentConfig& cfg, bool resume = false);

double cmd_eval(const ExperimentConfig& cfg);

struct EmbedOutcome {
    std::filesystem::path csv;
    std::size_t rows = 0;
    std::size_t dim = 0;
};
EmbedOutcome cmd_embed(const ExperimentConfig& cfg);

}  // namespace odsd::cli
