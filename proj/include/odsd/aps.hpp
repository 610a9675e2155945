#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "odsd/matrix.hpp"

namespace odsd::aps {

/// Teacher logits over an unlabeled pool plus stable item identifiers.
struct PredictionSet {
    Matrix logits;                      // s x C, C >= 2
    std::vector<std::string> pool_ids;  // size s, unique

    PredictionSet(Matrix logits_in, std::vector<std::string> ids_in);
    std::size_t pool_size() const { return logits.rows(); }
    std::size_t classes() const { return logits.cols(); }
};

/// Per-class cluster centers over the prediction rows of that class.
struct PrototypeBank {
    std::vector<Matrix> prototypes;        // per class: effective_k[c] x C rows
    std::vector<std::size_t> effective_k;  // min(k, n_c)
    std::uint64_t seed = 0;
};

enum class OutlierSign {
    AsPrinted,  // total = sc - so + sd
    Negated,    // total = sc + so + sd
};

struct ScoreTable {
    // per item, pool order
    std::vector<std::size_t> predicted_class;
    std::vector<double> confidence;   // max softmax probability
    std::vector<double> raw_outlier;  // summed cosine to own-class prototypes
    std::vector<double> sc, so, sd, s_total;
    // per class
    std::vector<std::size_t> class_count;    // n_c
    std::vector<double> class_outlier_mean;  // u_c
    std::vector<double> class_density;       // D_c
};

struct ConfidenceScores {
    std::vector<std::size_t> predicted_class;
    std::vector<double> confidence;
    std::vector<double> sc;
};

ConfidenceScores confidence_scores(const PredictionSet& preds);

/// Clusters each class's rows with k-means++ / Lloyd. Per-class rows are put
/// in a canonical order first so results do not depend on pool ordering.
PrototypeBank build_prototypes(const PredictionSet& preds, std::size_t k, std::uint64_t seed,
                               std::span<const std::size_t> predicted_class);

struct OutlierScores {
    std::vector<double> raw;
    std::vector<double> so;
};

OutlierScores outlier_scores(const PredictionSet& preds, const PrototypeBank& bank,
                             std::span<const std::size_t> predicted_class);

struct DensityScores {
    std::vector<std::size_t> class_count;
    std::vector<double> class_outlier_mean;
    std::vector<double> class_density;
    std::vector<double> sd;
};

DensityScores density_scores(std::span<const double> raw_outlier,
                             std::span<const std::size_t> predicted_class, std::size_t classes);

/// Full scoring pass: confidence, per-class prototypes, outlier, density,
/// combined total.
ScoreTable compute_score_table(const PredictionSet& preds, std::size_t k, std::uint64_t seed,
                               OutlierSign sign = OutlierSign::AsPrinted);

/// Indices of the n highest-total items, ordered by descending total with
/// ties broken toward the lower pool index. Throws RequestTooLargeError when
/// n exceeds the pool size.
std::vector<std::size_t> select_top(std::span<const double> s_total, std::size_t n);

void write_score_csv(const std::filesystem::path& path, const PredictionSet& preds,
                     const ScoreTable& table);

struct ScoreCsv {
    std::vector<std::string> ids;
    std::vector<std::size_t> predicted_class;
    std::vector<double> confidence, raw_outlier, sc, so, sd, s_total;
};

ScoreCsv read_score_csv(const std::filesystem::path& path);

void write_selection(const std::filesystem::path& path, std::span<const std::string> ids);
std::vector<std::string> read_selection(const std::filesystem::path& path);

}  // namespace odsd::aps
