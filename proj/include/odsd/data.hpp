#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "odsd/matrix.hpp"
#include "odsd/mlp.hpp"

namespace odsd::nets {

struct LabeledDataset {
    Matrix x;
    std::vector<int> labels;  // values in [0, classes)

    std::size_t size() const { return x.rows(); }
    std::size_t classes() const;
};

enum class Provenance { InDist, Ood, Unknown };

/// Unlabeled pool; provenance tags exist only for evaluation and never feed
/// the scoring path.
struct UnlabeledPool {
    Matrix x;
    std::vector<std::string> ids;
    std::vector<Provenance> tags;

    std::size_t size() const { return x.rows(); }
    double ood_fraction() const;
};

enum class AugmentKind { GaussianNoise, FeatureDropout, ShiftFlip };

struct AugmentationSpec {
    AugmentKind kind = AugmentKind::GaussianNoise;
    double noise_sigma = 0.1;  // GaussianNoise
    double dropout_p = 0.1;    // FeatureDropout; 1.0 zeroes every feature
    // ShiftFlip treats each row as a grid_h x grid_w grid: integer translation
    // up to max_shift cells (zero fill) plus a coin-flip horizontal mirror.
    // grid_h * grid_w must equal the feature width; 0 means "not a grid".
    std::size_t max_shift = 1;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    std::uint64_t seed = 1;
};

/// One augmented view per row. The random stream for a row depends only on
/// (spec.seed, epoch, item id), not on batch composition, so any batch
/// schedule sees the same view of the same item in the same epoch.
Matrix augment(const Matrix& x, const AugmentationSpec& spec, std::uint64_t epoch,
               std::span<const std::size_t> item_ids);

struct GaussianClusterSpec {
    std::vector<double> mean;
    double sigma = 1.0;
    int label = -1;  // -1 marks out-of-distribution
};

struct SynthSpec {
    std::size_t dim = 8;
    std::vector<GaussianClusterSpec> clusters;
    std::size_t train_per_class = 250;
    std::size_t test_per_class = 250;
    std::vector<std::size_t> pool_per_class;  // in-distribution pool counts
    std::size_t pool_ood_total = 0;           // split across ood clusters
};

struct SynthData {
    LabeledDataset train;
    LabeledDataset test;
    UnlabeledPool pool;
};

/// Gaussian-cluster open-world generator. Labeled splits draw only from
/// labeled clusters; the pool mixes in-distribution and ood rows and is
/// shuffled before ids are assigned.
SynthData synth_openworld(const SynthSpec& spec, std::uint64_t seed);

/// 4 in-distribution classes + 2 ood clusters in 8 dimensions; pool of 4000
/// with imbalanced class mix and a third of the pool out of distribution.
SynthSpec default_benchmark_spec();

double accuracy(const Mlp& model, const LabeledDataset& data);

}  // namespace odsd::nets
