#pragma once

#include <cstdint>
#include <vector>

#include "odsd/matrix.hpp"

namespace odsd {

struct KMeansOptions {
    std::size_t max_iters = 300;
    std::size_t restarts = 10;  // best-of-n runs, restart seeds derived from the user seed
    bool track_objective = false;
};

struct KMeansResult {
    Matrix centers;                       // k x d
    std::vector<std::size_t> assignment;  // size n, values in [0, k)
    double objective = 0.0;               // sum of squared point-center distances
    std::size_t iterations = 0;           // of the winning restart
    std::vector<double> objective_trace;  // one entry per iteration when tracked
};

/// Lloyd's algorithm with k-means++ seeding; fully deterministic for a fixed
/// seed. Ties in nearest-center assignment go to the lowest center index.
/// Empty clusters are repaired by claiming the point farthest from its
/// current center. Throws ContractViolation when points is empty and
/// ReduceKSignal when there are fewer points than clusters.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& opts = {});

}  // namespace odsd
