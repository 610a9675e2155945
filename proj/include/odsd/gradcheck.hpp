#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace odsd::cli {

struct GradcheckOptions {
    std::uint64_t seed = 7;
    std::size_t batches = 3;   // random fixtures per term
    std::size_t pairs = 4;     // N; batches hold 2N rows
    std::size_t classes = 4;
    double step = 1e-5;        // central-difference step
    double tol = 1e-4;         // max relative error accepted
    std::vector<std::size_t> mlp_sizes = {4, 6, 3};
    std::size_t mlp_rows = 5;
    std::string corrupt;            // term name: inject a wrong analytic gradient
    bool repeated_eig_fixture = false;  // drive the denoise gap guard
};

struct TermReport {
    enum class Status { Ok, Failed, Skipped };
    std::string term;
    double max_rel_err = 0.0;
    Status status = Status::Ok;
    std::string note;
};

struct GradcheckReport {
    std::vector<TermReport> terms;
    double elapsed_s = 0.0;

    bool ok() const {
        for (const auto& t : terms)
            if (t.status == TermReport::Status::Failed) return false;
        return true;
    }
};

/// Central-difference verification of every analytic gradient: kd, denoise,
/// both contrastive terms, the combined objective, and MLP backprop.
/// Relative error is max|a - f| / max(max|f|, max|a|, 1e-10).
GradcheckReport run_gradcheck(const GradcheckOptions& opts);

void print_gradcheck(const GradcheckReport& report);

}  // namespace odsd::cli
