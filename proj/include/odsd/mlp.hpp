#pragma once

#include <cstdint>
#include <vector>

#include "odsd/matrix.hpp"

namespace odsd::nets {

/// Fully connected ReLU network; the last layer is linear (logits).
struct Mlp {
    std::vector<std::size_t> sizes;       // [input, hidden..., classes]
    std::vector<Matrix> w;                // per layer, in x out
    std::vector<std::vector<double>> b;   // per layer, out
    std::uint64_t init_seed = 0;
    std::uint64_t version = 0;  // bumped by every parameter update

    std::size_t layers() const { return w.size(); }
    std::size_t input_dim() const { return sizes.front(); }
    std::size_t output_dim() const { return sizes.back(); }
};

/// He-style initialization: w ~ N(0, sqrt(2 / fan_in)), b = 0.
Mlp make_mlp(std::vector<std::size_t> sizes, std::uint64_t seed);

/// Activations retained for the backward pass; valid for the exact model
/// version that produced them.
struct ForwardCache {
    std::uint64_t model_version = 0;
    Matrix input;
    std::vector<Matrix> hidden;  // post-ReLU activations per hidden layer
};

Matrix mlp_forward(const Mlp& model, const Matrix& x);
Matrix mlp_forward(const Mlp& model, const Matrix& x, ForwardCache& cache);

struct MlpGrads {
    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;
};

/// Backpropagates d loss / d logits. The cache must come from the same model
/// version (stale caches are rejected).
MlpGrads mlp_backward(const Mlp& model, const ForwardCache& cache, const Matrix& grad_logits);

struct SgdConfig {
    double lr = 0.025;
    double momentum = 0.9;
    double weight_decay = 5e-4;
};

struct SgdState {
    SgdConfig cfg;
    std::vector<Matrix> vw;
    std::vector<std::vector<double>> vb;
};

SgdState make_sgd(const Mlp& model, const SgdConfig& cfg);

/// v = momentum * v + g + weight_decay * theta; theta -= lr * v.
/// lr_override >= 0 replaces cfg.lr for this step (epoch schedules).
void sgd_step(Mlp& model, const MlpGrads& grads, SgdState& state, double lr_override = -1.0);

/// Mean softmax cross-entropy against integer labels, with logits gradient.
struct CeResult {
    double value = 0.0;
    Matrix grad_logits;
};
CeResult cross_entropy(const Matrix& logits, std::span<const int> labels);

/// FNV-1a over the raw parameter bytes, layer by layer.
std::uint64_t param_checksum(const Mlp& model);

}  // namespace odsd::nets
