#include "odsd/mlp.hpp"

#include <cmath>
#include <cstring>

#include "odsd/error.hpp"
#include "odsd/numerics.hpp"
#include "odsd/rng.hpp"

namespace odsd::nets {

Mlp make_mlp(std::vector<std::size_t> sizes, std::uint64_t seed) {
    if (sizes.size() < 2) throw ContractViolation("mlp: need input and output sizes");
    for (std::size_t s : sizes)
        if (s == 0) throw ContractViolation("mlp: zero-width layer");

    Mlp m;
    m.sizes = std::move(sizes);
    m.init_seed = seed;
    Rng rng(mix_seed(seed, 0x4d4c50ULL));
    for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
        const std::size_t in = m.sizes[l];
        const std::size_t out = m.sizes[l + 1];
        Matrix w(in, out);
        const double scale = std::sqrt(2.0 / static_cast<double>(in));
        for (double& v : w.data()) v = scale * rng.normal();
        m.w.push_back(std::move(w));
        m.b.emplace_back(out, 0.0);
    }
    return m;
}

namespace {

Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
    Matrix out = matmul(x, w);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
    }
    return out;
}

void relu_inplace(Matrix& m) {
    for (double& v : m.data())
        if (v < 0.0) v = 0.0;
}

}  // namespace

Matrix mlp_forward(const Mlp& model, const Matrix& x) {
    if (x.cols() != model.input_dim()) throw ContractViolation("mlp_forward: input width");
    if (!x.all_finite()) throw ContractViolation("mlp_forward: non-finite input");
    Matrix a = x;
    for (std::size_t l = 0; l < model.layers(); ++l) {
        a = affine(a, model.w[l], model.b[l]);
        if (l + 1 < model.layers()) relu_inplace(a);
    }
    return a;
}

Matrix mlp_forward(const Mlp& model, const Matrix& x, ForwardCache& cache) {
    if (x.cols() != model.input_dim()) throw ContractViolation("mlp_forward: input width");
    if (!x.all_finite()) throw ContractViolation("mlp_forward: non-finite input");
    cache.model_version = model.version;
    cache.input = x;
    cache.hidden.clear();
    Matrix a = x;
    for (std::size_t l = 0; l < model.layers(); ++l) {
        a = affine(a, model.w[l], model.b[l]);
        if (l + 1 < model.layers()) {
            relu_inplace(a);
            cache.hidden.push_back(a);
        }
    }
    return a;
}

MlpGrads mlp_backward(const Mlp& model, const ForwardCache& cache, const Matrix& grad_logits) {
    if (cache.model_version != model.version)
        throw ContractViolation("mlp_backward: stale forward cache");
    if (grad_logits.cols() != model.output_dim() || grad_logits.rows() != cache.input.rows())
        throw ContractViolation("mlp_backward: gradient shape");
    if (cache.hidden.size() + 1 != model.layers())
        throw ContractViolation("mlp_backward: cache layer count");

    MlpGrads g;
    g.w.resize(model.layers());
    g.b.resize(model.layers());

    Matrix delta = grad_logits;
    for (std::size_t li = model.layers(); li-- > 0;) {
        const Matrix& input = li == 0 ? cache.input : cache.hidden[li - 1];
        g.w[li] = matmul(transpose(input), delta);
        g.b[li].assign(model.sizes[li + 1], 0.0);
        for (std::size_t i = 0; i < delta.rows(); ++i)
            for (std::size_t j = 0; j < delta.cols(); ++j) g.b[li][j] += delta(i, j);
        if (li == 0) break;
        Matrix prev = matmul(delta, transpose(model.w[li]));
        const Matrix& act = cache.hidden[li - 1];
        for (std::size_t i = 0; i < prev.size(); ++i)
            if (act.data()[i] <= 0.0) prev.data()[i] = 0.0;
        delta = std::move(prev);
    }
    return g;
}

SgdState make_sgd(const Mlp& model, const SgdConfig& cfg) {
    if (!(cfg.lr > 0.0)) throw ContractViolation("sgd: lr must be positive");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) throw ContractViolation("sgd: momentum range");
    if (cfg.weight_decay < 0.0) throw ContractViolation("sgd: negative weight decay");
    SgdState s;
    s.cfg = cfg;
    for (std::size_t l = 0; l < model.layers(); ++l) {
        s.vw.emplace_back(model.w[l].rows(), model.w[l].cols());
        s.vb.emplace_back(model.b[l].size(), 0.0);
    }
    return s;
}

void sgd_step(Mlp& model, const MlpGrads& grads, SgdState& state, double lr_override) {
    if (grads.w.size() != model.layers() || state.vw.size() != model.layers())
        throw ContractViolation("sgd_step: layer count mismatch");
    const double lr = lr_override >= 0.0 ? lr_override : state.cfg.lr;
    const double mu = state.cfg.momentum;
    const double wd = state.cfg.weight_decay;
    for (std::size_t l = 0; l < model.layers(); ++l) {
        for (std::size_t i = 0; i < model.w[l].size(); ++i) {
            double& v = state.vw[l].data()[i];
            double& th = model.w[l].data()[i];
            v = mu * v + grads.w[l].data()[i] + wd * th;
            th -= lr * v;
        }
        for (std::size_t i = 0; i < model.b[l].size(); ++i) {
            double& v = state.vb[l][i];
            double& th = model.b[l][i];
            v = mu * v + grads.b[l][i] + wd * th;
            th -= lr * v;
        }
    }
    ++model.version;
}

CeResult cross_entropy(const Matrix& logits, std::span<const int> labels) {
    if (labels.size() != logits.rows()) throw ContractViolation("cross_entropy: label count");
    CeResult res;
    res.grad_logits = Matrix(logits.rows(), logits.cols());
    const double inv_m = 1.0 / static_cast<double>(logits.rows());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
            throw ContractViolation("cross_entropy: label out of range");
        const auto logq = log_softmax(logits.row(i));
        sum -= logq[static_cast<std::size_t>(y)];
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            res.grad_logits(i, j) = (std::exp(logq[j]) - (static_cast<std::size_t>(y) == j)) * inv_m;
        }
    }
    res.value = sum * inv_m;
    return res;
}

std::uint64_t param_checksum(const Mlp& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto eat = [&h](const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &p[i], sizeof bits);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffULL;
                h *= 0x100000001b3ULL;
            }
        }
    };
    for (const auto& w : model.w) eat(w.data().data(), w.size());
    for (const auto& b : model.b) eat(b.data(), b.size());
    return h;
}

}  // namespace odsd::nets
