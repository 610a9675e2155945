#include "odsd/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "odsd/checkpoint.hpp"
#include "odsd/dcrd.hpp"
#include "odsd/error.hpp"
#include "odsd/mlp.hpp"
#include "odsd/rng.hpp"

namespace odsd::cli {

namespace {

Matrix random_logits(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

// paired fixture: second half is a jittered copy of the first so the batch
// looks like originals plus augmented views
dcrd::BatchOutputs paired_fixture(std::size_t pairs, std::size_t classes, Rng& rng) {
    Matrix t(2 * pairs, classes);
    Matrix s(2 * pairs, classes);
    for (std::size_t i = 0; i < pairs; ++i) {
        for (std::size_t j = 0; j < classes; ++j) {
            t(i, j) = 2.0 * rng.normal();
            t(i + pairs, j) = t(i, j) + 0.3 * rng.normal();
            s(i, j) = 2.0 * rng.normal();
            s(i + pairs, j) = s(i, j) + 0.3 * rng.normal();
        }
    }
    return {std::move(t), std::move(s), dcrd::BatchLayout::Paired};
}

// student rows laid out as +-a e0, +-a e1, ... so the centered gram gets an
// exactly repeated leading eigenvalue (2 a^2 twice)
dcrd::BatchOutputs repeated_eig_fixture(std::size_t pairs, std::size_t classes, Rng& rng) {
    dcrd::BatchOutputs b = paired_fixture(pairs, classes, rng);
    Matrix s(2 * pairs, classes);
    for (std::size_t i = 0; i < 2 * pairs; ++i) {
        const std::size_t axis = (i / 2) % classes;
        const double mag = axis < 2 ? 2.0 : 2.0 / static_cast<double>(axis);
        s(i, axis) = i % 2 == 0 ? mag : -mag;
    }
    return {b.teacher, std::move(s), dcrd::BatchLayout::Paired};
}

double rel_err(const Matrix& analytic, const Matrix& fd) {
    double denom = 1e-10;
    for (double v : analytic.data()) denom = std::max(denom, std::abs(v));
    for (double v : fd.data()) denom = std::max(denom, std::abs(v));
    return max_abs_diff(analytic, fd) / denom;
}

using LossFn = std::function<double(const Matrix&)>;

Matrix fd_grad(const LossFn& f, Matrix at, double h) {
    Matrix g(at.rows(), at.cols());
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double keep = at.data()[i];
        at.data()[i] = keep + h;
        const double hi = f(at);
        at.data()[i] = keep - h;
        const double lo = f(at);
        at.data()[i] = keep;
        g.data()[i] = (hi - lo) / (2.0 * h);
    }
    return g;
}

double student_eig_gap(const dcrd::BatchOutputs& batch, std::size_t d) {
    const dcrd::GramEmbedding ge = dcrd::gram_embed(batch.student, d);
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 <= d && j + 1 < ge.eig.values.size(); ++j)
        gap = std::min(gap, ge.eig.values[j] - ge.eig.values[j + 1]);
    return gap;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    if (opts.pairs == 0 || opts.classes < 2) throw ContractViolation("gradcheck: bad fixture");

    GradcheckReport report;

    struct Term {
        const char* name;
        bool needs_gap_guard;
        std::function<dcrd::LossValue(const dcrd::BatchOutputs&)> eval;
    };

    dcrd::LossHyper hyper;  // defaults; total exercises every term at once

    const std::vector<Term> terms = {
        {"kd", false,
         [&](const dcrd::BatchOutputs& b) { return dcrd::kd_loss(b, hyper.tau, true); }},
        {"denoise", true,
         [&](const dcrd::BatchOutputs& b) {
             return dcrd::denoise_loss(b, dcrd::default_embed_dim(b.batch_rows(), b.classes()),
                                       hyper.delta);
         }},
        {"contrast_inst", false,
         [&](const dcrd::BatchOutputs& b) {
             return dcrd::instance_discrimination_loss(b, hyper.tau1);
         }},
        {"contrast_ts", false,
         [&](const dcrd::BatchOutputs& b) { return dcrd::ts_consistency_loss(b, hyper.tau2); }},
        {"total", true,
         [&](const dcrd::BatchOutputs& b) {
             const dcrd::LossBreakdown lb = dcrd::total_loss(b, hyper);
             return dcrd::LossValue{lb.total, lb.grad_student};
         }},
    };

    for (const auto& term : terms) {
        TermReport tr;
        tr.term = term.name;
        Rng rng(mix_seed(opts.seed, fnv1a(term.name)));
        std::size_t skipped = 0;
        for (std::size_t b = 0; b < opts.batches; ++b) {
            dcrd::BatchOutputs batch = opts.repeated_eig_fixture
                                           ? repeated_eig_fixture(opts.pairs, opts.classes, rng)
                                           : paired_fixture(opts.pairs, opts.classes, rng);
            if (term.needs_gap_guard) {
                const std::size_t d =
                    dcrd::default_embed_dim(batch.batch_rows(), batch.classes());
                const double gap = student_eig_gap(batch, d);
                if (gap < 1e-3) {
                    ++skipped;
                    char note[96];
                    std::snprintf(note, sizeof note, "eigenvalue gap %.2e below 1e-3", gap);
                    tr.note = note;
                    continue;
                }
            }

            dcrd::LossValue analytic = term.eval(batch);
            if (opts.corrupt == term.name)
                for (double& g : analytic.grad_student.data()) g *= 1.01;

            const Matrix teacher = batch.teacher;
            LossFn f = [&](const Matrix& s) {
                return term.eval({teacher, s, dcrd::BatchLayout::Paired}).value;
            };
            const Matrix fd = fd_grad(f, batch.student, opts.step);
            tr.max_rel_err = std::max(tr.max_rel_err, rel_err(analytic.grad_student, fd));
        }
        if (skipped == opts.batches)
            tr.status = TermReport::Status::Skipped;
        else if (tr.max_rel_err > opts.tol)
            tr.status = TermReport::Status::Failed;
        report.terms.push_back(std::move(tr));
    }

    // MLP backprop: phi(theta) = sum(G . logits(theta)) for a fixed random G,
    // so d phi / d theta is exactly mlp_backward(G)
    {
        TermReport tr;
        tr.term = "mlp_backward";
        Rng rng(mix_seed(opts.seed, 0x6d6c70ULL));
        for (std::size_t b = 0; b < opts.batches; ++b) {
            nets::Mlp model = nets::make_mlp(opts.mlp_sizes, rng.next_u64());
            const Matrix x = random_logits(opts.mlp_rows, opts.mlp_sizes.front(), rng, 1.0);
            const Matrix gl = random_logits(opts.mlp_rows, opts.mlp_sizes.back(), rng, 1.0);

            nets::ForwardCache cache;
            nets::mlp_forward(model, x, cache);
            nets::MlpGrads analytic = nets::mlp_backward(model, cache, gl);
            if (opts.corrupt == "mlp_backward")
                for (auto& w : analytic.w)
                    for (double& g : w.data()) g *= 1.01;

            auto phi = [&]() {
                const Matrix logits = nets::mlp_forward(model, x);
                double s = 0.0;
                for (std::size_t i = 0; i < logits.size(); ++i)
                    s += gl.data()[i] * logits.data()[i];
                return s;
            };
            for (std::size_t l = 0; l < model.layers(); ++l) {
                Matrix fd(model.w[l].rows(), model.w[l].cols());
                for (std::size_t i = 0; i < model.w[l].size(); ++i) {
                    const double keep = model.w[l].data()[i];
                    model.w[l].data()[i] = keep + opts.step;
                    const double hi = phi();
                    model.w[l].data()[i] = keep - opts.step;
                    const double lo = phi();
                    model.w[l].data()[i] = keep;
                    fd.data()[i] = (hi - lo) / (2.0 * opts.step);
                }
                tr.max_rel_err = std::max(tr.max_rel_err, rel_err(analytic.w[l], fd));

                Matrix fdb(1, model.b[l].size());
                Matrix ab(1, model.b[l].size());
                for (std::size_t i = 0; i < model.b[l].size(); ++i) {
                    const double keep = model.b[l][i];
                    model.b[l][i] = keep + opts.step;
                    const double hi = phi();
                    model.b[l][i] = keep - opts.step;
                    const double lo = phi();
                    model.b[l][i] = keep;
                    fdb(0, i) = (hi - lo) / (2.0 * opts.step);
                    ab(0, i) = analytic.b[l][i];
                }
                tr.max_rel_err = std::max(tr.max_rel_err, rel_err(ab, fdb));
            }
        }
        if (tr.max_rel_err > opts.tol) tr.status = TermReport::Status::Failed;
        report.terms.push_back(std::move(tr));
    }

    report.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void print_gradcheck(const GradcheckReport& report) {
    for (const auto& t : report.terms) {
        const char* status = t.status == TermReport::Status::Ok       ? "ok"
                             : t.status == TermReport::Status::Failed ? "FAILED"
                                                                      : "skipped";
        if (t.status == TermReport::Status::Skipped)
            std::printf("  %-14s %-8s %s\n", t.term.c_str(), status, t.note.c_str());
        else
            std::printf("  %-14s %-8s max_rel_err=%.3e\n", t.term.c_str(), status,
                        t.max_rel_err);
    }
    std::printf("gradcheck %s in %.2f s\n", report.ok() ? "passed" : "FAILED",
                report.elapsed_s);
}

}  // namespace odsd::cli
