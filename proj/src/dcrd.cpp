#include "odsd/dcrd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odsd/error.hpp"
#include "odsd/numerics.hpp"

namespace odsd::dcrd {

namespace {

Matrix center_rows(const Matrix& f) {
    Matrix out(f.rows(), f.cols());
    const double inv_m = 1.0 / static_cast<double>(f.rows());
    for (std::size_t j = 0; j < f.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < f.rows(); ++i) mean += f(i, j);
        mean *= inv_m;
        for (std::size_t i = 0; i < f.rows(); ++i) out(i, j) = f(i, j) - mean;
    }
    return out;
}

struct UnitRows {
    Matrix unit;                // rows scaled to length 1
    std::vector<double> norm;   // original row norms
};

UnitRows unit_rows(const Matrix& m, const char* who) {
    UnitRows out;
    out.unit = Matrix(m.rows(), m.cols());
    out.norm.resize(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double n = norm2(m.row(i));
        if (n == 0.0) throw DegenerateVectorError(std::string(who) + ": zero-norm row");
        out.norm[i] = n;
        for (std::size_t j = 0; j < m.cols(); ++j) out.unit(i, j) = m(i, j) / n;
    }
    return out;
}

double clamped_cos(const UnitRows& a, std::size_t i, const UnitRows& b, std::size_t k) {
    return std::clamp(dot(a.unit.row(i), b.unit.row(k)), -1.0, 1.0);
}

// d cos(a, b) / d b for unit-normalized rows and original norms.
void add_cos_grad(Matrix& grad, std::size_t row, double weight, const UnitRows& self,
                  const UnitRows& other, std::size_t other_row, double cos_ab) {
    const double inv_n = 1.0 / self.norm[row];
    for (std::size_t j = 0; j < grad.cols(); ++j)
        grad(row, j) +=
            weight * inv_n * (other.unit(other_row, j) - cos_ab * self.unit(row, j));
}

void require_paired(const BatchOutputs& batch, const char* who) {
    if (batch.layout != BatchLayout::Paired)
        throw ContractViolation(std::string(who) + ": paired batch layout required");
}

}  // namespace

BatchOutputs::BatchOutputs(Matrix teacher_in, Matrix student_in, BatchLayout layout_in)
    : teacher(std::move(teacher_in)), student(std::move(student_in)), layout(layout_in) {
    if (teacher.rows() != student.rows() || teacher.cols() != student.cols())
        throw ContractViolation("batch outputs: teacher and student shapes disagree");
    if (teacher.rows() == 0) throw ContractViolation("batch outputs: empty batch");
    if (teacher.cols() < 2) throw ContractViolation("batch outputs: need at least 2 classes");
    if (!teacher.all_finite() || !student.all_finite())
        throw ContractViolation("batch outputs: non-finite logit");
    if (layout == BatchLayout::Paired && teacher.rows() % 2 != 0)
        throw ContractViolation("batch outputs: paired layout needs an even row count");
}

std::size_t default_embed_dim(std::size_t batch_rows, std::size_t classes) {
    if (batch_rows < 2) throw ContractViolation("embed dim: need at least 2 rows");
    return std::min(batch_rows - 1, classes);
}

LossValue kd_loss(const BatchOutputs& batch, double tau, bool tau_squared) {
    if (!(tau > 0.0)) throw ContractViolation("kd_loss: tau must be positive");
    const std::size_t m = batch.batch_rows();
    const std::size_t c = batch.classes();
    const double scale = tau_squared ? tau * tau : 1.0;

    LossValue out;
    out.grad_student = Matrix(m, c);
    std::vector<double> lt(c), ls(c);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            lt[j] = batch.teacher(i, j) / tau;
            ls[j] = batch.student(i, j) / tau;
        }
        const auto logp = log_softmax(lt);
        const auto logq = log_softmax(ls);
        double kl = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(logp[j]);
            kl += p * (logp[j] - logq[j]);
            out.grad_student(i, j) = std::exp(logq[j]) - p;
        }
        sum += kl;
    }
    const double gscale = scale / (static_cast<double>(m) * tau);
    for (double& g : out.grad_student.data()) g *= gscale;
    out.value = scale * sum / static_cast<double>(m);
    return out;
}

GramEmbedding gram_embed(const Matrix& f, std::size_t d) {
    const std::size_t m = f.rows();
    if (m < 2) throw ContractViolation("gram_embed: need at least 2 rows");
    if (d == 0 || d > m) throw ContractViolation("gram_embed: d must be in [1, rows]");
    if (!f.all_finite()) throw ContractViolation("gram_embed: non-finite entry");

    GramEmbedding out;
    const Matrix fc = center_rows(f);
    out.gram = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            const double v = dot(fc.row(i), fc.row(j));
            out.gram(i, j) = v;
            out.gram(j, i) = v;
        }
    }
    out.eig = sym_eig(out.gram);
    out.z = Matrix(m, d);
    for (std::size_t j = 0; j < d; ++j) {
        const double lam = std::max(out.eig.values[j], 0.0);
        const double s = std::sqrt(lam);
        for (std::size_t i = 0; i < m; ++i) out.z(i, j) = s * out.eig.vectors(i, j);
    }
    return out;
}

LossValue denoise_loss(const BatchOutputs& batch, std::size_t d, double delta) {
    const std::size_t m = batch.batch_rows();
    const GramEmbedding ge_t = gram_embed(batch.teacher, d);
    const GramEmbedding ge_s = gram_embed(batch.student, d);

    // align student embedding column signs to the teacher's
    std::vector<double> flip(d, 1.0);
    Matrix zs = ge_s.z;
    for (std::size_t j = 0; j < d; ++j) {
        double dp = 0.0;
        for (std::size_t i = 0; i < m; ++i) dp += ge_t.z(i, j) * ge_s.z(i, j);
        if (dp < 0.0) {
            flip[j] = -1.0;
            for (std::size_t i = 0; i < m; ++i) zs(i, j) = -zs(i, j);
        }
    }

    HuberResult hub = huber(ge_t.z, zs, delta);

    // back through the sign alignment, then through z_j = sqrt(l_j) v_j
    Matrix gz = std::move(hub.grad_b);
    for (std::size_t j = 0; j < d; ++j)
        if (flip[j] < 0.0)
            for (std::size_t i = 0; i < m; ++i) gz(i, j) = -gz(i, j);

    const double rank_eps = 1e-12 * std::max(1.0, std::abs(ge_s.eig.values[0]));
    std::vector<double> grad_values(m, 0.0);
    Matrix grad_vectors(m, m);
    for (std::size_t j = 0; j < d; ++j) {
        const double lam = ge_s.eig.values[j];
        if (lam <= rank_eps) continue;  // clamped or rank-deficient: subgradient 0
        const double s = std::sqrt(lam);
        double vg = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            grad_vectors(i, j) = s * gz(i, j);
            vg += ge_s.eig.vectors(i, j) * gz(i, j);
        }
        grad_values[j] = 0.5 / s * vg;
    }

    const Matrix db = sym_eig_backward(ge_s.eig, grad_values, grad_vectors);

    // B = Fc Fc^T with symmetric dB, so dFc = 2 dB Fc; undo the centering
    const Matrix fc = center_rows(batch.student);
    Matrix dfc = matmul(db, fc);
    for (double& v : dfc.data()) v *= 2.0;

    LossValue out;
    out.value = hub.value;
    out.grad_student = center_rows(dfc);
    return out;
}

LossValue instance_discrimination_loss(const BatchOutputs& batch, double tau1) {
    require_paired(batch, "instance_discrimination_loss");
    if (!(tau1 > 0.0)) throw ContractViolation("instance_discrimination_loss: tau1 positive");
    const std::size_t m = batch.batch_rows();
    const std::size_t n = batch.pairs();

    const UnitRows s = unit_rows(batch.student, "instance_discrimination_loss");
    const double inv_ntau = 1.0 / (static_cast<double>(n) * tau1);

    Matrix w(m, m);  // dL/dcos(i,k), only anchor rows are populated
    double loss = 0.0;
    std::vector<double> cos_row(m);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t pos = j + n;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) {
            if (k == j) continue;
            cos_row[k] = clamped_cos(s, j, s, k);
            mx = std::max(mx, cos_row[k] / tau1);
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            if (k == j) continue;
            sum += std::exp(cos_row[k] / tau1 - mx);
        }
        const double lse = mx + std::log(sum);
        loss += -(cos_row[pos] / tau1 - lse);

        for (std::size_t k = 0; k < m; ++k) {
            if (k == j) continue;
            w(j, k) += std::exp(cos_row[k] / tau1 - mx) / sum * inv_ntau;
        }
        w(j, pos) -= inv_ntau;
    }

    LossValue out;
    out.value = loss / static_cast<double>(n);
    out.grad_student = Matrix(m, batch.classes());
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
            const double weight = w(a, b);
            if (weight == 0.0) continue;
            const double cab = clamped_cos(s, a, s, b);
            add_cos_grad(out.grad_student, a, weight, s, s, b, cab);
            add_cos_grad(out.grad_student, b, weight, s, s, a, cab);
        }
    }
    return out;
}

LossValue ts_consistency_loss(const BatchOutputs& batch, double tau2) {
    require_paired(batch, "ts_consistency_loss");
    if (!(tau2 > 0.0)) throw ContractViolation("ts_consistency_loss: tau2 positive");
    const std::size_t m = batch.batch_rows();

    const UnitRows t = unit_rows(batch.teacher, "ts_consistency_loss");
    const UnitRows s = unit_rows(batch.student, "ts_consistency_loss");
    const double inv_mtau = 1.0 / (static_cast<double>(m) * tau2);

    // anchor i ranges over teacher rows; denominator holds every other
    // teacher row and every student row (the 4N pool minus the anchor)
    Matrix w(m, m);  // dL/dcos(t_i, s_k); teacher-teacher terms carry no grad
    double loss = 0.0;
    std::vector<double> cos_tt(m), cos_ts(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) {
            cos_ts[k] = clamped_cos(t, i, s, k);
            mx = std::max(mx, cos_ts[k] / tau2);
            if (k != i) {
                cos_tt[k] = clamped_cos(t, i, t, k);
                mx = std::max(mx, cos_tt[k] / tau2);
            }
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            sum += std::exp(cos_ts[k] / tau2 - mx);
            if (k != i) sum += std::exp(cos_tt[k] / tau2 - mx);
        }
        const double lse = mx + std::log(sum);
        loss += -(cos_ts[i] / tau2 - lse);

        for (std::size_t k = 0; k < m; ++k)
            w(i, k) += std::exp(cos_ts[k] / tau2 - mx) / sum * inv_mtau;
        w(i, i) -= inv_mtau;
    }

    LossValue out;
    out.value = loss / static_cast<double>(m);
    out.grad_student = Matrix(m, batch.classes());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            const double weight = w(i, k);
            if (weight == 0.0) continue;
            add_cos_grad(out.grad_student, k, weight, s, t, i, clamped_cos(s, k, t, i));
        }
    }
    return out;
}

LossBreakdown total_loss(const BatchOutputs& batch, const LossHyper& hyper) {
    if (hyper.lambda1 < 0.0 || hyper.lambda2 < 0.0)
        throw ContractViolation("total_loss: negative term weight");
    const std::size_t m = batch.batch_rows();
    const std::size_t c = batch.classes();

    LossBreakdown out;
    LossValue kd = kd_loss(batch, hyper.tau, hyper.kd_tau_squared);
    out.kd = kd.value;
    out.grad_student = std::move(kd.grad_student);

    if (hyper.lambda1 != 0.0) {
        const std::size_t d =
            hyper.embed_dim == 0 ? default_embed_dim(m, c) : hyper.embed_dim;
        LossValue dn = denoise_loss(batch, d, hyper.delta);
        out.denoise = dn.value;
        for (std::size_t i = 0; i < out.grad_student.size(); ++i)
            out.grad_student.data()[i] += hyper.lambda1 * dn.grad_student.data()[i];
    }
    if (hyper.lambda2 != 0.0) {
        LossValue c1 = instance_discrimination_loss(batch, hyper.tau1);
        LossValue c2 = ts_consistency_loss(batch, hyper.tau2);
        out.contrast_inst = c1.value;
        out.contrast_ts = c2.value;
        for (std::size_t i = 0; i < out.grad_student.size(); ++i)
            out.grad_student.data()[i] +=
                hyper.lambda2 * (c1.grad_student.data()[i] + c2.grad_student.data()[i]);
    }

    out.total = out.kd + hyper.lambda1 * out.denoise +
                hyper.lambda2 * (out.contrast_inst + out.contrast_ts);
    if (!out.grad_student.all_finite())
        throw ContractViolation("total_loss: non-finite gradient");
    return out;
}

}  // namespace odsd::dcrd
