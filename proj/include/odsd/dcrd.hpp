#pragma once

#include <cstddef>

#include "odsd/eig.hpp"
#include "odsd/matrix.hpp"

namespace odsd::dcrd {

enum class BatchLayout {
    Plain,   // arbitrary rows
    Paired,  // rows [0, N) are originals, rows [N, 2N) their augmented twins
};

/// Teacher and student logits over one batch. The teacher is a constant
/// target everywhere; gradients are with respect to the student only.
struct BatchOutputs {
    Matrix teacher;  // m x C
    Matrix student;  // m x C
    BatchLayout layout = BatchLayout::Plain;

    BatchOutputs(Matrix teacher_in, Matrix student_in, BatchLayout layout_in);
    std::size_t batch_rows() const { return teacher.rows(); }
    std::size_t classes() const { return teacher.cols(); }
    std::size_t pairs() const { return teacher.rows() / 2; }  // Paired layout only
};

struct LossHyper {
    double tau = 4.0;        // KD temperature
    double tau1 = 0.5;       // instance-discrimination temperature
    double tau2 = 0.5;       // teacher-student consistency temperature
    double lambda1 = 10.0;   // denoising weight
    double lambda2 = 0.5;    // contrastive weight
    double delta = 1.0;      // Huber threshold
    std::size_t embed_dim = 0;  // 0 selects min(m - 1, C)
    bool kd_tau_squared = true;
};

struct LossValue {
    double value = 0.0;
    Matrix grad_student;
};

/// Mean per-row KL(teacher || student) at temperature tau, optionally scaled
/// by tau^2 so gradient magnitudes stay comparable across temperatures.
LossValue kd_loss(const BatchOutputs& batch, double tau, bool tau_squared = true);

/// Spectral embedding of one batch's logits: rows are centered, the Gram
/// matrix eigendecomposed, and Z built from the top d eigenpairs with
/// eigenvalues clamped at zero before the square root. Total squared
/// pairwise distance is preserved at full rank: sum_ij d_ij^2 = 2m tr(Z Z^T).
struct GramEmbedding {
    Matrix gram;    // m x m, centered
    EigResult eig;  // full decomposition of gram
    Matrix z;       // m x d
};

GramEmbedding gram_embed(const Matrix& f, std::size_t d);

/// Huber distance between teacher and student spectral embeddings. Student
/// embedding columns are sign-aligned to the teacher's before comparison so
/// the loss is continuous across eigenvector orientation flips.
LossValue denoise_loss(const BatchOutputs& batch, std::size_t d, double delta = 1.0);

/// NT-Xent over the student batch: each original row attracts its augmented
/// twin against all other rows. Requires the Paired layout.
LossValue instance_discrimination_loss(const BatchOutputs& batch, double tau1);

/// NT-Xent across models: each teacher row attracts the student row of the
/// same item against the remaining teacher and student rows.
LossValue ts_consistency_loss(const BatchOutputs& batch, double tau2);

struct LossBreakdown {
    double kd = 0.0;
    double denoise = 0.0;
    double contrast_inst = 0.0;
    double contrast_ts = 0.0;
    double total = 0.0;  // kd + lambda1 * denoise + lambda2 * (inst + ts)
    Matrix grad_student;
};

/// Combined objective. Terms with a zero weight are skipped entirely (no
/// eigendecomposition when lambda1 == 0). The stored total is computed from
/// the stored terms with the expression shape given above, bit for bit.
LossBreakdown total_loss(const BatchOutputs& batch, const LossHyper& hyper);

std::size_t default_embed_dim(std::size_t batch_rows, std::size_t classes);

}  // namespace odsd::dcrd
