#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "odsd/aps.hpp"
#include "odsd/data.hpp"
#include "odsd/dcrd.hpp"
#include "odsd/eig.hpp"
#include "odsd/error.hpp"
#include "odsd/kmeans.hpp"
#include "odsd/mlp.hpp"
#include "odsd/numerics.hpp"

namespace py = pybind11;

namespace {

using odsd::Matrix;

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw odsd::ContractViolation("expected a 2-d array");
    const auto rows = static_cast<std::size_t>(arr.shape(0));
    const auto cols = static_cast<std::size_t>(arr.shape(1));
    std::vector<double> data(arr.data(), arr.data() + rows * cols);
    return Matrix(rows, cols, std::move(data));
}

py::array_t<double> from_matrix(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

using NpMatrix = py::array_t<double, py::array::c_style | py::array::forcecast>;

odsd::dcrd::BatchOutputs make_batch(const NpMatrix& teacher, const NpMatrix& student,
                                    bool paired) {
    return {to_matrix(teacher), to_matrix(student),
            paired ? odsd::dcrd::BatchLayout::Paired : odsd::dcrd::BatchLayout::Plain};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "open-world pool scoring and relational distillation primitives";

    m.def("softmax", [](const std::vector<double>& v) { return odsd::softmax(v); });
    m.def("cosine", [](const std::vector<double>& a, const std::vector<double>& b) {
        return odsd::cosine(a, b);
    });
    m.def(
        "huber",
        [](const NpMatrix& a, const NpMatrix& b, double delta) {
            const auto res = odsd::huber(to_matrix(a), to_matrix(b), delta);
            return py::make_tuple(res.value, from_matrix(res.grad_b));
        },
        py::arg("a"), py::arg("b"), py::arg("delta") = 1.0);

    m.def(
        "sym_eig",
        [](const NpMatrix& mat) {
            const auto eig = odsd::sym_eig(to_matrix(mat));
            return py::make_tuple(eig.values, from_matrix(eig.vectors));
        },
        py::arg("m"));
    m.def(
        "sym_eig_backward",
        [](const std::vector<double>& values, const NpMatrix& vectors,
           const std::vector<double>& grad_values, const NpMatrix& grad_vectors, double eps) {
            odsd::EigResult eig{values, to_matrix(vectors)};
            return from_matrix(
                odsd::sym_eig_backward(eig, grad_values, to_matrix(grad_vectors), eps));
        },
        py::arg("values"), py::arg("vectors"), py::arg("grad_values"), py::arg("grad_vectors"),
        py::arg("eps") = 1e-8);

    m.def(
        "kmeans",
        [](const NpMatrix& points, std::size_t k, std::uint64_t seed) {
            const auto res = odsd::kmeans(to_matrix(points), k, seed);
            return py::make_tuple(from_matrix(res.centers), res.assignment, res.objective);
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 1);

    m.def(
        "score_pool",
        [](const NpMatrix& logits, std::size_t k, std::uint64_t seed, bool negated_outlier) {
            const Matrix lm = to_matrix(logits);
            std::vector<std::string> ids(lm.rows());
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = "p" + std::to_string(i);
            const odsd::aps::PredictionSet preds(lm, std::move(ids));
            const auto table = odsd::aps::compute_score_table(
                preds, k, seed,
                negated_outlier ? odsd::aps::OutlierSign::Negated
                                : odsd::aps::OutlierSign::AsPrinted);
            py::dict out;
            out["predicted_class"] = table.predicted_class;
            out["confidence"] = table.confidence;
            out["raw_outlier"] = table.raw_outlier;
            out["sc"] = table.sc;
            out["so"] = table.so;
            out["sd"] = table.sd;
            out["s_total"] = table.s_total;
            out["class_count"] = table.class_count;
            out["class_outlier_mean"] = table.class_outlier_mean;
            out["class_density"] = table.class_density;
            return out;
        },
        py::arg("logits"), py::arg("k") = 5, py::arg("seed") = 1,
        py::arg("negated_outlier") = false);
    m.def(
        "select_top",
        [](const std::vector<double>& s_total, std::size_t n) {
            return odsd::aps::select_top(s_total, n);
        },
        py::arg("s_total"), py::arg("n"));

    m.def(
        "kd_loss",
        [](const NpMatrix& teacher, const NpMatrix& student, double tau, bool tau_squared) {
            const auto res = odsd::dcrd::kd_loss(make_batch(teacher, student, false), tau,
                                                 tau_squared);
            return py::make_tuple(res.value, from_matrix(res.grad_student));
        },
        py::arg("teacher"), py::arg("student"), py::arg("tau") = 4.0,
        py::arg("tau_squared") = true);
    m.def(
        "gram_embed",
        [](const NpMatrix& f, std::size_t d) {
            const auto ge = odsd::dcrd::gram_embed(to_matrix(f), d);
            py::dict out;
            out["gram"] = from_matrix(ge.gram);
            out["values"] = ge.eig.values;
            out["vectors"] = from_matrix(ge.eig.vectors);
            out["z"] = from_matrix(ge.z);
            return out;
        },
        py::arg("f"), py::arg("d"));
    m.def(
        "denoise_loss",
        [](const NpMatrix& teacher, const NpMatrix& student, std::size_t d, double delta) {
            const auto batch = make_batch(teacher, student, false);
            const std::size_t dim =
                d == 0 ? odsd::dcrd::default_embed_dim(batch.batch_rows(), batch.classes()) : d;
            const auto res = odsd::dcrd::denoise_loss(batch, dim, delta);
            return py::make_tuple(res.value, from_matrix(res.grad_student));
        },
        py::arg("teacher"), py::arg("student"), py::arg("d") = 0, py::arg("delta") = 1.0);
    m.def(
        "instance_discrimination_loss",
        [](const NpMatrix& teacher, const NpMatrix& student, double tau1) {
            const auto res = odsd::dcrd::instance_discrimination_loss(
                make_batch(teacher, student, true), tau1);
            return py::make_tuple(res.value, from_matrix(res.grad_student));
        },
        py::arg("teacher"), py::arg("student"), py::arg("tau1") = 0.5);
    m.def(
        "ts_consistency_loss",
        [](const NpMatrix& teacher, const NpMatrix& student, double tau2) {
            const auto res =
                odsd::dcrd::ts_consistency_loss(make_batch(teacher, student, true), tau2);
            return py::make_tuple(res.value, from_matrix(res.grad_student));
        },
        py::arg("teacher"), py::arg("student"), py::arg("tau2") = 0.5);
    m.def(
        "total_loss",
        [](const NpMatrix& teacher, const NpMatrix& student, double tau, double tau1, double tau2,
           double lambda1, double lambda2, double delta, std::size_t embed_dim,
           bool kd_tau_squared) {
            odsd::dcrd::LossHyper hyper{tau, tau1, tau2, lambda1, lambda2, delta, embed_dim,
                                        kd_tau_squared};
            const auto lb = odsd::dcrd::total_loss(make_batch(teacher, student, true), hyper);
            py::dict out;
            out["kd"] = lb.kd;
            out["denoise"] = lb.denoise;
            out["contrast_inst"] = lb.contrast_inst;
            out["contrast_ts"] = lb.contrast_ts;
            out["total"] = lb.total;
            out["grad_student"] = from_matrix(lb.grad_student);
            return out;
        },
        py::arg("teacher"), py::arg("student"), py::arg("tau") = 4.0, py::arg("tau1") = 0.5,
        py::arg("tau2") = 0.5, py::arg("lambda1") = 10.0, py::arg("lambda2") = 0.5,
        py::arg("delta") = 1.0, py::arg("embed_dim") = 0, py::arg("kd_tau_squared") = true);

    py::class_<odsd::nets::Mlp>(m, "Mlp")
        .def(py::init([](const std::vector<std::size_t>& sizes, std::uint64_t seed) {
                 return odsd::nets::make_mlp(sizes, seed);
             }),
             py::arg("sizes"), py::arg("seed") = 1)
        .def_property_readonly("sizes", [](const odsd::nets::Mlp& mlp) { return mlp.sizes; })
        .def("forward", [](const odsd::nets::Mlp& mlp, const NpMatrix& x) {
            return from_matrix(odsd::nets::mlp_forward(mlp, to_matrix(x)));
        });

    m.def(
        "synth_benchmark",
        [](std::uint64_t seed) {
            const auto data =
                odsd::nets::synth_openworld(odsd::nets::default_benchmark_spec(), seed);
            py::dict out;
            out["train_x"] = from_matrix(data.train.x);
            out["train_y"] = data.train.labels;
            out["test_x"] = from_matrix(data.test.x);
            out["test_y"] = data.test.labels;
            out["pool_x"] = from_matrix(data.pool.x);
            out["pool_ids"] = data.pool.ids;
            std::vector<std::string> tags(data.pool.tags.size());
            for (std::size_t i = 0; i < tags.size(); ++i)
                tags[i] = data.pool.tags[i] == odsd::nets::Provenance::Ood ? "ood" : "in";
            out["pool_tags"] = tags;
            return out;
        },
        py::arg("seed") = 1);

    py::register_exception<odsd::ContractViolation>(m, "ContractViolation", PyExc_ValueError);
    py::register_exception<odsd::DegenerateVectorError>(m, "DegenerateVectorError",
                                                        PyExc_ValueError);
    py::register_exception<odsd::ReduceKSignal>(m, "ReduceKSignal", PyExc_ValueError);
}
