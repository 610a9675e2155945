#include "odsd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "odsd/checkpoint.hpp"
#include "odsd/dcrd.hpp"
#include "odsd/error.hpp"
#include "odsd/rng.hpp"
#include "odsd/tensor_io.hpp"

namespace odsd::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

fs::path require_path(const std::string& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("missing required path: ") + what);
    return fs::path(p);
}

fs::path out_dir(const ExperimentConfig& cfg) {
    fs::path out(cfg.paths.out);
    ensure_dir(out);
    return out;
}

// teacher epoch records use their own minimal schema; the distillation
// breakdown identity cannot hold for a cross-entropy loss
void append_teacher_metrics(const fs::path& file, const std::string& run_id, std::size_t epoch,
                            double train_loss, double test_acc, double wall_ms,
                            std::uint64_t seed) {
    json rec;
    rec["run_id"] = run_id;
    rec["epoch"] = epoch;
    rec["train_loss"] = train_loss;
    rec["test_acc"] = test_acc;
    rec["wall_ms"] = wall_ms;
    rec["seed"] = seed;
    std::ofstream out(file, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append " + file.string());
    out << rec.dump() << '\n';
    if (!out) throw IoError("failed writing " + file.string());
}

Matrix forward_rows(const nets::Mlp& model, const Matrix& x, std::size_t threads) {
    if (threads <= 1 || x.rows() < 2 * threads) return nets::mlp_forward(model, x);
    Matrix out(x.rows(), model.output_dim());
    std::vector<std::thread> pool;
    const std::size_t chunk = (x.rows() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(x.rows(), lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            std::vector<std::size_t> idx(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) idx[i - lo] = i;
            const Matrix part = nets::mlp_forward(model, take_rows(x, idx));
            for (std::size_t i = lo; i < hi; ++i) {
                auto src = part.row(i - lo);
                std::copy(src.begin(), src.end(), out.row(i).begin());
            }
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

std::string format_acc(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::uint64_t distill_fingerprint(const ExperimentConfig& cfg, std::size_t classes,
                                  std::size_t dim) {
    std::ostringstream ss;
    ss << dim << '|' << classes;
    for (std::size_t h : cfg.model.student_hidden) ss << ',' << h;
    ss << '|' << cfg.dcrd.tau << '|' << cfg.dcrd.tau1 << '|' << cfg.dcrd.tau2 << '|'
       << cfg.dcrd.lambda1 << '|' << cfg.dcrd.lambda2 << '|' << cfg.dcrd.delta << '|'
       << cfg.dcrd.embed_dim << '|' << cfg.dcrd.kd_tau_squared << '|' << cfg.train.epochs << '|'
       << cfg.train.batch << '|' << cfg.train.lr << '|' << cfg.train.momentum << '|'
       << cfg.train.weight_decay << '|' << cfg.train.schedule << '|' << cfg.train.seed << '|'
       << static_cast<int>(cfg.aug.spec.kind) << '|' << cfg.aug.spec.noise_sigma << '|'
       << cfg.aug.spec.dropout_p << '|' << cfg.aug.spec.max_shift << '|' << cfg.aug.spec.grid_h
       << '|' << cfg.aug.spec.grid_w << '|' << cfg.aug.spec.seed;
    return fnv1a(ss.str());
}

}  // namespace

void append_metrics(const fs::path& file, const MetricsRecord& rec) {
    json j;
    j["run_id"] = rec.run_id;
    j["epoch"] = rec.epoch;
    j["kd"] = rec.kd;
    j["denoise"] = rec.denoise;
    j["contrast_inst"] = rec.contrast_inst;
    j["contrast_ts"] = rec.contrast_ts;
    j["total"] = rec.total;
    if (rec.test_acc) j["test_acc"] = *rec.test_acc;
    j["wall_ms"] = rec.wall_ms;
    j["seed"] = rec.seed;
    std::ofstream out(file, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append " + file.string());
    out << j.dump() << '\n';
    if (!out) throw IoError("failed writing " + file.string());
}

std::vector<MetricsRecord> read_metrics(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::vector<MetricsRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("bad metrics line " + std::to_string(lineno) + ": " + e.what(), 0);
        }
        MetricsRecord r;
        r.run_id = j.value("run_id", "");
        r.epoch = j.value("epoch", std::size_t{0});
        r.kd = j.value("kd", 0.0);
        r.denoise = j.value("denoise", 0.0);
        r.contrast_inst = j.value("contrast_inst", 0.0);
        r.contrast_ts = j.value("contrast_ts", 0.0);
        r.total = j.value("total", 0.0);
        if (j.contains("test_acc")) r.test_acc = j["test_acc"].get<double>();
        r.wall_ms = j.value("wall_ms", 0.0);
        r.seed = j.value("seed", std::uint64_t{0});
        out.push_back(std::move(r));
    }
    return out;
}

void save_labeled(const fs::path& dir, const nets::LabeledDataset& ds) {
    ensure_dir(dir);
    io::write_matrix(dir / "x.odst", ds.x);
    std::vector<double> y(ds.labels.begin(), ds.labels.end());
    io::write_vector(dir / "y.odst", y);
}

nets::LabeledDataset load_labeled(const fs::path& dir) {
    nets::LabeledDataset ds;
    ds.x = io::read_matrix(dir / "x.odst");
    const auto y = io::read_vector(dir / "y.odst");
    if (y.size() != ds.x.rows()) throw FormatError("labeled dataset: x/y row mismatch", 0);
    ds.labels.reserve(y.size());
    for (double v : y) {
        if (v != std::floor(v) || v < 0.0) throw FormatError("labeled dataset: bad label", 0);
        ds.labels.push_back(static_cast<int>(v));
    }
    return ds;
}

void save_pool(const fs::path& dir, const nets::UnlabeledPool& pool) {
    ensure_dir(dir);
    io::write_matrix(dir / "x.odst", pool.x);
    std::ofstream ids(dir / "ids.txt", std::ios::binary);
    if (!ids) throw IoError("cannot write pool ids");
    for (const auto& id : pool.ids) ids << id << '\n';
    if (!pool.tags.empty()) {
        std::ofstream tags(dir / "provenance.txt", std::ios::binary);
        if (!tags) throw IoError("cannot write pool provenance");
        for (auto t : pool.tags) tags << (t == nets::Provenance::Ood ? "ood" : "in") << '\n';
    }
}

nets::UnlabeledPool load_pool(const fs::path& dir) {
    nets::UnlabeledPool pool;
    pool.x = io::read_matrix(dir / "x.odst");
    std::ifstream ids(dir / "ids.txt", std::ios::binary);
    if (!ids) throw IoError("cannot open pool ids in " + dir.string());
    std::string line;
    while (std::getline(ids, line))
        if (!line.empty()) pool.ids.push_back(line);
    if (pool.ids.size() != pool.x.rows()) throw FormatError("pool: id/row count mismatch", 0);

    std::ifstream tags(dir / "provenance.txt", std::ios::binary);
    if (tags) {
        while (std::getline(tags, line)) {
            if (line.empty()) continue;
            if (line == "ood") pool.tags.push_back(nets::Provenance::Ood);
            else if (line == "in") pool.tags.push_back(nets::Provenance::InDist);
            else throw FormatError("pool: bad provenance tag '" + line + "'", 0);
        }
        if (pool.tags.size() != pool.x.rows())
            throw FormatError("pool: provenance/row count mismatch", 0);
    }
    return pool;
}

std::size_t env_threads() {
    const char* v = std::getenv("ODSD_THREADS");
    if (v == nullptr || *v == '\0') return 1;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || n < 1) throw ConfigError("bad ODSD_THREADS value");
    return static_cast<std::size_t>(n);
}

SynthOutcome cmd_synth(const ExperimentConfig& cfg) {
    if (!cfg.synth.benchmark) throw ConfigError("synth.benchmark is the only generator");
    const fs::path out = out_dir(cfg);
    const nets::SynthData data = nets::synth_openworld(nets::default_benchmark_spec(),
                                                       cfg.synth.seed);

    const fs::path train = cfg.paths.train.empty() ? out / "train" : fs::path(cfg.paths.train);
    const fs::path test = cfg.paths.test.empty() ? out / "test" : fs::path(cfg.paths.test);
    const fs::path pool = cfg.paths.pool.empty() ? out / "pool" : fs::path(cfg.paths.pool);
    save_labeled(train, data.train);
    save_labeled(test, data.test);
    save_pool(pool, data.pool);

    SynthOutcome o;
    o.train_rows = data.train.size();
    o.test_rows = data.test.size();
    o.pool_rows = data.pool.size();
    o.pool_ood_fraction = data.pool.ood_fraction();
    std::printf("synth: %zu train, %zu test, %zu pool rows (ood fraction %.4f)\n", o.train_rows,
                o.test_rows, o.pool_rows, o.pool_ood_fraction);
    std::printf("synth: wrote %s %s %s\n", train.string().c_str(), test.string().c_str(),
                pool.string().c_str());
    return o;
}

TeacherOutcome cmd_train_teacher(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const nets::LabeledDataset train = load_labeled(require_path(cfg.paths.train, "paths.train"));
    const nets::LabeledDataset test = load_labeled(require_path(cfg.paths.test, "paths.test"));
    const std::size_t classes = train.classes();
    if (classes < 2) throw ConfigError("teacher training needs at least 2 classes");

    std::vector<std::size_t> sizes{train.x.cols()};
    sizes.insert(sizes.end(), cfg.model.teacher_hidden.begin(), cfg.model.teacher_hidden.end());
    sizes.push_back(classes);
    nets::Mlp model = nets::make_mlp(sizes, cfg.train.seed);
    nets::SgdState opt = nets::make_sgd(
        model, {cfg.train.lr, cfg.train.momentum, cfg.train.weight_decay});

    const fs::path out = out_dir(cfg);
    const fs::path metrics = out / "teacher_metrics.jsonl";
    std::error_code ec;
    fs::remove(metrics, ec);
    const std::string run_id = "teacher-s" + std::to_string(cfg.train.seed);

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.train.seed, 0x7eacULL, epoch));
        shuffle_rng.shuffle(order);
        const double lr = schedule_lr(cfg.train, epoch);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.train.batch) {
            const std::size_t stop = std::min(order.size(), start + cfg.train.batch);
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            const Matrix xb = take_rows(train.x, idx);
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = train.labels[idx[i]];

            nets::ForwardCache cache;
            const Matrix logits = nets::mlp_forward(model, xb, cache);
            const nets::CeResult ce = nets::cross_entropy(logits, yb);
            const nets::MlpGrads grads = nets::mlp_backward(model, cache, ce.grad_logits);
            nets::sgd_step(model, grads, opt, lr);
            loss_sum += ce.value;
            ++batches;
        }
        const double acc = nets::accuracy(model, test);
        append_teacher_metrics(metrics, run_id, epoch + 1,
                               loss_sum / static_cast<double>(batches), acc, wall_ms_since(t0),
                               cfg.train.seed);
    }

    TeacherOutcome o;
    o.epochs = cfg.train.epochs;
    o.test_acc = nets::accuracy(model, test);
    o.checkpoint = cfg.paths.teacher.empty() ? out / "teacher" : fs::path(cfg.paths.teacher);
    save_checkpoint(o.checkpoint, model, {"teacher", cfg.train.epochs, true, 0});
    std::printf("teacher: test accuracy %s after %zu epochs -> %s\n",
                format_acc(o.test_acc).c_str(), o.epochs, o.checkpoint.string().c_str());
    return o;
}

ScoreOutcome cmd_score(const ExperimentConfig& cfg) {
    const nets::UnlabeledPool pool = load_pool(require_path(cfg.paths.pool, "paths.pool"));
    const nets::Mlp teacher =
        load_checkpoint(require_path(cfg.paths.teacher, "paths.teacher")).model;

    const Matrix logits = forward_rows(teacher, pool.x, env_threads());
    const aps::PredictionSet preds(logits, pool.ids);
    const aps::ScoreTable table =
        aps::compute_score_table(preds, cfg.aps.k, cfg.aps.seed, cfg.aps.outlier_sign);

    const fs::path out = out_dir(cfg);
    ScoreOutcome o;
    o.csv = cfg.paths.scores.empty() ? out / "scores.csv" : fs::path(cfg.paths.scores);
    aps::write_score_csv(o.csv, preds, table);
    o.pool_rows = pool.size();
    o.pool_ood_fraction = pool.ood_fraction();

    std::printf("score: %zu pool rows, %zu classes -> %s\n", pool.size(), preds.classes(),
                o.csv.string().c_str());
    for (std::size_t c = 0; c < table.class_count.size(); ++c)
        std::printf("score: class %zu n=%zu outlier_mean=%.6f density=%.6f\n", c,
                    table.class_count[c], table.class_outlier_mean[c], table.class_density[c]);
    if (!pool.tags.empty())
        std::printf("score: pool ood fraction %.4f\n", o.pool_ood_fraction);
    return o;
}

SampleOutcome cmd_sample(const ExperimentConfig& cfg) {
    if (cfg.aps.n_select == 0) throw ConfigError("aps.n_select must be set for sampling");
    const fs::path out = out_dir(cfg);
    const fs::path csv_path =
        cfg.paths.scores.empty() ? out / "scores.csv" : fs::path(cfg.paths.scores);
    const aps::ScoreCsv scores = aps::read_score_csv(csv_path);

    std::vector<std::size_t> picked;
    if (cfg.aps.method == "aps") {
        picked = aps::select_top(scores.s_total, cfg.aps.n_select);
    } else {
        if (cfg.aps.n_select > scores.ids.size())
            throw RequestTooLargeError("selection of " + std::to_string(cfg.aps.n_select) +
                                       " from pool of " + std::to_string(scores.ids.size()));
        std::vector<std::size_t> order(scores.ids.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(mix_seed(cfg.aps.seed, 0x5a3ULL));
        rng.shuffle(order);
        picked.assign(order.begin(), order.begin() + cfg.aps.n_select);
    }

    std::vector<std::string> ids(picked.size());
    for (std::size_t i = 0; i < picked.size(); ++i) ids[i] = scores.ids[picked[i]];

    SampleOutcome o;
    o.selection = cfg.paths.selection.empty() ? out / "selection.txt"
                                              : fs::path(cfg.paths.selection);
    aps::write_selection(o.selection, ids);
    o.selected = ids.size();

    if (!cfg.paths.pool.empty()) {
        const nets::UnlabeledPool pool = load_pool(cfg.paths.pool);
        if (!pool.tags.empty()) {
            std::unordered_map<std::string, std::size_t> row_of;
            for (std::size_t i = 0; i < pool.ids.size(); ++i) row_of[pool.ids[i]] = i;
            std::size_t ood = 0;
            for (const auto& id : ids) {
                auto it = row_of.find(id);
                if (it == row_of.end()) throw ConfigError("selected id not in pool: " + id);
                ood += pool.tags[it->second] == nets::Provenance::Ood;
            }
            o.selected_ood_fraction = static_cast<double>(ood) / static_cast<double>(ids.size());
            o.pool_ood_fraction = pool.ood_fraction();
        }
    }

    std::printf("sample: %s picked %zu of %zu -> %s\n", cfg.aps.method.c_str(), o.selected,
                scores.ids.size(), o.selection.string().c_str());
    if (o.selected_ood_fraction)
        std::printf("sample: selected ood fraction %.4f (pool %.4f)\n", *o.selected_ood_fraction,
                    *o.pool_ood_fraction);
    return o;
}

DistillOutcome cmd_distill(const ExperimentConfig& cfg, bool resume) {
    const auto t0 = std::chrono::steady_clock::now();
    const nets::UnlabeledPool pool = load_pool(require_path(cfg.paths.pool, "paths.pool"));
    const nets::Mlp teacher =
        load_checkpoint(require_path(cfg.paths.teacher, "paths.teacher")).model;
    const fs::path out = out_dir(cfg);

    const fs::path sel_path =
        cfg.paths.selection.empty() ? out / "selection.txt" : fs::path(cfg.paths.selection);
    const std::vector<std::string> sel_ids = aps::read_selection(sel_path);
    if (sel_ids.empty()) throw ConfigError("empty selection " + sel_path.string());

    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < pool.ids.size(); ++i) row_of[pool.ids[i]] = i;
    std::vector<std::size_t> sel_rows;
    sel_rows.reserve(sel_ids.size());
    for (const auto& id : sel_ids) {
        auto it = row_of.find(id);
        if (it == row_of.end()) throw ConfigError("selection id not in pool: " + id);
        sel_rows.push_back(it->second);
    }

    std::optional<nets::LabeledDataset> test;
    if (!cfg.paths.test.empty()) test = load_labeled(cfg.paths.test);

    const std::size_t classes = teacher.output_dim();
    std::vector<std::size_t> sizes{pool.x.cols()};
    sizes.insert(sizes.end(), cfg.model.student_hidden.begin(), cfg.model.student_hidden.end());
    sizes.push_back(classes);
    const std::uint64_t fingerprint = distill_fingerprint(cfg, classes, pool.x.cols());

    nets::Mlp student = nets::make_mlp(sizes, mix_seed(cfg.train.seed, 0x57abULL));
    nets::SgdState opt = nets::make_sgd(
        student, {cfg.train.lr, cfg.train.momentum, cfg.train.weight_decay});
    std::size_t start_epoch = 0;

    const fs::path state_dir = out / "distill_state";
    const fs::path metrics = out / "metrics.jsonl";
    if (resume) {
        LoadedCheckpoint state = load_checkpoint(state_dir);
        if (state.meta.config_fingerprint != fingerprint)
            throw ConfigError("resume state does not match this config");
        if (state.meta.completed) {
            std::printf("distill: %s already complete at epoch %zu\n", state_dir.string().c_str(),
                        state.meta.epoch);
        }
        if (!state.has_optimizer) throw ConfigError("resume state has no optimizer slots");
        student = std::move(state.model);
        opt.vw = std::move(state.vw);
        opt.vb = std::move(state.vb);
        start_epoch = state.meta.epoch;
    } else {
        std::error_code ec;
        fs::remove(metrics, ec);
    }

    dcrd::LossHyper hyper;
    hyper.tau = cfg.dcrd.tau;
    hyper.tau1 = cfg.dcrd.tau1;
    hyper.tau2 = cfg.dcrd.tau2;
    hyper.lambda1 = cfg.dcrd.lambda1;
    hyper.lambda2 = cfg.dcrd.lambda2;
    hyper.delta = cfg.dcrd.delta;
    hyper.embed_dim = cfg.dcrd.embed_dim;
    hyper.kd_tau_squared = cfg.dcrd.kd_tau_squared;

    const std::string run_id = "distill-s" + std::to_string(cfg.train.seed);
    DistillOutcome o;
    o.metrics = metrics;

    std::vector<std::size_t> order = sel_rows;
    for (std::size_t epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.train.seed, 0xd15ULL, epoch));
        order = sel_rows;
        shuffle_rng.shuffle(order);
        const double lr = schedule_lr(cfg.train, epoch);

        double kd_sum = 0.0, dn_sum = 0.0, c1_sum = 0.0, c2_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.train.batch) {
            const std::size_t stop = std::min(order.size(), start + cfg.train.batch);
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            const Matrix x_orig = take_rows(pool.x, idx);
            const Matrix x_aug = nets::augment(x_orig, cfg.aug.spec, epoch, idx);
            const Matrix xb = vstack(x_orig, x_aug);

            const Matrix t_logits = nets::mlp_forward(teacher, xb);
            nets::ForwardCache cache;
            const Matrix s_logits = nets::mlp_forward(student, xb, cache);
            const dcrd::LossBreakdown lb =
                dcrd::total_loss({t_logits, s_logits, dcrd::BatchLayout::Paired}, hyper);
            const nets::MlpGrads grads = nets::mlp_backward(student, cache, lb.grad_student);
            nets::sgd_step(student, grads, opt, lr);

            kd_sum += lb.kd;
            dn_sum += lb.denoise;
            c1_sum += lb.contrast_inst;
            c2_sum += lb.contrast_ts;
            ++batches;
        }

        MetricsRecord rec;
        rec.run_id = run_id;
        rec.epoch = epoch + 1;
        rec.seed = cfg.train.seed;
        const double nb = static_cast<double>(batches);
        rec.kd = kd_sum / nb;
        rec.denoise = dn_sum / nb;
        rec.contrast_inst = c1_sum / nb;
        rec.contrast_ts = c2_sum / nb;
        rec.total = rec.kd + hyper.lambda1 * rec.denoise +
                    hyper.lambda2 * (rec.contrast_inst + rec.contrast_ts);
        if (test) rec.test_acc = nets::accuracy(student, *test);
        rec.wall_ms = wall_ms_since(t0);
        append_metrics(metrics, rec);

        const bool done = epoch + 1 == cfg.train.epochs;
        save_checkpoint(state_dir, student, {"state", epoch + 1, done, fingerprint}, &opt);
        o.epochs_run = epoch + 1;
        if (test) o.final_test_acc = rec.test_acc;

        if (!done && cfg.train.stop_after_epoch == epoch + 1) {
            o.paused = true;
            std::printf("distill: paused after epoch %zu (resume with --resume)\n", epoch + 1);
            return o;
        }
    }

    o.student = out / "student";
    save_checkpoint(o.student, student, {"student", cfg.train.epochs, true, fingerprint});
    if (o.final_test_acc)
        std::printf("distill: student test accuracy %s after %zu epochs -> %s\n",
                    format_acc(*o.final_test_acc).c_str(), cfg.train.epochs,
                    o.student.string().c_str());
    else
        std::printf("distill: finished %zu epochs -> %s\n", cfg.train.epochs,
                    o.student.string().c_str());
    return o;
}

double cmd_eval(const ExperimentConfig& cfg) {
    const nets::Mlp model =
        load_checkpoint(require_path(cfg.paths.checkpoint, "paths.checkpoint")).model;
    const nets::LabeledDataset test = load_labeled(require_path(cfg.paths.test, "paths.test"));
    const double acc = nets::accuracy(model, test);
    std::printf("accuracy %s\n", format_acc(acc).c_str());
    return acc;
}

EmbedOutcome cmd_embed(const ExperimentConfig& cfg) {
    const nets::Mlp teacher =
        load_checkpoint(require_path(cfg.paths.teacher, "paths.teacher")).model;
    const nets::Mlp student =
        load_checkpoint(require_path(cfg.paths.checkpoint, "paths.checkpoint")).model;

    Matrix x;
    std::vector<std::string> ids;
    if (!cfg.paths.pool.empty()) {
        const nets::UnlabeledPool pool = load_pool(cfg.paths.pool);
        x = pool.x;
        ids = pool.ids;
    } else {
        const nets::LabeledDataset test = load_labeled(require_path(cfg.paths.test, "paths.test"));
        x = test.x;
        ids.resize(x.rows());
        char buf[32];
        for (std::size_t i = 0; i < x.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "row%06zu", i);
            ids[i] = buf;
        }
    }

    const std::size_t rows = std::min(cfg.embed.batch, x.rows());
    if (rows < 2) throw ConfigError("embed needs at least 2 rows");
    const std::size_t d = cfg.embed.dim;
    if (d == 0 || d > rows) throw ConfigError("embed.dim must be in [1, batch rows]");
    std::vector<std::size_t> idx(rows);
    for (std::size_t i = 0; i < rows; ++i) idx[i] = i;
    const Matrix head = take_rows(x, idx);

    const Matrix t_logits = nets::mlp_forward(teacher, head);
    const Matrix s_logits = nets::mlp_forward(student, head);
    const dcrd::GramEmbedding ge_t = dcrd::gram_embed(t_logits, d);
    const dcrd::GramEmbedding ge_s = dcrd::gram_embed(s_logits, d);

    const fs::path out = out_dir(cfg);
    EmbedOutcome o;
    o.csv = out / "embed.csv";
    o.rows = rows;
    o.dim = d;
    std::ofstream csv(o.csv, std::ios::binary);
    if (!csv) throw IoError("cannot write " + o.csv.string());
    csv << "id";
    for (std::size_t j = 0; j < d; ++j) csv << ",zt" << j;
    for (std::size_t j = 0; j < d; ++j) csv << ",zs" << j;
    csv << '\n';
    char buf[64];
    for (std::size_t i = 0; i < rows; ++i) {
        csv << ids[i];
        for (std::size_t j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", ge_t.z(i, j));
            csv << buf;
        }
        for (std::size_t j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", ge_s.z(i, j));
            csv << buf;
        }
        csv << '\n';
    }
    if (!csv) throw IoError("failed writing " + o.csv.string());
    io::write_matrix(out / "z_teacher.odst", ge_t.z);
    io::write_matrix(out / "z_student.odst", ge_s.z);
    std::printf("embed: %zu rows into %zu dims -> %s\n", rows, d, o.csv.string().c_str());
    return o;
}

}  // namespace odsd::cli
