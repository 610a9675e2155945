#include "odsd/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "odsd/error.hpp"

namespace odsd::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Parser {
    ExperimentConfig cfg;
    std::string where;

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where + ": " + msg); }

    double number(const std::string& v) const {
        char* end = nullptr;
        const double d = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || *end != '\0' || !std::isfinite(d)) fail("bad number '" + v + "'");
        return d;
    }

    double positive(const std::string& v) const {
        const double d = number(v);
        if (!(d > 0.0)) fail("value must be positive, got '" + v + "'");
        return d;
    }

    double nonneg(const std::string& v) const {
        const double d = number(v);
        if (d < 0.0) fail("value must be non-negative, got '" + v + "'");
        return d;
    }

    std::size_t count(const std::string& v, bool allow_zero = false) const {
        const double d = number(v);
        if (d != std::floor(d) || d < 0.0 || d > 1e15) fail("bad count '" + v + "'");
        if (!allow_zero && d == 0.0) fail("count must be positive, got '" + v + "'");
        return static_cast<std::size_t>(d);
    }

    std::uint64_t seed(const std::string& v) const {
        char* end = nullptr;
        const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
        if (end == v.c_str() || *end != '\0') fail("bad seed '" + v + "'");
        return u;
    }

    bool flag(const std::string& v) const {
        if (v == "true" || v == "1" || v == "on") return true;
        if (v == "false" || v == "0" || v == "off") return false;
        fail("bad boolean '" + v + "'");
    }

    std::vector<std::size_t> count_list(const std::string& v) const {
        std::vector<std::size_t> out;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) fail("empty list entry");
            out.push_back(count(item));
        }
        if (out.empty()) fail("empty list");
        return out;
    }

    void apply(const std::string& key, const std::string& value) {
        auto& c = cfg;
        if (key == "paths.train") c.paths.train = value;
        else if (key == "paths.test") c.paths.test = value;
        else if (key == "paths.pool") c.paths.pool = value;
        else if (key == "paths.teacher") c.paths.teacher = value;
        else if (key == "paths.checkpoint") c.paths.checkpoint = value;
        else if (key == "paths.scores") c.paths.scores = value;
        else if (key == "paths.selection") c.paths.selection = value;
        else if (key == "paths.out") c.paths.out = value;
        else if (key == "aps.k") c.aps.k = count(value);
        else if (key == "aps.seed") c.aps.seed = seed(value);
        else if (key == "aps.n_select") c.aps.n_select = count(value);
        else if (key == "aps.method") {
            if (value != "aps" && value != "random") fail("aps.method must be aps or random");
            c.aps.method = value;
        } else if (key == "aps.outlier_sign") {
            if (value == "as_printed") c.aps.outlier_sign = aps::OutlierSign::AsPrinted;
            else if (value == "negated") c.aps.outlier_sign = aps::OutlierSign::Negated;
            else fail("aps.outlier_sign must be as_printed or negated");
        } else if (key == "dcrd.tau") c.dcrd.tau = positive(value);
        else if (key == "dcrd.tau1") c.dcrd.tau1 = positive(value);
        else if (key == "dcrd.tau2") c.dcrd.tau2 = positive(value);
        else if (key == "dcrd.lambda1") c.dcrd.lambda1 = nonneg(value);
        else if (key == "dcrd.lambda2") c.dcrd.lambda2 = nonneg(value);
        else if (key == "dcrd.delta") c.dcrd.delta = positive(value);
        else if (key == "dcrd.embed_dim") c.dcrd.embed_dim = count(value, true);
        else if (key == "dcrd.kd_tau_squared") c.dcrd.kd_tau_squared = flag(value);
        else if (key == "train.epochs") c.train.epochs = count(value, true);
        else if (key == "train.batch") c.train.batch = count(value);
        else if (key == "train.lr") c.train.lr = positive(value);
        else if (key == "train.momentum") {
            c.train.momentum = nonneg(value);
            if (c.train.momentum >= 1.0) fail("train.momentum must be below 1");
        } else if (key == "train.weight_decay") c.train.weight_decay = nonneg(value);
        else if (key == "train.schedule") {
            if (value != "constant" && value != "cosine")
                fail("train.schedule must be constant or cosine");
            c.train.schedule = value;
        } else if (key == "train.seed") c.train.seed = seed(value);
        else if (key == "train.stop_after_epoch") c.train.stop_after_epoch = count(value, true);
        else if (key == "model.teacher_hidden") c.model.teacher_hidden = count_list(value);
        else if (key == "model.student_hidden") c.model.student_hidden = count_list(value);
        else if (key == "aug.kind") {
            if (value == "gaussian-noise") c.aug.spec.kind = nets::AugmentKind::GaussianNoise;
            else if (value == "feature-dropout") c.aug.spec.kind = nets::AugmentKind::FeatureDropout;
            else if (value == "shift-flip") c.aug.spec.kind = nets::AugmentKind::ShiftFlip;
            else fail("aug.kind must be gaussian-noise, feature-dropout or shift-flip");
        } else if (key == "aug.noise_sigma") c.aug.spec.noise_sigma = nonneg(value);
        else if (key == "aug.dropout_p") {
            c.aug.spec.dropout_p = nonneg(value);
            if (c.aug.spec.dropout_p > 1.0) fail("aug.dropout_p must be at most 1");
        } else if (key == "aug.max_shift") c.aug.spec.max_shift = count(value, true);
        else if (key == "aug.grid_h") c.aug.spec.grid_h = count(value, true);
        else if (key == "aug.grid_w") c.aug.spec.grid_w = count(value, true);
        else if (key == "aug.seed") c.aug.spec.seed = seed(value);
        else if (key == "synth.seed") c.synth.seed = seed(value);
        else if (key == "synth.benchmark") c.synth.benchmark = flag(value);
        else if (key == "embed.batch") c.embed.batch = count(value);
        else if (key == "embed.dim") c.embed.dim = count(value);
        else fail("unknown key '" + key + "'");
    }
};

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
    Parser p;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        p.where = source + ":" + std::to_string(lineno);
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) p.fail("expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) p.fail("empty key");
        if (value.empty()) p.fail("empty value for '" + key + "'");
        p.apply(key, value);
    }
    return p.cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, path.filename().string());
}

double schedule_lr(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.schedule == "constant") return cfg.lr;
    // cosine decay from lr to lr/100 across the run
    const double t = cfg.epochs <= 1
                         ? 0.0
                         : static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
    const double floor = cfg.lr * 0.01;
    return floor + (cfg.lr - floor) * 0.5 * (1.0 + std::cos(3.141592653589793 * t));
}

}  // namespace odsd::cli
