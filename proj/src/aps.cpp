#include "odsd/aps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "odsd/error.hpp"
#include "odsd/kmeans.hpp"
#include "odsd/numerics.hpp"
#include "odsd/rng.hpp"

namespace odsd::aps {

namespace {

// Canonical per-class item order: lexicographic by row values, pool index as
// the final tie-break. Identical rows stay numerically interchangeable, so
// every downstream reduction becomes independent of pool permutation.
std::vector<std::vector<std::size_t>> group_by_class(const Matrix& logits,
                                                     std::span<const std::size_t> predicted_class,
                                                     std::size_t classes) {
    std::vector<std::vector<std::size_t>> groups(classes);
    for (std::size_t i = 0; i < predicted_class.size(); ++i)
        groups[predicted_class[i]].push_back(i);
    for (auto& g : groups) {
        std::sort(g.begin(), g.end(), [&](std::size_t a, std::size_t b) {
            auto ra = logits.row(a);
            auto rb = logits.row(b);
            for (std::size_t j = 0; j < ra.size(); ++j) {
                if (ra[j] < rb[j]) return true;
                if (ra[j] > rb[j]) return false;
            }
            return a < b;
        });
    }
    return groups;
}

double max_magnitude(std::span<const double> v) {
    double best = 0.0;
    for (double x : v) best = std::max(best, std::abs(x));
    return best;
}

}  // namespace

PredictionSet::PredictionSet(Matrix logits_in, std::vector<std::string> ids_in)
    : logits(std::move(logits_in)), pool_ids(std::move(ids_in)) {
    if (logits.rows() == 0) throw ContractViolation("prediction set: empty pool");
    if (logits.cols() < 2) throw ContractViolation("prediction set: need at least 2 classes");
    if (pool_ids.size() != logits.rows())
        throw ContractViolation("prediction set: id count does not match rows");
    if (!logits.all_finite()) throw ContractViolation("prediction set: non-finite logit");
    std::unordered_set<std::string> seen;
    for (const auto& id : pool_ids)
        if (!seen.insert(id).second)
            throw ContractViolation("prediction set: duplicate pool id '" + id + "'");
}

ConfidenceScores confidence_scores(const PredictionSet& preds) {
    const std::size_t s = preds.pool_size();
    ConfidenceScores out;
    out.predicted_class.resize(s);
    out.confidence.resize(s);
    out.sc.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
        const auto p = softmax(preds.logits.row(i));
        std::size_t arg = 0;
        for (std::size_t j = 1; j < p.size(); ++j)
            if (p[j] > p[arg]) arg = j;
        out.predicted_class[i] = arg;
        out.confidence[i] = p[arg];
    }
    const double denom = max_magnitude(out.confidence);
    for (std::size_t i = 0; i < s; ++i)
        out.sc[i] = denom == 0.0 ? 0.0 : out.confidence[i] / denom;
    return out;
}

PrototypeBank build_prototypes(const PredictionSet& preds, std::size_t k, std::uint64_t seed,
                               std::span<const std::size_t> predicted_class) {
    if (k == 0) throw ContractViolation("build_prototypes: k must be positive");
    const std::size_t classes = preds.classes();
    const auto groups = group_by_class(preds.logits, predicted_class, classes);

    PrototypeBank bank;
    bank.seed = seed;
    bank.prototypes.resize(classes);
    bank.effective_k.assign(classes, 0);
    for (std::size_t c = 0; c < classes; ++c) {
        const auto& g = groups[c];
        if (g.empty()) continue;
        const std::size_t kc = std::min(k, g.size());
        bank.effective_k[c] = kc;
        const Matrix rows = take_rows(preds.logits, g);
        bank.prototypes[c] = kmeans(rows, kc, mix_seed(seed, c)).centers;
    }
    return bank;
}

OutlierScores outlier_scores(const PredictionSet& preds, const PrototypeBank& bank,
                             std::span<const std::size_t> predicted_class) {
    const std::size_t s = preds.pool_size();
    if (predicted_class.size() != s) throw ContractViolation("outlier_scores: class list size");
    if (bank.prototypes.size() != preds.classes())
        throw ContractViolation("outlier_scores: bank class count");

    OutlierScores out;
    out.raw.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
        const Matrix& protos = bank.prototypes[predicted_class[i]];
        double sum = 0.0;
        for (std::size_t p = 0; p < protos.rows(); ++p)
            sum += cosine(preds.logits.row(i), protos.row(p));
        out.raw[i] = sum;
    }
    const double denom = max_magnitude(out.raw);
    out.so.resize(s);
    for (std::size_t i = 0; i < s; ++i)
        out.so[i] = denom == 0.0 ? 0.0 : out.raw[i] / denom;
    return out;
}

DensityScores density_scores(std::span<const double> raw_outlier,
                             std::span<const std::size_t> predicted_class, std::size_t classes) {
    const std::size_t s = raw_outlier.size();
    if (predicted_class.size() != s) throw ContractViolation("density_scores: class list size");

    DensityScores out;
    out.class_count.assign(classes, 0);
    out.class_outlier_mean.assign(classes, 0.0);
    out.class_density.assign(classes, 0.0);

    // canonical order: raw outliers summed by ascending value per class
    std::vector<std::vector<double>> per_class(classes);
    for (std::size_t i = 0; i < s; ++i) {
        if (predicted_class[i] >= classes) throw ContractViolation("density_scores: class id");
        per_class[predicted_class[i]].push_back(raw_outlier[i]);
    }
    double max_density = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        auto& vals = per_class[c];
        out.class_count[c] = vals.size();
        if (vals.empty()) continue;
        std::sort(vals.begin(), vals.end());
        double sum = 0.0;
        for (double v : vals) sum += v;
        const double mean = sum / static_cast<double>(vals.size());
        out.class_outlier_mean[c] = mean;
        const double clamped = std::max(mean, 0.0);
        out.class_density[c] =
            std::sqrt(clamped) / std::log(static_cast<double>(vals.size() + classes));
        max_density = std::max(max_density, std::abs(out.class_density[c]));
    }

    out.sd.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
        const double d = out.class_density[predicted_class[i]];
        out.sd[i] = max_density == 0.0 ? 0.0 : d / max_density;
    }
    return out;
}

ScoreTable compute_score_table(const PredictionSet& preds, std::size_t k, std::uint64_t seed,
                               OutlierSign sign) {
    ScoreTable t;
    auto conf = confidence_scores(preds);
    const auto bank = build_prototypes(preds, k, seed, conf.predicted_class);
    auto outl = outlier_scores(preds, bank, conf.predicted_class);
    auto dens = density_scores(outl.raw, conf.predicted_class, preds.classes());

    const std::size_t s = preds.pool_size();
    t.predicted_class = std::move(conf.predicted_class);
    t.confidence = std::move(conf.confidence);
    t.sc = std::move(conf.sc);
    t.raw_outlier = std::move(outl.raw);
    t.so = std::move(outl.so);
    t.sd = std::move(dens.sd);
    t.class_count = std::move(dens.class_count);
    t.class_outlier_mean = std::move(dens.class_outlier_mean);
    t.class_density = std::move(dens.class_density);

    t.s_total.resize(s);
    for (std::size_t i = 0; i < s; ++i)
        t.s_total[i] = sign == OutlierSign::AsPrinted ? t.sc[i] - t.so[i] + t.sd[i]
                                                      : t.sc[i] + t.so[i] + t.sd[i];
    return t;
}

std::vector<std::size_t> select_top(std::span<const double> s_total, std::size_t n) {
    if (n > s_total.size())
        throw RequestTooLargeError("selection of " + std::to_string(n) + " from pool of " +
                                   std::to_string(s_total.size()));
    std::vector<std::size_t> order(s_total.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (s_total[a] != s_total[b]) return s_total[a] > s_total[b];
        return a < b;
    });
    order.resize(n);
    return order;
}

void write_score_csv(const std::filesystem::path& path, const PredictionSet& preds,
                     const ScoreTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "id,class,confidence,raw_outlier,sc,so,sd,s_total\n";
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g%c", v, sep);
        out << buf;
    };
    for (std::size_t i = 0; i < preds.pool_size(); ++i) {
        out << preds.pool_ids[i] << ',' << table.predicted_class[i] << ',';
        put(table.confidence[i], ',');
        put(table.raw_outlier[i], ',');
        put(table.sc[i], ',');
        put(table.so[i], ',');
        put(table.sd[i], ',');
        put(table.s_total[i], '\n');
    }
    if (!out) throw IoError("failed writing " + path.string());
}

ScoreCsv read_score_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty score csv", 0);
    std::size_t offset = line.size() + 1;
    if (line != "id,class,confidence,raw_outlier,sc,so,sd,s_total")
        throw FormatError("bad score csv header", 0);

    ScoreCsv csv;
    while (std::getline(in, line)) {
        if (line.empty()) {
            offset += 1;
            continue;
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                fields.emplace_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (fields.size() != 8) throw FormatError("score csv row needs 8 fields", offset);
        auto num = [&](const std::string& sfield) {
            char* end = nullptr;
            const double v = std::strtod(sfield.c_str(), &end);
            if (end == sfield.c_str() || *end != '\0')
                throw FormatError("bad number '" + sfield + "' in score csv", offset);
            return v;
        };
        csv.ids.push_back(fields[0]);
        csv.predicted_class.push_back(static_cast<std::size_t>(num(fields[1])));
        csv.confidence.push_back(num(fields[2]));
        csv.raw_outlier.push_back(num(fields[3]));
        csv.sc.push_back(num(fields[4]));
        csv.so.push_back(num(fields[5]));
        csv.sd.push_back(num(fields[6]));
        csv.s_total.push_back(num(fields[7]));
        offset += line.size() + 1;
    }
    return csv;
}

void write_selection(const std::filesystem::path& path, std::span<const std::string> ids) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& id : ids) out << id << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> read_selection(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ids.push_back(line);
    return ids;
}

}  // namespace odsd::aps
