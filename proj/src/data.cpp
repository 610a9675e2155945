#include "odsd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "odsd/error.hpp"
#include "odsd/rng.hpp"

namespace odsd::nets {

std::size_t LabeledDataset::classes() const {
    int top = -1;
    for (int y : labels) top = std::max(top, y);
    return static_cast<std::size_t>(top + 1);
}

double UnlabeledPool::ood_fraction() const {
    if (tags.empty()) return 0.0;
    std::size_t ood = 0;
    for (Provenance t : tags) ood += t == Provenance::Ood;
    return static_cast<double>(ood) / static_cast<double>(tags.size());
}

Matrix augment(const Matrix& x, const AugmentationSpec& spec, std::uint64_t epoch,
               std::span<const std::size_t> item_ids) {
    if (item_ids.size() != x.rows()) throw ContractViolation("augment: id count");
    if (!x.all_finite()) throw ContractViolation("augment: non-finite input");
    if (spec.noise_sigma < 0.0 || spec.dropout_p < 0.0 || spec.dropout_p > 1.0)
        throw ContractViolation("augment: bad spec");
    if (spec.kind == AugmentKind::ShiftFlip && spec.grid_h * spec.grid_w != x.cols())
        throw ConfigError("shift-flip augmentation needs grid_h * grid_w == feature width");

    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        // stream keyed by (seed, epoch, item), not by batch position
        Rng rng(mix_seed(spec.seed, epoch, item_ids[i]));
        auto src = x.row(i);
        auto dst = out.row(i);
        switch (spec.kind) {
            case AugmentKind::GaussianNoise:
                for (std::size_t j = 0; j < src.size(); ++j)
                    dst[j] = src[j] + spec.noise_sigma * rng.normal();
                break;
            case AugmentKind::FeatureDropout:
                for (std::size_t j = 0; j < src.size(); ++j)
                    dst[j] = rng.uniform() < spec.dropout_p ? 0.0 : src[j];
                break;
            case AugmentKind::ShiftFlip: {
                const std::int64_t span = 2 * static_cast<std::int64_t>(spec.max_shift) + 1;
                const std::int64_t dy =
                    static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span))) -
                    static_cast<std::int64_t>(spec.max_shift);
                const std::int64_t dx =
                    static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span))) -
                    static_cast<std::int64_t>(spec.max_shift);
                const bool mirror = rng.uniform() < 0.5;
                const std::int64_t h = static_cast<std::int64_t>(spec.grid_h);
                const std::int64_t w = static_cast<std::int64_t>(spec.grid_w);
                for (std::int64_t r = 0; r < h; ++r) {
                    for (std::int64_t col = 0; col < w; ++col) {
                        const std::int64_t sr = r - dy;
                        std::int64_t scol = col - dx;
                        if (mirror) scol = w - 1 - scol;
                        const bool inside = sr >= 0 && sr < h && scol >= 0 && scol < w;
                        dst[static_cast<std::size_t>(r * w + col)] =
                            inside ? src[static_cast<std::size_t>(sr * w + scol)] : 0.0;
                    }
                }
                break;
            }
        }
    }
    return out;
}

namespace {

void draw_cluster_rows(Matrix& dst, std::size_t& row, const GaussianClusterSpec& cluster,
                       std::size_t count, Rng& rng) {
    for (std::size_t i = 0; i < count; ++i, ++row) {
        auto out = dst.row(row);
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] = cluster.mean[j] + cluster.sigma * rng.normal();
    }
}

}  // namespace

SynthData synth_openworld(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.dim == 0) throw ContractViolation("synth: zero dim");
    if (spec.clusters.empty()) throw ContractViolation("synth: no clusters");
    int top_label = -1;
    for (const auto& c : spec.clusters) {
        if (c.mean.size() != spec.dim) throw ContractViolation("synth: cluster mean width");
        if (!(c.sigma > 0.0)) throw ContractViolation("synth: sigma must be positive");
        top_label = std::max(top_label, c.label);
    }
    if (top_label < 0) throw ContractViolation("synth: no labeled cluster");
    const std::size_t classes = static_cast<std::size_t>(top_label + 1);

    std::vector<std::vector<std::size_t>> by_label(classes);
    std::vector<std::size_t> ood_clusters;
    for (std::size_t i = 0; i < spec.clusters.size(); ++i) {
        const int l = spec.clusters[i].label;
        if (l < 0)
            ood_clusters.push_back(i);
        else
            by_label[static_cast<std::size_t>(l)].push_back(i);
    }
    for (std::size_t c = 0; c < classes; ++c)
        if (by_label[c].empty())
            throw ContractViolation("synth: class " + std::to_string(c) + " has no cluster");
    if (!spec.pool_per_class.empty() && spec.pool_per_class.size() != classes)
        throw ContractViolation("synth: pool_per_class size");
    if (spec.pool_ood_total > 0 && ood_clusters.empty())
        throw ContractViolation("synth: ood rows requested but no ood cluster");

    SynthData out;

    auto make_labeled = [&](std::size_t per_class, std::uint64_t stream) {
        LabeledDataset ds;
        ds.x = Matrix(per_class * classes, spec.dim);
        ds.labels.resize(per_class * classes);
        Rng rng(mix_seed(seed, stream));
        std::size_t row = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            const auto& members = by_label[c];
            for (std::size_t i = 0; i < per_class; ++i) {
                draw_cluster_rows(ds.x, row, spec.clusters[members[i % members.size()]], 1, rng);
                ds.labels[row - 1] = static_cast<int>(c);
            }
        }
        return ds;
    };
    out.train = make_labeled(spec.train_per_class, 0x11);
    out.test = make_labeled(spec.test_per_class, 0x12);

    std::size_t pool_total = spec.pool_ood_total;
    for (std::size_t c : spec.pool_per_class) pool_total += c;
    out.pool.x = Matrix(pool_total, spec.dim);
    out.pool.tags.resize(pool_total);
    Rng pool_rng(mix_seed(seed, 0x13));
    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.pool_per_class.size(); ++c) {
        const auto& members = by_label[c];
        for (std::size_t i = 0; i < spec.pool_per_class[c]; ++i) {
            draw_cluster_rows(out.pool.x, row, spec.clusters[members[i % members.size()]], 1,
                              pool_rng);
            out.pool.tags[row - 1] = Provenance::InDist;
        }
    }
    for (std::size_t i = 0; i < spec.pool_ood_total; ++i) {
        draw_cluster_rows(out.pool.x, row, spec.clusters[ood_clusters[i % ood_clusters.size()]], 1,
                          pool_rng);
        out.pool.tags[row - 1] = Provenance::Ood;
    }

    // shuffle rows, then assign position-based ids
    std::vector<std::size_t> perm(pool_total);
    for (std::size_t i = 0; i < pool_total; ++i) perm[i] = i;
    Rng shuffle_rng(mix_seed(seed, 0x14));
    shuffle_rng.shuffle(perm);
    Matrix shuffled(pool_total, spec.dim);
    std::vector<Provenance> tags(pool_total);
    for (std::size_t i = 0; i < pool_total; ++i) {
        auto src = out.pool.x.row(perm[i]);
        std::copy(src.begin(), src.end(), shuffled.row(i).begin());
        tags[i] = out.pool.tags[perm[i]];
    }
    out.pool.x = std::move(shuffled);
    out.pool.tags = std::move(tags);
    out.pool.ids.resize(pool_total);
    char buf[32];
    for (std::size_t i = 0; i < pool_total; ++i) {
        std::snprintf(buf, sizeof buf, "p%06zu", i);
        out.pool.ids[i] = buf;
    }
    return out;
}

SynthSpec default_benchmark_spec() {
    SynthSpec spec;
    spec.dim = 8;
    const double sep = 5.0;
    auto axis_mean = [&](std::size_t axis, double value) {
        std::vector<double> m(spec.dim, 0.0);
        m[axis] = value;
        return m;
    };
    for (std::size_t c = 0; c < 4; ++c)
        spec.clusters.push_back({axis_mean(c, sep), 1.0, static_cast<int>(c)});
    // the last class also owns an antipodal blob and is rare in the pool:
    // samplers that miss its few rows cannot pin the detached region, so
    // selection quality on it is what separates them
    spec.clusters.push_back({axis_mean(3, -sep), 1.0, 3});

    // out-of-distribution mass sits equidistant from every class mean, where
    // the teacher cannot commit to a label
    std::vector<double> centroid(spec.dim, 0.0);
    for (std::size_t c = 0; c < 4; ++c) centroid[c] = 0.25 * sep;
    spec.clusters.push_back({centroid, 1.0, -1});
    spec.clusters.push_back({std::vector<double>(spec.dim, 0.0), 1.0, -1});

    spec.train_per_class = 250;
    spec.test_per_class = 250;
    spec.pool_per_class = {885, 885, 886, 24};
    spec.pool_ood_total = 1320;
    return spec;
}

double accuracy(const Mlp& model, const LabeledDataset& data) {
    if (data.size() == 0) throw ContractViolation("accuracy: empty dataset");
    const Matrix logits = mlp_forward(model, data.x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
            if (row[j] > row[arg]) arg = j;
        hits += static_cast<int>(arg) == data.labels[i];
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace odsd::nets
