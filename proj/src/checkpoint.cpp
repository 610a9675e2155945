#include "odsd/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "odsd/error.hpp"
#include "odsd/tensor_io.hpp"

namespace odsd::cli {

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

using nlohmann::json;

std::filesystem::path slot(const std::filesystem::path& dir, const char* stem, std::size_t l) {
    return dir / (std::string(stem) + std::to_string(l) + ".odst");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const nets::Mlp& model,
                     const CheckpointMeta& meta, const nets::SgdState* opt) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint dir " + dir.string() + ": " + ec.message());

    json manifest;
    manifest["format"] = "odsd-checkpoint";
    manifest["version"] = 1;
    manifest["role"] = meta.role;
    manifest["layer_sizes"] = model.sizes;
    manifest["init_seed"] = model.init_seed;
    manifest["model_version"] = model.version;
    manifest["epoch"] = meta.epoch;
    manifest["completed"] = meta.completed;
    manifest["config_fingerprint"] = meta.config_fingerprint;
    manifest["has_optimizer"] = opt != nullptr;

    std::ofstream mf(dir / "manifest.json", std::ios::binary);
    if (!mf) throw IoError("cannot write manifest in " + dir.string());
    mf << manifest.dump(2) << '\n';
    if (!mf) throw IoError("failed writing manifest in " + dir.string());

    for (std::size_t l = 0; l < model.layers(); ++l) {
        io::write_matrix(slot(dir, "w", l), model.w[l]);
        io::write_vector(slot(dir, "b", l), model.b[l]);
    }
    if (opt != nullptr) {
        if (opt->vw.size() != model.layers())
            throw ContractViolation("save_checkpoint: optimizer layer count");
        for (std::size_t l = 0; l < model.layers(); ++l) {
            io::write_matrix(slot(dir, "vw", l), opt->vw[l]);
            io::write_vector(slot(dir, "vb", l), opt->vb[l]);
        }
    }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json", std::ios::binary);
    if (!mf) throw IoError("cannot open checkpoint manifest in " + dir.string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad checkpoint manifest: ") + e.what(), 0);
    }
    if (manifest.value("format", "") != "odsd-checkpoint" || manifest.value("version", 0) != 1)
        throw FormatError("not an odsd checkpoint manifest", 0);

    LoadedCheckpoint out;
    out.meta.role = manifest.value("role", "model");
    out.meta.epoch = manifest.value("epoch", std::size_t{0});
    out.meta.completed = manifest.value("completed", true);
    out.meta.config_fingerprint = manifest.value("config_fingerprint", std::uint64_t{0});
    out.has_optimizer = manifest.value("has_optimizer", false);

    const auto sizes = manifest.at("layer_sizes").get<std::vector<std::size_t>>();
    if (sizes.size() < 2) throw FormatError("checkpoint layer_sizes too short", 0);
    out.model.sizes = sizes;
    out.model.init_seed = manifest.value("init_seed", std::uint64_t{0});
    out.model.version = manifest.value("model_version", std::uint64_t{0});

    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Matrix w = io::read_matrix(slot(dir, "w", l));
        if (w.rows() != sizes[l] || w.cols() != sizes[l + 1])
            throw FormatError("checkpoint weight shape mismatch at layer " + std::to_string(l), 0);
        auto b = io::read_vector(slot(dir, "b", l));
        if (b.size() != sizes[l + 1])
            throw FormatError("checkpoint bias shape mismatch at layer " + std::to_string(l), 0);
        out.model.w.push_back(std::move(w));
        out.model.b.push_back(std::move(b));
    }
    if (out.has_optimizer) {
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            Matrix vw = io::read_matrix(slot(dir, "vw", l));
            if (vw.rows() != sizes[l] || vw.cols() != sizes[l + 1])
                throw FormatError("checkpoint velocity shape mismatch", 0);
            out.vw.push_back(std::move(vw));
            out.vb.push_back(io::read_vector(slot(dir, "vb", l)));
        }
    }
    return out;
}

}  // namespace odsd::cli
