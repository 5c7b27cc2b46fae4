#include "rlld/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace rlld {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "rlld-checkpoint";

void put_le(std::vector<char>& out, double value) {
    const auto bits = std::bit_cast<std::uint64_t>(value);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double get_le(const char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
    return std::bit_cast<double>(bits);
}

json describe(const std::vector<std::string>& names, const std::vector<const Matrix*>& tensors,
              std::vector<char>& blob) {
    json list = json::array();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const Matrix& m = *tensors[k];
        list.push_back({{"name", names[k]}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", blob.size()}});
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) put_le(blob, m(r, c));
        }
    }
    return list;
}

void restore(const json& list, const std::vector<std::string>& names, const std::vector<Matrix*>& tensors,
             const std::string& blob, const std::string& where) {
    if (!list.is_array() || list.size() != tensors.size()) {
        throw Error(Error::Kind::shape_mismatch, where + ": tensor count does not match the architecture");
    }
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const json& t = list[k];
        if (t.at("name").get<std::string>() != names[k]) {
            throw Error(Error::Kind::shape_mismatch, where + ": expected tensor '" + names[k] + "'");
        }
        Matrix& m = *tensors[k];
        const auto rows = t.at("rows").get<Eigen::Index>();
        const auto cols = t.at("cols").get<Eigen::Index>();
        if (rows != m.rows() || cols != m.cols()) {
            throw Error(Error::Kind::shape_mismatch, where + ": tensor '" + names[k] + "' has the wrong shape");
        }
        const auto offset = t.at("offset").get<std::size_t>();
        const auto bytes = static_cast<std::size_t>(rows * cols) * 8;
        if (offset + bytes > blob.size()) {
            throw Error(Error::Kind::parse, where + ": tensors.bin is truncated at '" + names[k] + "'");
        }
        const char* p = blob.data() + offset;
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c, p += 8) m(r, c) = get_le(p);
        }
    }
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(Error::Kind::io, "cannot create checkpoint directory " + dir.string());

    const DenoiserConfig& d = ck.denoiser.config;
    const TaskConfig& t = ck.task.config;
    std::vector<char> blob;
    json manifest;
    manifest["format"] = kFormat;
    manifest["version"] = 1;
    manifest["seed"] = ck.seed;
    manifest["config_hash"] = ck.config_hash;
    manifest["epoch"] = ck.epoch;
    manifest["validation_score"] = ck.validation_score;
    manifest["denoiser"] = {
        {"config",
         {{"num_classes", d.num_classes},
          {"audio_dim", d.audio_dim},
          {"visual_dim", d.visual_dim},
          {"project", d.project},
          {"hidden_dim", d.hidden_dim},
          {"share_head", d.share_head},
          {"use_labels", d.use_labels}}},
        {"tensors", describe(ck.denoiser.tensor_names(), ck.denoiser.tensors(), blob)},
    };
    manifest["task"] = {
        {"config",
         {{"num_classes", t.num_classes},
          {"audio_dim", t.audio_dim},
          {"visual_dim", t.visual_dim},
          {"hidden_dim", t.hidden_dim},
          {"two_sided_bce", t.two_sided_bce},
          {"video_loss", t.video_loss},
          {"threshold", t.threshold}}},
        {"tensors", describe(ck.task.tensor_names(), ck.task.tensors(), blob)},
    };
    manifest["bytes"] = blob.size();

    {
        std::ofstream out(dir / "tensors.bin", std::ios::binary);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw Error(Error::Kind::io, "cannot write " + (dir / "tensors.bin").string());
    }
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw Error(Error::Kind::io, "cannot write " + (dir / "manifest.json").string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream min(manifest_path, std::ios::binary);
    if (!min) throw Error(Error::Kind::io, "cannot read checkpoint manifest " + manifest_path.string());
    std::ifstream bin(dir / "tensors.bin", std::ios::binary);
    if (!bin) throw Error(Error::Kind::io, "cannot read " + (dir / "tensors.bin").string());
    std::ostringstream buf;
    buf << bin.rdbuf();
    const std::string blob = buf.str();

    Checkpoint ck;
    try {
        const json m = json::parse(min);
        if (m.at("format").get<std::string>() != kFormat) {
            throw Error(Error::Kind::parse, manifest_path.string() + " is not a checkpoint manifest");
        }
        ck.seed = m.at("seed").get<std::uint64_t>();
        ck.config_hash = m.at("config_hash").get<std::string>();
        ck.epoch = m.at("epoch").get<int>();
        ck.validation_score = m.at("validation_score").get<double>();

        const json& dc = m.at("denoiser").at("config");
        DenoiserConfig d;
        d.num_classes = dc.at("num_classes").get<int>();
        d.audio_dim = dc.at("audio_dim").get<int>();
        d.visual_dim = dc.at("visual_dim").get<int>();
        d.project = dc.at("project").get<bool>();
        d.hidden_dim = dc.at("hidden_dim").get<int>();
        d.share_head = dc.at("share_head").get<bool>();
        d.use_labels = dc.at("use_labels").get<bool>();
        ck.denoiser = init_denoiser(d, 0);
        restore(m.at("denoiser").at("tensors"), ck.denoiser.tensor_names(), ck.denoiser.tensors(), blob,
                "denoiser");

        const json& tc = m.at("task").at("config");
        TaskConfig t;
        t.num_classes = tc.at("num_classes").get<int>();
        t.audio_dim = tc.at("audio_dim").get<int>();
        t.visual_dim = tc.at("visual_dim").get<int>();
        t.hidden_dim = tc.at("hidden_dim").get<int>();
        t.two_sided_bce = tc.at("two_sided_bce").get<bool>();
        t.video_loss = tc.at("video_loss").get<bool>();
        t.threshold = tc.at("threshold").get<double>();
        ck.task = init_task(t, 0);
        restore(m.at("task").at("tensors"), ck.task.tensor_names(), ck.task.tensors(), blob, "task");
    } catch (const json::exception& e) {
        throw Error(Error::Kind::missing_field, manifest_path.string() + ": " + e.what());
    }
    return ck;
}

}  // namespace rlld
