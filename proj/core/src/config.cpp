#include "rlld/config.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace rlld {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json noise_json(const NoiseSpec& n) {
    return {{"spurious_rate", n.spurious_rate}, {"drop_rate", n.drop_rate}, {"seed", n.seed}};
}

json data_json(const SyntheticConfig& c) {
    return {
        {"num_videos", c.num_videos},
        {"segments", c.segments},
        {"num_classes", c.num_classes},
        {"audio_dim", c.audio_dim},
        {"visual_dim", c.visual_dim},
        {"validation_fraction", c.validation_fraction},
        {"test_fraction", c.test_fraction},
        {"max_events_per_video", c.max_events_per_video},
        {"feature_noise", c.feature_noise},
        {"noise", noise_json(c.noise)},
        {"seed", c.seed},
    };
}

json train_json(const TrainConfig& c) {
    return {
        {"denoiser_lr", c.denoiser_lr},
        {"task_lr", c.task_lr},
        {"alpha1", c.alpha1},
        {"alpha2", c.alpha2},
        {"batch_size", c.batch_size},
        {"episode_length", c.episode_length},
        {"max_epochs", c.max_epochs},
        {"episodes_per_epoch", c.episodes_per_epoch},
        {"validation_fraction", c.validation_fraction},
        {"seed", c.seed},
        {"ablation", std::string(to_string(c.ablation))},
        {"label_source", std::string(to_string(c.label_source))},
        {"terminal_scale", c.terminal_scale},
        {"soft_epsilon", c.soft_epsilon},
        {"revised_floor", c.revised_floor},
        {"patience", c.patience},
        {"min_improvement", c.min_improvement},
        {"warm_start_epochs", c.warm_start_epochs},
        {"task_steps_per_policy_step", c.task_steps_per_policy_step},
        {"threshold", c.threshold},
        {"denoiser_project", c.denoiser_project},
        {"denoiser_hidden", c.denoiser_hidden},
        {"denoiser_share_head", c.denoiser_share_head},
        {"task_hidden", c.task_hidden},
        {"two_sided_bce", c.two_sided_bce},
        {"video_loss", c.video_loss},
    };
}

json run_json(const RunConfig& c) { return {{"data", data_json(c.data)}, {"train", train_json(c.train)}}; }

[[noreturn]] void bad_key(const std::string& path) {
    throw Error(Error::Kind::invalid_config, "unknown config key '" + path + "'");
}

template <typename T>
void read_value(const json& j, const std::string& path, T& out) {
    try {
        out = j.get<T>();
    } catch (const json::exception&) {
        throw Error(Error::Kind::invalid_config, "config key '" + path + "' has the wrong type: " + j.dump());
    }
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw Error(Error::Kind::invalid_config, "config section '" + path + "' must be an object");
}

void read_noise(const json& j, NoiseSpec& n) {
    require_object(j, "data.noise");
    for (const auto& [key, value] : j.items()) {
        const std::string path = "data.noise." + key;
        if (key == "spurious_rate") read_value(value, path, n.spurious_rate);
        else if (key == "drop_rate") read_value(value, path, n.drop_rate);
        else if (key == "seed") read_value(value, path, n.seed);
        else bad_key(path);
    }
}

void read_data(const json& j, SyntheticConfig& c) {
    require_object(j, "data");
    for (const auto& [key, value] : j.items()) {
        const std::string path = "data." + key;
        if (key == "num_videos") read_value(value, path, c.num_videos);
        else if (key == "segments") read_value(value, path, c.segments);
        else if (key == "num_classes") read_value(value, path, c.num_classes);
        else if (key == "audio_dim") read_value(value, path, c.audio_dim);
        else if (key == "visual_dim") read_value(value, path, c.visual_dim);
        else if (key == "validation_fraction") read_value(value, path, c.validation_fraction);
        else if (key == "test_fraction") read_value(value, path, c.test_fraction);
        else if (key == "max_events_per_video") read_value(value, path, c.max_events_per_video);
        else if (key == "feature_noise") read_value(value, path, c.feature_noise);
        else if (key == "noise") read_noise(value, c.noise);
        else if (key == "seed") read_value(value, path, c.seed);
        else bad_key(path);
    }
}

void read_train(const json& j, TrainConfig& c) {
    require_object(j, "train");
    for (const auto& [key, value] : j.items()) {
        const std::string path = "train." + key;
        if (key == "denoiser_lr") read_value(value, path, c.denoiser_lr);
        else if (key == "task_lr") read_value(value, path, c.task_lr);
        else if (key == "alpha1") read_value(value, path, c.alpha1);
        else if (key == "alpha2") read_value(value, path, c.alpha2);
        else if (key == "batch_size") read_value(value, path, c.batch_size);
        else if (key == "episode_length") read_value(value, path, c.episode_length);
        else if (key == "max_epochs") read_value(value, path, c.max_epochs);
        else if (key == "episodes_per_epoch") read_value(value, path, c.episodes_per_epoch);
        else if (key == "validation_fraction") read_value(value, path, c.validation_fraction);
        else if (key == "seed") read_value(value, path, c.seed);
        else if (key == "ablation") {
            std::string name;
            read_value(value, path, name);
            c.ablation = parse_ablation(name);
        } else if (key == "label_source") {
            std::string name;
            read_value(value, path, name);
            c.label_source = parse_label_source(name);
        } else if (key == "terminal_scale") read_value(value, path, c.terminal_scale);
        else if (key == "soft_epsilon") read_value(value, path, c.soft_epsilon);
        else if (key == "revised_floor") read_value(value, path, c.revised_floor);
        else if (key == "patience") read_value(value, path, c.patience);
        else if (key == "min_improvement") read_value(value, path, c.min_improvement);
        else if (key == "warm_start_epochs") read_value(value, path, c.warm_start_epochs);
        else if (key == "task_steps_per_policy_step") read_value(value, path, c.task_steps_per_policy_step);
        else if (key == "threshold") read_value(value, path, c.threshold);
        else if (key == "denoiser_project") read_value(value, path, c.denoiser_project);
        else if (key == "denoiser_hidden") read_value(value, path, c.denoiser_hidden);
        else if (key == "denoiser_share_head") read_value(value, path, c.denoiser_share_head);
        else if (key == "task_hidden") read_value(value, path, c.task_hidden);
        else if (key == "two_sided_bce") read_value(value, path, c.two_sided_bce);
        else if (key == "video_loss") read_value(value, path, c.video_loss);
        else bad_key(path);
    }
}

RunConfig from_json_value(const json& j) {
    require_object(j, "<root>");
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "data") read_data(value, c.data);
        else if (key == "train") read_train(value, c.train);
        else bad_key(key);
    }
    return c;
}

}  // namespace

std::string to_json(const RunConfig& config) { return run_json(config).dump(2); }

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Error::Kind::invalid_config, std::string("config is not valid JSON: ") + e.what());
    }
    return from_json_value(j);
}

RunConfig load_run_config(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Error::Kind::io, "cannot read config file " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_config_from_json(buf.str());
}

void save_run_config(const RunConfig& config, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    out << to_json(config) << '\n';
    if (!out) throw Error(Error::Kind::io, "cannot write config file " + file.string());
}

void apply_override(RunConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw Error(Error::Kind::invalid_config,
                    "override '" + std::string(assignment) + "' must have the form section.key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));

    json root = run_json(config);
    json* node = &root;
    std::size_t begin = 0;
    while (true) {
        const auto dot = key.find('.', begin);
        const std::string part = key.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
        if (!node->is_object() || !node->contains(part)) bad_key(key);
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        begin = dot + 1;
    }
    if (node->is_object()) {
        throw Error(Error::Kind::invalid_config, "override '" + key + "' names a section, not a value");
    }
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    *node = value;
    config = from_json_value(root);
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments) {
    for (const std::string& a : assignments) apply_override(config, a);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::uint64_t config_hash(const RunConfig& config) { return fnv1a64(to_json(config)); }

}  // namespace rlld
