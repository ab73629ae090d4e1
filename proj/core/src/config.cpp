#include "fluxfed/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fluxfed/errors.hpp"

namespace fluxfed {

using nlohmann::json;

Mode mode_from_string(const std::string& s) {
    if (s == "fedavg") return Mode::FedAvg;
    if (s == "flux") return Mode::Flux;
    if (s == "flux_prior" || s == "flux-prior") return Mode::FluxPrior;
    throw ConfigError("mode: expected one of fedavg|flux|flux-prior, got \"" + s + "\"");
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::FedAvg: return "fedavg";
        case Mode::Flux: return "flux";
        case Mode::FluxPrior: return "flux_prior";
    }
    return "?";
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.num_clients < 1) throw ConfigError("num_clients: must be >= 1");
    if (cfg.num_classes < 2) throw ConfigError("num_classes: must be >= 2");
    if (cfg.feature_dim < 1) throw ConfigError("feature_dim: must be >= 1");
    if (cfg.samples_per_client < 5)
        throw ConfigError("samples_per_client: must be >= 5 (4/5 train split needs it)");
    if (cfg.blob_spacing <= 0.0) throw ConfigError("blob_spacing: must be > 0");
    if (cfg.latent_dim < 1) throw ConfigError("latent_dim: must be >= 1");
    if (cfg.descriptor_dim < 1) throw ConfigError("descriptor_dim: must be >= 1");
    if (cfg.descriptor_dim > cfg.latent_dim)
        throw ConfigError("descriptor_dim: must be <= latent_dim");
    if (cfg.pca_box_samples < 2) throw ConfigError("pca_box_samples: must be >= 2");
    if (cfg.rounds < 4) throw ConfigError("rounds: must be >= 4");
    if (cfg.train.epochs < 1) throw ConfigError("train.epochs: must be >= 1");
    if (!(cfg.train.learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be > 0");
    if (cfg.train.momentum < 0.0 || cfg.train.momentum >= 1.0)
        throw ConfigError("train.momentum: must be in [0, 1)");
    if (cfg.train.batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
    if (!(cfg.participation_rate > 0.0) || cfg.participation_rate > 1.0)
        throw ConfigError("participation_rate: must be in (0, 1]");
    if (!(cfg.trigger_threshold > 0.0)) throw ConfigError("trigger_threshold: must be > 0");
    if (!(cfg.dbscan_scale > 0.0)) throw ConfigError("dbscan_scale: must be > 0");
    if (cfg.shift.level < 1 || cfg.shift.level > 8)
        throw ConfigError("shift.level: must be in [1, 8]");
    std::size_t m = cfg.shift.num_distributions;
    if (m < 1) throw ConfigError("shift.num_distributions: must be >= 1");
    if (m > cfg.num_clients)
        throw ConfigError("shift.num_distributions: must be <= num_clients");
    if (cfg.shift.type == ShiftType::LabelShift) {
        if (m > 5) throw ConfigError("shift.num_distributions: label_shift supports at most 5");
        if (static_cast<std::size_t>(cfg.shift.level) > cfg.num_classes)
            throw ConfigError("shift.level: label_shift needs level <= num_classes");
    }
    if (cfg.dp_epsilon && !(*cfg.dp_epsilon > 0.0))
        throw ConfigError("dp_epsilon: must be > 0 when present");
}

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& scope) {
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key()))
            throw ConfigError(scope + ": unknown key \"" + item.key() + "\"");
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(key) + ": wrong type");
    }
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what(), e.byte);
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    require_keys(j, {"seed", "num_clients", "num_classes", "feature_dim", "samples_per_client",
                     "blob_spacing", "offset_scale", "latent_dim", "descriptor_dim",
                     "pca_box_samples", "rounds", "train", "participation_rate",
                     "trigger_threshold", "dbscan_scale", "mode", "shift", "dp_epsilon",
                     "test_per_distribution", "descriptor"},
                 "config");

    ExperimentConfig cfg;
    read_into(j, "seed", cfg.seed);
    read_into(j, "num_clients", cfg.num_clients);
    read_into(j, "num_classes", cfg.num_classes);
    read_into(j, "feature_dim", cfg.feature_dim);
    read_into(j, "samples_per_client", cfg.samples_per_client);
    read_into(j, "blob_spacing", cfg.blob_spacing);
    read_into(j, "offset_scale", cfg.offset_scale);
    read_into(j, "latent_dim", cfg.latent_dim);
    read_into(j, "descriptor_dim", cfg.descriptor_dim);
    read_into(j, "pca_box_samples", cfg.pca_box_samples);
    read_into(j, "rounds", cfg.rounds);
    read_into(j, "participation_rate", cfg.participation_rate);
    read_into(j, "trigger_threshold", cfg.trigger_threshold);
    read_into(j, "dbscan_scale", cfg.dbscan_scale);
    read_into(j, "test_per_distribution", cfg.test_per_distribution);

    if (j.contains("train")) {
        const json& t = j.at("train");
        require_keys(t, {"epochs", "learning_rate", "momentum", "batch_size"}, "train");
        read_into(t, "epochs", cfg.train.epochs);
        read_into(t, "learning_rate", cfg.train.learning_rate);
        read_into(t, "momentum", cfg.train.momentum);
        read_into(t, "batch_size", cfg.train.batch_size);
    }
    if (j.contains("mode")) {
        if (!j.at("mode").is_string()) throw ConfigError("mode: wrong type");
        cfg.mode = mode_from_string(j.at("mode").get<std::string>());
    }
    if (j.contains("shift")) {
        const json& s = j.at("shift");
        require_keys(s, {"type", "level", "num_distributions"}, "shift");
        if (s.contains("type")) {
            if (!s.at("type").is_string()) throw ConfigError("shift.type: wrong type");
            try {
                cfg.shift.type = shift_type_from_string(s.at("type").get<std::string>());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("shift.type: ") + e.what());
            }
        }
        read_into(s, "level", cfg.shift.level);
        read_into(s, "num_distributions", cfg.shift.num_distributions);
    }
    if (j.contains("dp_epsilon") && !j.at("dp_epsilon").is_null()) {
        double eps = 0.0;
        read_into(j, "dp_epsilon", eps);
        cfg.dp_epsilon = eps;
    }
    if (j.contains("descriptor")) {
        const json& d = j.at("descriptor");
        require_keys(d, {"include_sigma", "include_class_blocks"}, "descriptor");
        read_into(d, "include_sigma", cfg.descriptor.include_sigma);
        read_into(d, "include_class_blocks", cfg.descriptor.include_class_blocks);
    }
    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return config_from_json_text(buf.str());
    } catch (const ParseError& e) {
        // A config file that does not parse is a configuration problem, not a
        // data problem; callers key exit codes off the distinction.
        throw ConfigError(std::string(e.what()) + " in " + path);
    }
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["num_clients"] = cfg.num_clients;
    j["num_classes"] = cfg.num_classes;
    j["feature_dim"] = cfg.feature_dim;
    j["samples_per_client"] = cfg.samples_per_client;
    j["blob_spacing"] = cfg.blob_spacing;
    j["offset_scale"] = cfg.offset_scale;
    j["latent_dim"] = cfg.latent_dim;
    j["descriptor_dim"] = cfg.descriptor_dim;
    j["pca_box_samples"] = cfg.pca_box_samples;
    j["rounds"] = cfg.rounds;
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"learning_rate", cfg.train.learning_rate},
                  {"momentum", cfg.train.momentum},
                  {"batch_size", cfg.train.batch_size}};
    j["participation_rate"] = cfg.participation_rate;
    j["trigger_threshold"] = cfg.trigger_threshold;
    j["dbscan_scale"] = cfg.dbscan_scale;
    j["mode"] = to_string(cfg.mode);
    j["shift"] = {{"type", to_string(cfg.shift.type)},
                  {"level", cfg.shift.level},
                  {"num_distributions", cfg.shift.num_distributions}};
    if (cfg.dp_epsilon)
        j["dp_epsilon"] = *cfg.dp_epsilon;
    else
        j["dp_epsilon"] = nullptr;
    j["test_per_distribution"] = cfg.test_per_distribution;
    j["descriptor"] = {{"include_sigma", cfg.descriptor.include_sigma},
                       {"include_class_blocks", cfg.descriptor.include_class_blocks}};
    return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    // nlohmann objects iterate key-sorted, so dump() is canonical already.
    std::string canon = json::parse(config_to_json_text(cfg)).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string run_id(const ExperimentConfig& cfg) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    std::ostringstream out;
    out << to_string(cfg.shift.type) << "-L" << cfg.shift.level << "-" << to_string(cfg.mode)
        << "-s" << cfg.seed << "-" << std::string(hex).substr(0, 8);
    return out.str();
}

}  // namespace fluxfed
