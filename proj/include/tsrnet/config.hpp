#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsrnet/masking.hpp"
#include "tsrnet/network.hpp"
#include "tsrnet/peaks.hpp"
#include "tsrnet/ptbxl.hpp"
#include "tsrnet/stft.hpp"
#include "tsrnet/synth.hpp"

namespace tsrnet {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double base_lr = 1e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int checkpoint_interval = 10;
    int workers = 1;   // preprocessing parallelism; 1 = strict single-threaded
};

struct ScoringConfig {
    bool peak_based = true;
    int window_halfwidth = 15;
    int detection_lead = 1;     // lead II when present
    PeakDetectorParams detector;
};

// Fully-defaulted run configuration. The JSON tree is both the source of the
// typed views below and the input to the fingerprint.
struct RunConfig {
    nlohmann::json tree;

    static nlohmann::json default_tree() {
        using nlohmann::json;
        json j;
        j["seed"] = 42;
        j["output_dir"] = "runs/default";
        j["dataset"] = {
            {"kind", "synth"},           // synth | ptbxl | dir
            {"root", ""},                // ptbxl tree root
            {"dir", ""},                 // pre-serialized dataset directory
            {"strict_norm", true},
            {"train_fold_max", 8},
            {"synth",
             {{"n_normal_train", 500},
              {"n_normal_test", 100},
              {"n_abnormal_test", 100},
              {"duration_s", 10.0},
              {"sampling_rate_hz", 100.0},
              {"heart_rate_bpm_min", 55.0},
              {"heart_rate_bpm_max", 85.0},
              {"num_leads", 12},
              {"noise_mv", 0.02},
              {"anomaly_kinds", json::array({"amplitude_spike", "widened_qrs"})}}}};
        j["stft"] = {{"n_fft", 64}, {"hop", 8}, {"window", "hann"}};
        j["mask"] = {{"time_ratio", 0.30}, {"stripe_ratio", 0.20}, {"stripe_block", 1}};
        j["network"] = {{"preset", "default"},   // default | small | tiny
                        {"mode", "combined"},
                        {"sigma_clamp", 10.0},
                        {"d_model", 0},          // 0 = preset value
                        {"n_heads", 0}};
        j["train"] = {{"epochs", 50},
                      {"batch_size", 32},
                      {"base_lr", 1e-4},
                      {"weight_decay", 1e-5},
                      {"beta1", 0.9},
                      {"beta2", 0.999},
                      {"eps", 1e-8},
                      {"checkpoint_interval", 10},
                      {"workers", 1}};
        j["scoring"] = {{"peak_based", true},
                        {"window_halfwidth", 15},
                        {"detection_lead", 1},
                        {"detector",
                         {{"refractory_s", 0.2},
                          {"integration_window_s", 0.15},
                          {"threshold_factor", 0.35},
                          {"search_halfwidth_s", 0.08}}}};
        return j;
    }

    std::uint64_t seed() const { return tree.at("seed").get<std::uint64_t>(); }
    std::string output_dir() const { return tree.at("output_dir").get<std::string>(); }

    StftParams stft() const {
        StftParams p;
        const auto& s = tree.at("stft");
        p.n_fft = s.at("n_fft").get<int>();
        p.hop = s.at("hop").get<int>();
        const std::string w = s.at("window").get<std::string>();
        if (w == "hann") p.window = WindowKind::hann;
        else if (w == "rect") p.window = WindowKind::rect;
        else throw ConfigError("stft.window: unknown window '" + w + "'");
        return p;
    }

    MaskRatios mask() const {
        MaskRatios m;
        const auto& s = tree.at("mask");
        m.time_ratio = s.at("time_ratio").get<double>();
        m.stripe_ratio = s.at("stripe_ratio").get<double>();
        m.stripe_block = s.at("stripe_block").get<int>();
        return m;
    }

    NetworkConfig network() const {
        const auto& s = tree.at("network");
        const std::string preset = s.at("preset").get<std::string>();
        NetworkConfig c;
        if (preset == "default") c = NetworkConfig::defaults();
        else if (preset == "small") c = NetworkConfig::small();
        else if (preset == "tiny") c = NetworkConfig::tiny();
        else throw ConfigError("network.preset: unknown preset '" + preset + "'");
        c.mode = modality_from_name(s.at("mode").get<std::string>());
        c.sigma_clamp = s.at("sigma_clamp").get<double>();
        if (s.at("d_model").get<int>() > 0) c.d_model = s.at("d_model").get<int>();
        if (s.at("n_heads").get<int>() > 0) c.n_heads = s.at("n_heads").get<int>();
        return c;
    }

    TrainConfig train() const {
        TrainConfig t;
        const auto& s = tree.at("train");
        t.epochs = s.at("epochs").get<int>();
        t.batch_size = s.at("batch_size").get<int>();
        t.base_lr = s.at("base_lr").get<double>();
        t.weight_decay = s.at("weight_decay").get<double>();
        t.beta1 = s.at("beta1").get<double>();
        t.beta2 = s.at("beta2").get<double>();
        t.eps = s.at("eps").get<double>();
        t.checkpoint_interval = s.at("checkpoint_interval").get<int>();
        t.workers = s.at("workers").get<int>();
        return t;
    }

    ScoringConfig scoring() const {
        ScoringConfig sc;
        const auto& s = tree.at("scoring");
        sc.peak_based = s.at("peak_based").get<bool>();
        sc.window_halfwidth = s.at("window_halfwidth").get<int>();
        sc.detection_lead = s.at("detection_lead").get<int>();
        const auto& d = s.at("detector");
        sc.detector.refractory_s = d.at("refractory_s").get<double>();
        sc.detector.integration_window_s = d.at("integration_window_s").get<double>();
        sc.detector.threshold_factor = d.at("threshold_factor").get<double>();
        sc.detector.search_halfwidth_s = d.at("search_halfwidth_s").get<double>();
        return sc;
    }

    SynthSpec synth() const {
        SynthSpec sp;
        const auto& s = tree.at("dataset").at("synth");
        sp.n_normal_train = s.at("n_normal_train").get<int>();
        sp.n_normal_test = s.at("n_normal_test").get<int>();
        sp.n_abnormal_test = s.at("n_abnormal_test").get<int>();
        sp.duration_s = s.at("duration_s").get<double>();
        sp.sampling_rate_hz = s.at("sampling_rate_hz").get<double>();
        sp.heart_rate_bpm_min = s.at("heart_rate_bpm_min").get<double>();
        sp.heart_rate_bpm_max = s.at("heart_rate_bpm_max").get<double>();
        sp.num_leads = s.at("num_leads").get<int>();
        sp.noise_mv = s.at("noise_mv").get<double>();
        sp.anomaly_kinds.clear();
        for (const auto& k : s.at("anomaly_kinds"))
            sp.anomaly_kinds.push_back(anomaly_from_name(k.get<std::string>()));
        return sp;
    }

    PtbxlRule ptbxl_rule() const {
        PtbxlRule r;
        r.strict_norm = tree.at("dataset").at("strict_norm").get<bool>();
        r.train_fold_max = tree.at("dataset").at("train_fold_max").get<int>();
        return r;
    }

    // Stable across formatting/comment differences: FNV-1a over the sorted
    // normalized dump of the effective tree.
    std::string fingerprint() const { return hash_dump(tree.dump()); }

    // Checkpoint compatibility only depends on the model-defining sections.
    std::string model_fingerprint() const {
        nlohmann::json subset;
        subset["network"] = tree.at("network");
        subset["stft"] = tree.at("stft");
        return hash_dump(subset.dump());
    }

private:
    static std::string hash_dump(const std::string& dump) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : dump) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        std::ostringstream os;
        os << std::hex << h;
        return os.str();
    }
};

namespace config_detail {

inline void merge_validate(nlohmann::json& base, const nlohmann::json& user,
                           const std::string& path) {
    if (!user.is_object())
        throw ConfigError("config: expected an object at '" + (path.empty() ? "<root>" : path) + "'");
    for (const auto& [key, value] : user.items()) {
        const std::string full = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) throw ConfigError("config: unknown key '" + full + "'");
        nlohmann::json& slot = base[key];
        if (slot.is_object()) {
            merge_validate(slot, value, full);
        } else {
            const bool num_ok = slot.is_number() && value.is_number();
            if (!num_ok && slot.type() != value.type())
                throw ConfigError("config: type error at '" + full + "': expected " +
                                  std::string(slot.type_name()) + ", got " +
                                  std::string(value.type_name()));
            slot = value;
        }
    }
}

inline void range_check(const RunConfig& cfg) {
    const auto& m = cfg.tree.at("mask");
    const double tr = m.at("time_ratio").get<double>();
    if (tr < 0.0 || tr > 1.0) throw ConfigError("config: mask.time_ratio must be in [0,1]");
    const double sr = m.at("stripe_ratio").get<double>();
    if (sr < 0.0 || sr > 1.0) throw ConfigError("config: mask.stripe_ratio must be in [0,1]");
    if (m.at("stripe_block").get<int>() < 1)
        throw ConfigError("config: mask.stripe_block must be >= 1");
    const auto& t = cfg.tree.at("train");
    if (t.at("epochs").get<int>() < 1) throw ConfigError("config: train.epochs must be >= 1");
    if (t.at("batch_size").get<int>() < 1) throw ConfigError("config: train.batch_size must be >= 1");
    if (t.at("base_lr").get<double>() <= 0.0) throw ConfigError("config: train.base_lr must be positive");
    if (t.at("workers").get<int>() < 1) throw ConfigError("config: train.workers must be >= 1");
    const auto& s = cfg.tree.at("stft");
    if (s.at("hop").get<int>() <= 0) throw ConfigError("config: stft.hop must be positive");
    if (s.at("n_fft").get<int>() < s.at("hop").get<int>())
        throw ConfigError("config: stft.n_fft must be >= stft.hop");
    if (cfg.tree.at("scoring").at("window_halfwidth").get<int>() < 0)
        throw ConfigError("config: scoring.window_halfwidth must be >= 0");
}

} // namespace config_detail

// Empty file -> all defaults. Unknown keys and type mismatches are rejected
// with the offending key path. '//' comments are allowed.
inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    cfg.tree = RunConfig::default_tree();
    std::string trimmed = text;
    if (trimmed.find_first_not_of(" \t\r\n") != std::string::npos) {
        nlohmann::json user =
            nlohmann::json::parse(trimmed, nullptr, true, /*ignore_comments=*/true);
        config_detail::merge_validate(cfg.tree, user, "");
    }
    config_detail::range_check(cfg);
    return cfg;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

// Dotted-path override, e.g. "train.epochs=10". Values parse as JSON when
// possible, else as strings.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("config: override '" + assignment + "' is not key=value");
    const std::string key_path = assignment.substr(0, eq);
    const std::string value_str = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(value_str);
    } catch (...) {
        value = value_str;
    }

    nlohmann::json override_tree;
    nlohmann::json* node = &override_tree;
    std::istringstream ss(key_path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("config: empty override key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
    config_detail::merge_validate(cfg.tree, override_tree, "");
    config_detail::range_check(cfg);
}

} // namespace tsrnet
