#include <catch2/catch_amalgamated.hpp>

#include "tsrnet/config.hpp"

using namespace tsrnet;

TEST_CASE("empty text yields all defaults with a stable fingerprint") {
    RunConfig a = parse_config_text("");
    RunConfig b = parse_config_text("   \n\t ");
    CHECK(a.seed() == 42);
    CHECK(a.stft().n_fft == 64);
    CHECK(a.stft().hop == 8);
    CHECK(a.mask().time_ratio == 0.30);
    CHECK(a.train().epochs == 50);
    CHECK(a.train().base_lr == 1e-4);
    CHECK(a.scoring().peak_based);
    CHECK(a.scoring().window_halfwidth == 15);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK_FALSE(a.fingerprint().empty());
}

TEST_CASE("comments and formatting do not change the fingerprint") {
    RunConfig a = parse_config_text(R"({"train": {"epochs": 5}})");
    RunConfig b = parse_config_text("{\n  // faster run\n  \"train\": {\"epochs\": 5}\n}\n");
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.train().epochs == 5);
    // a different value must change it
    RunConfig c = parse_config_text(R"({"train": {"epochs": 6}})");
    CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("unknown keys are rejected with their dotted path") {
    CHECK_THROWS_WITH(parse_config_text(R"({"trian": {"epochs": 5}})"),
                      Catch::Matchers::ContainsSubstring("trian"));
    CHECK_THROWS_WITH(parse_config_text(R"({"train": {"epoch": 5}})"),
                      Catch::Matchers::ContainsSubstring("train.epoch"));
    CHECK_THROWS_AS(parse_config_text(R"({"mask": {"ratio": 0.5}})"), ConfigError);
}

TEST_CASE("type mismatches are rejected with their dotted path") {
    CHECK_THROWS_WITH(parse_config_text(R"({"train": {"epochs": "ten"}})"),
                      Catch::Matchers::ContainsSubstring("train.epochs"));
    CHECK_THROWS_AS(parse_config_text(R"({"scoring": {"peak_based": 3}})"), ConfigError);
}

TEST_CASE("out-of-range values are rejected") {
    CHECK_THROWS_AS(parse_config_text(R"({"mask": {"time_ratio": 1.5}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"mask": {"stripe_ratio": -0.1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"train": {"epochs": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"train": {"base_lr": 0.0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"stft": {"hop": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"stft": {"n_fft": 4, "hop": 8}})"), ConfigError);
}

TEST_CASE("malformed JSON is a parse error") {
    CHECK_THROWS_AS(parse_config_text("{ not json"), nlohmann::json::exception);
}

TEST_CASE("nested user values override defaults without clobbering siblings") {
    RunConfig cfg = parse_config_text(R"({
        "stft": {"hop": 16},
        "network": {"preset": "tiny", "mode": "time_only"}
    })");
    CHECK(cfg.stft().hop == 16);
    CHECK(cfg.stft().n_fft == 64);   // untouched sibling
    CHECK(cfg.network().mode == ModalityMode::time_only);
    CHECK(cfg.train().epochs == 50);
}

TEST_CASE("dotted overrides work for numbers, bools and strings") {
    RunConfig cfg = parse_config_text("");
    apply_override(cfg, "train.epochs=7");
    apply_override(cfg, "scoring.peak_based=false");
    apply_override(cfg, "dataset.kind=ptbxl");
    apply_override(cfg, "train.base_lr=0.001");
    CHECK(cfg.train().epochs == 7);
    CHECK_FALSE(cfg.scoring().peak_based);
    CHECK(cfg.tree.at("dataset").at("kind") == "ptbxl");
    CHECK(cfg.train().base_lr == 0.001);

    CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "train.bogus=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "mask.time_ratio=2.0"), ConfigError);
}

TEST_CASE("model fingerprint ignores scoring and training changes") {
    RunConfig base = parse_config_text("");
    RunConfig scoring_changed = parse_config_text(R"({"scoring": {"window_halfwidth": 30}})");
    RunConfig train_changed = parse_config_text(R"({"train": {"epochs": 3}})");
    RunConfig net_changed = parse_config_text(R"({"network": {"preset": "tiny"}})");
    RunConfig stft_changed = parse_config_text(R"({"stft": {"n_fft": 32}})");

    CHECK(base.model_fingerprint() == scoring_changed.model_fingerprint());
    CHECK(base.model_fingerprint() == train_changed.model_fingerprint());
    CHECK(base.model_fingerprint() != net_changed.model_fingerprint());
    CHECK(base.model_fingerprint() != stft_changed.model_fingerprint());

    // but the run fingerprint sees everything
    CHECK(base.fingerprint() != scoring_changed.fingerprint());
}

TEST_CASE("network preset selection and knob overrides") {
    RunConfig cfg = parse_config_text(R"({"network": {"preset": "small", "n_heads": 2}})");
    NetworkConfig net = cfg.network();
    CHECK(net.n_heads == 2);
    net.validate();

    CHECK_THROWS_AS(parse_config_text(R"({"network": {"preset": "huge"}})").network(), ConfigError);
}

TEST_CASE("config file round trip through disk") {
    const auto dir = std::filesystem::temp_directory_path() / "tsrnet_config_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "run.json";
    {
        std::ofstream os(path);
        os << R"({"seed": 7, "train": {"batch_size": 4}})";
    }
    RunConfig cfg = parse_config(path);
    CHECK(cfg.seed() == 7);
    CHECK(cfg.train().batch_size == 4);
    CHECK_THROWS_AS(parse_config(dir / "missing.json"), ConfigError);
    std::filesystem::remove_all(dir);
}
