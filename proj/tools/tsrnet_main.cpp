// Command-line entry point: synth, preprocess, train, score, eval, ablate.
// Exit codes: 0 success, 1 runtime failure, 2 config error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsrnet/tsrnet.hpp"

namespace fs = std::filesystem;
using namespace tsrnet;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string checkpoint;
};

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = args.config_path.empty() ? parse_config_text("")
                                             : parse_config(args.config_path);
    for (const auto& o : args.overrides) apply_override(cfg, o);
    return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
    fs::path dir = cfg.output_dir();
    fs::create_directories(dir);
    return dir;
}

// Every run directory records the exact configuration it was produced from.
void write_provenance(const fs::path& dir, const RunConfig& cfg) {
    std::ofstream cf(dir / "effective_config.json");
    cf << cfg.tree.dump(2) << "\n";
    std::ofstream fp(dir / "config_fingerprint.txt");
    fp << cfg.fingerprint() << "\n";
}

void write_meta(const fs::path& path) {
    std::ofstream os(path);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    os << "generated_at\t" << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << "\n";
}

DatasetSplit load_split_for(const RunConfig& cfg) {
    const auto& ds = cfg.tree.at("dataset");
    const std::string kind = ds.at("kind").get<std::string>();
    if (kind == "dir" || !ds.at("dir").get<std::string>().empty()) {
        fs::path dir = ds.at("dir").get<std::string>();
        if (dir.empty()) dir = fs::path(cfg.output_dir()) / "dataset";
        return load_dataset(dir);
    }
    if (kind == "synth") {
        const fs::path dir = fs::path(cfg.output_dir()) / "dataset";
        if (fs::exists(dir / "manifest.json")) return load_dataset(dir);
        return to_split(synth_dataset(cfg.synth(), cfg.seed()));
    }
    if (kind == "ptbxl") {
        const std::string root_str = ds.at("root").get<std::string>();
        fs::path root = root_str;
        if (root_str.empty()) {
            const char* env = std::getenv("TSRNET_PTBXL_ROOT");
            if (!env) throw ConfigError("config: dataset.root (or TSRNET_PTBXL_ROOT) required for ptbxl");
            root = env;
        }
        return load_ptbxl_split(root, cfg.ptbxl_rule());
    }
    throw ConfigError("config: dataset.kind must be synth, ptbxl, or dir");
}

std::vector<PreparedRecord> prepare_all(const std::vector<EcgRecord>& records,
                                        const StftParams& stft) {
    std::vector<PreparedRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(prepare_record(r, stft));
    return out;
}

int cmd_synth(const RunConfig& cfg) {
    const fs::path dir = output_dir(cfg) / "dataset";
    SynthDataset data = synth_dataset(cfg.synth(), cfg.seed());
    save_dataset(dir, to_split(data), cfg.tree.at("dataset").at("synth"));
    write_provenance(output_dir(cfg), cfg);
    std::cout << "wrote " << data.train.size() << " train / " << data.test.size()
              << " test records to " << dir << "\n";
    return 0;
}

int cmd_preprocess(const RunConfig& cfg) {
    RunConfig ptb = cfg;
    ptb.tree["dataset"]["kind"] = "ptbxl";
    PtbxlLoadStats stats;
    const std::string root = ptb.tree.at("dataset").at("root").get<std::string>();
    fs::path root_path = root;
    if (root.empty()) {
        const char* env = std::getenv("TSRNET_PTBXL_ROOT");
        if (!env) throw ConfigError("config: dataset.root (or TSRNET_PTBXL_ROOT) required");
        root_path = env;
    }
    DatasetSplit split = load_ptbxl_split(root_path, cfg.ptbxl_rule(), &stats);
    const fs::path dir = output_dir(cfg) / "dataset";
    save_dataset(dir, split);
    write_provenance(output_dir(cfg), cfg);
    std::cout << "train " << stats.n_train << ", test " << stats.n_test_normal << " normal + "
              << stats.n_test_abnormal << " abnormal, skipped " << stats.n_skipped
              << " (reference counts: 8167 / 912 / 1248)\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    DatasetSplit split = load_split_for(cfg);
    const StftParams stft = cfg.stft();
    std::vector<PreparedRecord> prepared = prepare_all(split.train, stft);
    if (prepared.empty()) throw std::runtime_error("train: empty train split");

    TsrNet net(cfg.network(), dims_of(prepared.front()));
    net.init_params(cfg.seed());
    std::cout << "model parameters: " << net.param_count() << "\n";

    const fs::path out = output_dir(cfg);
    write_provenance(out, cfg);
    TrainResult result = train(net, prepared, cfg.train(), cfg.mask(), cfg.seed(),
                               out / "checkpoints", cfg.model_fingerprint(), std::cout);
    save_loss_history(out / "loss_history.tsv", result);
    std::cout << "final checkpoint: " << (out / "checkpoints" / "final.ckpt") << "\n";
    return 0;
}

ScoreReport run_scoring(const RunConfig& cfg, const std::string& checkpoint_override) {
    DatasetSplit split = load_split_for(cfg);
    if (split.test.empty()) throw std::runtime_error("score: dataset has no test records");
    PreparedRecord probe = prepare_record(split.test.front(), cfg.stft());

    TsrNet net(cfg.network(), dims_of(probe));
    fs::path ckpt = checkpoint_override.empty()
                        ? fs::path(cfg.output_dir()) / "checkpoints" / "final.ckpt"
                        : fs::path(checkpoint_override);
    if (!fs::exists(ckpt))
        throw std::runtime_error("missing checkpoint: " + ckpt.string() +
                                 " (run `tsrnet train` first or pass --checkpoint)");
    load_checkpoint(ckpt, net.params(), cfg.model_fingerprint());
    return score_split(net, split, cfg.stft(), cfg.scoring(), cfg.fingerprint());
}

int cmd_score(const RunConfig& cfg, const std::string& checkpoint_override) {
    ScoreReport report = run_scoring(cfg, checkpoint_override);
    const fs::path out = output_dir(cfg);
    write_provenance(out, cfg);
    save_report(out / "report.tsv", report);
    save_roc_points(out / "roc.tsv", report);
    write_meta(out / "report_meta.txt");
    std::cout << "scored " << report.per_record.size() << " records, AUC = " << report.auc << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& report_path) {
    fs::path path = report_path.empty() ? fs::path(cfg.output_dir()) / "report.tsv"
                                        : fs::path(report_path);
    std::vector<RecordScore> scores = load_report_scores(path);
    ScoreReport report = assemble_report(std::move(scores), cfg.fingerprint());
    std::cout << "records: " << report.per_record.size() << "\n";
    std::cout << "auc: " << report.auc << "\n";
    return 0;
}

int cmd_ablate(const RunConfig& cfg) {
    DatasetSplit split = load_split_for(cfg);
    const StftParams stft = cfg.stft();
    std::vector<PreparedRecord> prepared = prepare_all(split.train, stft);
    if (prepared.empty()) throw std::runtime_error("ablate: empty train split");
    const fs::path out = output_dir(cfg);
    write_provenance(out, cfg);

    struct Row {
        std::string modality;
        bool peak_based;
        double auc;
    };
    std::vector<Row> rows;

    for (const std::string mode : {"time_only", "spec_only", "combined"}) {
        RunConfig run = cfg;
        run.tree["network"]["mode"] = mode;
        TsrNet net(run.network(), dims_of(prepared.front()));
        net.init_params(run.seed());
        std::cout << "[ablate] training " << mode << "\n";
        train(net, prepared, run.train(), run.mask(), run.seed(),
              out / ("checkpoints_" + mode), run.model_fingerprint(), std::cout);
        ScoringConfig sc = run.scoring();
        sc.peak_based = true;
        rows.push_back({mode, true,
                        score_split(net, split, stft, sc, run.fingerprint()).auc});
        if (mode == "combined") {
            sc.peak_based = false;
            rows.push_back({mode, false,
                            score_split(net, split, stft, sc, run.fingerprint()).auc});
        }
    }

    std::ofstream os(out / "ablation.tsv");
    os << "modality\tpeak_based\tauc\n";
    std::cout << "modality\tpeak_based\tauc\n";
    for (const auto& r : rows) {
        os << r.modality << "\t" << (r.peak_based ? "yes" : "no") << "\t" << r.auc << "\n";
        std::cout << r.modality << "\t" << (r.peak_based ? "yes" : "no") << "\t" << r.auc << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TSRNet: restoration-based ECG anomaly detection"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string report_path;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", args.config_path, "JSON run configuration");
        sub->add_option("--set", args.overrides, "dotted-path override, e.g. train.epochs=5");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    CLI::App* preprocess = app.add_subcommand("preprocess", "build the PTB-XL split");
    CLI::App* train_cmd = app.add_subcommand("train", "train the restoration network");
    CLI::App* score = app.add_subcommand("score", "score a test split with a checkpoint");
    CLI::App* eval = app.add_subcommand("eval", "recompute AUC from a score report");
    CLI::App* ablate = app.add_subcommand("ablate", "run modality and peak-error ablations");
    for (CLI::App* sub : {synth, preprocess, train_cmd, score, eval, ablate}) add_common(sub);
    score->add_option("--checkpoint", args.checkpoint, "checkpoint file to score with");
    eval->add_option("--report", report_path, "score report to evaluate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = load_config(args);
        if (synth->parsed()) return cmd_synth(cfg);
        if (preprocess->parsed()) return cmd_preprocess(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (score->parsed()) return cmd_score(cfg, args.checkpoint);
        if (eval->parsed()) return cmd_eval(cfg, report_path);
        if (ablate->parsed()) return cmd_ablate(cfg);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
