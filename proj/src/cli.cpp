// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmssl/synth.hpp"
#include "mmssl/trainer.hpp"

namespace mmssl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw MissingFileError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": invalid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os << text;
}

// Accepts either the manifest file or the directory holding manifest.json.
fs::path manifest_path(const fs::path& data) {
    return fs::is_directory(data) ? data / "manifest.json" : data;
}

struct SynthArgs {
    std::string config;
    std::string out;
};

struct PretrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::string log;
};

struct EvaluateArgs {
    std::string ckpt;
    std::string data;
    std::string mode;
    std::string out;
    std::string config;
    std::string fusion;
    double label_fraction = 0.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

struct ReportArgs {
    std::string in;
    std::string confusion_csv;
    std::string per_class_csv;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    SynthConfig cfg;
    try {
        cfg = read_json_file(a.config).get<SynthConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    const SynthResult result = synth_generate(cfg);
    const fs::path manifest = write_dataset(result.dataset, a.out);
    out << "wrote " << manifest.string() << '\n';
    return kExitOk;
}

int cmd_pretrain(const PretrainArgs& a, std::ostream& out) {
    PretrainConfig cfg;
    from_json(read_json_file(a.config), cfg);
    const Dataset dataset = load_dataset(manifest_path(a.data));
    const PretrainResult result = pretrain(cfg, dataset);
    const fs::path ckpt(a.out);
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    save_checkpoint(result.checkpoint, ckpt);
    const fs::path log = a.log.empty() ? fs::path(a.out + ".log.csv") : fs::path(a.log);
    write_text(log, log_csv(result.log));
    out << "wrote " << ckpt.string() << " and " << log.string() << '\n';
    return kExitOk;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    DownstreamConfig cfg;
    if (!a.config.empty()) from_json(read_json_file(a.config), cfg);
    if (a.mode == "linear") {
        cfg.mode = DownstreamMode::linear_eval;
    } else if (a.mode == "finetune") {
        cfg.mode = DownstreamMode::finetune;
    } else {
        cfg.mode = DownstreamMode::supervised_scratch;
    }
    if (!a.fusion.empty()) {
        const auto f = parse_fusion(a.fusion);
        if (!f) throw ConfigError("unknown fusion '" + a.fusion + "'");
        cfg.fusion = *f;
    }
    if (a.label_fraction > 0.0) cfg.label_fraction = a.label_fraction;
    if (a.seed_set) cfg.seed = a.seed;

    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const Dataset dataset = load_dataset(manifest_path(a.data));
    // The task type follows the data unless a config pins it.
    if (a.config.empty()) cfg.task_type = dataset.info.task_type;
    const DownstreamResult result = attach_probe_and_train(ckpt, dataset, cfg);

    json doc = report_to_json(result.report);
    json downstream;
    to_json(downstream, cfg);
    doc["downstream"] = downstream;
    doc["method"] = std::string(to_string(ckpt.method));
    write_text(a.out, doc.dump(2) + "\n");
    out << "weighted_accuracy " << result.report.weighted_accuracy << '\n';
    return kExitOk;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
    const MetricsReport report = report_from_json(read_json_file(a.in));
    write_text(a.confusion_csv, confusion_csv(report));
    const fs::path per_class = a.per_class_csv.empty()
                                   ? fs::path(a.confusion_csv).replace_extension(".per_class.csv")
                                   : fs::path(a.per_class_csv);
    write_text(per_class, per_class_csv(report));
    out << "wrote " << a.confusion_csv << " and " << per_class.string() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-modal self-supervised pretraining and evaluation"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multi-modal dataset");
    synth_cmd->add_option("--config", synth.config, "Synthetic data config (JSON)")->required();
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();

    PretrainArgs pre;
    auto* pre_cmd = app.add_subcommand("pretrain", "Self-supervised pretraining");
    pre_cmd->add_option("--config", pre.config, "Pretraining config (JSON)")->required();
    pre_cmd->add_option("--data", pre.data, "Manifest file or dataset directory")->required();
    pre_cmd->add_option("--out", pre.out, "Checkpoint path")->required();
    pre_cmd->add_option("--log", pre.log, "Loss log CSV (default: <out>.log.csv)");

    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "Train a classifier on pretrained heads and report test metrics");
    ev_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint path")->required();
    ev_cmd->add_option("--data", ev.data, "Manifest file or dataset directory")->required();
    ev_cmd->add_option("--mode", ev.mode, "linear, finetune or scratch")
        ->required()
        ->check(CLI::IsMember({"linear", "finetune", "scratch"}));
    ev_cmd->add_option("--out", ev.out, "Report path (JSON)")->required();
    ev_cmd->add_option("--config", ev.config, "Downstream config (JSON)");
    ev_cmd->add_option("--fusion", ev.fusion, "concat, mean or vision_only");
    ev_cmd->add_option("--label-fraction", ev.label_fraction, "Fraction of training labels used");
    auto* seed_opt = ev_cmd->add_option("--seed", ev.seed, "Downstream seed");

    ReportArgs rep;
    auto* rep_cmd = app.add_subcommand("report", "Export a report's confusion matrix and per-class table as CSV");
    rep_cmd->add_option("--in", rep.in, "Report path (JSON)")->required();
    rep_cmd->add_option("--confusion-csv", rep.confusion_csv, "Confusion matrix CSV path")->required();
    rep_cmd->add_option("--per-class-csv", rep.per_class_csv, "Per-class CSV (default: next to the confusion CSV)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    ev.seed_set = seed_opt->count() > 0;

    try {
        if (*synth_cmd) return cmd_synth(synth, out);
        if (*pre_cmd) return cmd_pretrain(pre, out);
        if (*ev_cmd) return cmd_evaluate(ev, out);
        return cmd_report(rep, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace mmssl
