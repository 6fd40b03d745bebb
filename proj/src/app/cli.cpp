#include "bioseq/app/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fftw3.h>
#include <fmt/format.h>

#include "bioseq/bench/bench.hpp"
#include "bioseq/downstream/finetune.hpp"
#include "bioseq/num/checkpoint.hpp"
#include "bioseq/pretrain/train.hpp"

extern char** environ;

namespace bioseq::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p, std::ios::binary);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string compiler_string() {
#if defined(__clang__)
    return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
    return std::string("gcc ") + __VERSION__;
#else
    return "unknown";
#endif
}

// Required inputs must be set and exist; optional ones only checked when set.
void require_inputs(const std::vector<std::pair<InputFile, bool>>& items) {
    std::vector<ConfigError> errs;
    for (const auto& [in, required] : items) {
        if (in.path.empty()) {
            if (required) errs.push_back({in.field, "required path is not set"});
        } else if (!fs::exists(in.path)) {
            errs.push_back({in.field, "file not found: " + in.path.string()});
        }
    }
    if (!errs.empty()) throw ConfigErrors(std::move(errs));
}

struct CommandResult {
    json summary;
    std::vector<InputFile> inputs;
};

CommandResult cmd_synth(const RunConfig& cfg) {
    const SynthManifests m = synth_corpus(cfg.out_dir, cfg.synth);
    CommandResult r;
    r.summary["manifests"] = {{"pretrain", m.pretrain.string()},
                              {"classification",
                               {{"train", m.classification_train.string()},
                                {"valid", m.classification_valid.string()},
                                {"test", m.classification_test.string()}}},
                              {"detection",
                               {{"train", m.detection_train.string()},
                                {"valid", m.detection_valid.string()},
                                {"test", m.detection_test.string()},
                                {"events", m.detection_events.string()}}}};
    return r;
}

CommandResult cmd_pretrain(const RunConfig& cfg, std::ostream& err, bool verbose) {
    CommandResult r;
    r.inputs = {{"pretrain.manifest", cfg.pretrain_manifest}};
    require_inputs({{r.inputs[0], true}});
    const auto corpus = pseudolabel::load_corpus(cfg.pretrain_manifest);
    auto on_step = [&](const std::string& phase, const pretrain::StepRecord& s) {
        if (verbose)
            err << json{{"progress", phase}, {"step", s.step}, {"loss", s.loss}, {"masked_accuracy", s.masked_accuracy}}
                       .dump()
                << "\n";
    };
    const auto res = pretrain::run_two_phase(corpus, cfg.pretrain, cfg.out_dir, on_step);
    r.summary["phase1_final_masked_accuracy"] = res.phase1.final_masked_accuracy;
    r.summary["phase2_final_masked_accuracy"] = res.phase2.final_masked_accuracy;
    r.summary["artifacts"] = {{"phase1_checkpoint", res.phase1_checkpoint.string()},
                              {"phase2_checkpoint", res.phase2_checkpoint.string()},
                              {"phase1_codebook", res.phase1_codebook.string()},
                              {"phase2_codebook", res.phase2_codebook.string()},
                              {"report", res.report_path.string()}};
    return r;
}

CommandResult cmd_finetune(const RunConfig& cfg) {
    CommandResult r;
    const InputFile ck{"finetune.checkpoint", cfg.finetune_checkpoint};
    const InputFile tr{"finetune.train", cfg.finetune_train};
    const InputFile va{"finetune.valid", cfg.finetune_valid};
    const InputFile te{"finetune.test", cfg.finetune_test};
    require_inputs({{ck, true}, {tr, true}, {va, true}, {te, false}});
    r.inputs = {ck, tr, va};
    if (!te.path.empty()) r.inputs.push_back(te);

    const num::Checkpoint pretrained = num::Checkpoint::load(ck.path);
    const auto train = downstream::load_labeled_clips(tr.path);
    const auto valid = downstream::load_labeled_clips(va.path);
    auto res = downstream::lr_sweep(pretrained, train, valid, cfg.task, cfg.sweep);

    fs::create_directories(cfg.out_dir);
    const fs::path model_path = fs::path(cfg.out_dir) / "finetuned.bmck";
    num::Checkpoint out;
    res.model.save(out);
    out.save(model_path);

    json report = {{"task", downstream::to_json(cfg.task)},
                   {"sweep", downstream::to_json(cfg.sweep)},
                   {"validation", res.report.to_json()}};
    if (!te.path.empty()) {
        const auto test = downstream::load_labeled_clips(te.path);
        const auto ev = downstream::evaluate(res.model, test);
        report["test"] = ev.to_json();
        r.summary["test_" + ev.metric] = ev.value;
    }
    const fs::path report_path = fs::path(cfg.out_dir) / "finetune_report.json";
    write_json(report_path, report);
    r.summary["chosen_lr"] = res.report.chosen_lr ? json(*res.report.chosen_lr) : json();
    r.summary["valid_" + res.report.metric] = res.report.value;
    r.summary["artifacts"] = {{"model", model_path.string()}, {"report", report_path.string()}};
    return r;
}

CommandResult cmd_eval(const RunConfig& cfg) {
    CommandResult r;
    r.inputs = {{"eval.model", cfg.eval_model}, {"eval.manifest", cfg.eval_manifest}};
    require_inputs({{r.inputs[0], true}, {r.inputs[1], true}});
    const auto model = downstream::FinetunedModel::load(num::Checkpoint::load(cfg.eval_model));
    const auto clips = downstream::load_labeled_clips(cfg.eval_manifest);
    const auto ev = downstream::evaluate(model, clips);
    fs::create_directories(cfg.out_dir);
    const fs::path report_path = fs::path(cfg.out_dir) / "eval_report.json";
    write_json(report_path, {{"task", downstream::to_json(model.task())}, {"clips", clips.size()}, {"result", ev.to_json()}});
    r.summary[ev.metric] = ev.value;
    r.summary["artifacts"] = {{"report", report_path.string()}};
    return r;
}

CommandResult cmd_bench(const RunConfig& cfg, std::ostream& err) {
    CommandResult r;
    const auto res = bench::run_bench(cfg.bench, [&](const std::string& w) { err << json{{"warning", w}}.dump() << "\n"; });
    const auto art = bench::write_artifacts(cfg.bench, res, cfg.out_dir);
    const auto s = bench::summarize(res);
    if (res.mamba.records.size() >= 5) r.summary["mamba_exponent"] = s.mamba_exponent;
    if (res.attention.records.size() >= 5) r.summary["attention_exponent"] = s.attention_exponent;
    r.summary["rows"] = res.mamba.records.size() + res.attention.records.size();
    r.summary["artifacts"] = {{"csv", art.csv.string()},
                              {"svg", art.svg.string()},
                              {"report_json", art.report_json.string()},
                              {"report_md", art.report_md.string()}};
    return r;
}

void emit_error(std::ostream& err, const std::string& command, int code, const std::vector<ConfigError>& errors) {
    json list = json::array();
    for (const auto& e : errors) list.push_back({{"field", e.field.empty() ? json() : json(e.field)}, {"message", e.message}});
    err << json{{"status", "error"}, {"command", command}, {"exit_code", code}, {"errors", list}}.dump() << "\n";
}

struct Options {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    std::string preset;
    bool verbose = false;
    // shorthands
    std::string manifest, checkpoint, train, valid, test, model;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    std::string provenance;
};

void add_common(CLI::App* sub, Options& o, bool with_config = true) {
    if (with_config) sub->add_option("-c,--config", o.config, "JSON config file");
    sub->add_option("--set", o.sets, "Override a config key: a.b.c=value (repeatable)");
    sub->add_option("-o,--out", o.out, "Output directory (out_dir)");
    sub->add_flag("-v,--verbose", o.verbose, "Progress lines on stderr");
}

// Shorthand flags become --set entries in front of the explicit ones.
std::vector<std::string> flag_sets(const std::string& command, const Options& o) {
    std::vector<std::string> s;
    auto str = [](const std::string& v) { return json(v).dump(); };
    if (!o.preset.empty()) s.push_back("preset=" + str(o.preset));
    if (!o.out.empty()) s.push_back("out_dir=" + str(o.out));
    if (command == "synth-corpus") {
        if (o.n) s.push_back("synth.n_utterances=" + std::to_string(*o.n));
        if (o.seed) s.push_back("synth.seed=" + std::to_string(*o.seed));
    } else if (o.seed) {
        s.push_back("seed=" + std::to_string(*o.seed));
    }
    if (!o.manifest.empty())
        s.push_back((command == "eval" ? "eval.manifest=" : "pretrain.manifest=") + str(o.manifest));
    if (!o.checkpoint.empty()) s.push_back("finetune.checkpoint=" + str(o.checkpoint));
    if (!o.train.empty()) s.push_back("finetune.train=" + str(o.train));
    if (!o.valid.empty()) s.push_back("finetune.valid=" + str(o.valid));
    if (!o.test.empty()) s.push_back("finetune.test=" + str(o.test));
    if (!o.model.empty()) s.push_back("eval.model=" + str(o.model));
    s.insert(s.end(), o.sets.begin(), o.sets.end());
    return s;
}

}  // namespace

Environment process_environment() {
    Environment env;
    for (char** e = environ; e && *e; ++e) {
        const std::string kv = *e;
        const auto eq = kv.find('=');
        if (eq != std::string::npos) env.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return env;
}

json provenance_json(const std::string& command, const RunConfig& cfg, const std::vector<InputFile>& inputs) {
    const json config = to_json(cfg);
    json in = json::array();
    for (const auto& f : inputs)
        in.push_back({{"field", f.field}, {"path", f.path.string()}, {"fnv1a64", hex64(fnv1a64(slurp(f.path)))}});
    return {{"command", command},
            {"config", config},
            {"config_hash", hex64(fnv1a64(config.dump()))},
            {"seed", cfg.seed},
            {"inputs", in},
            {"versions",
             {{"bioseq", BIOSEQ_VERSION},
              {"compiler", compiler_string()},
              {"cxx_standard", static_cast<long>(__cplusplus)},
              {"fftw", std::string(fftw_version)},
              {"fmt", FMT_VERSION},
              {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                            NLOHMANN_JSON_VERSION_PATCH)}}}};
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env) {
    CLI::App app{"Selective state-space audio encoder: pretraining, fine-tuning, evaluation and memory benchmark"};
    app.name(args.empty() ? "bioseq" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);
    app.set_version_flag("--version", BIOSEQ_VERSION);
    Options o;

    auto* synth = app.add_subcommand("synth-corpus", "Generate the synthetic pretraining, classification and detection corpora");
    add_common(synth, o);
    synth->add_option("-n,--n", o.n, "Utterances per corpus (synth.n_utterances)");
    synth->add_option("--seed", o.seed, "Audio seed (synth.seed)");

    auto* pre = app.add_subcommand("pretrain", "Two-phase masked-prediction pretraining");
    add_common(pre, o);
    pre->add_option("--preset", o.preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    pre->add_option("-m,--manifest", o.manifest, "Corpus manifest (pretrain.manifest)");
    pre->add_option("--seed", o.seed, "Run seed");

    auto* ft = app.add_subcommand("finetune", "Fine-tune a pretrained checkpoint with an LR sweep");
    add_common(ft, o);
    ft->add_option("--checkpoint", o.checkpoint, "Pretrained checkpoint (finetune.checkpoint)");
    ft->add_option("--train", o.train, "Train manifest (finetune.train)");
    ft->add_option("--valid", o.valid, "Validation manifest (finetune.valid)");
    ft->add_option("--test", o.test, "Optional test manifest (finetune.test)");
    ft->add_option("--seed", o.seed, "Run seed");

    auto* ev = app.add_subcommand("eval", "Evaluate a fine-tuned model on a labeled manifest");
    add_common(ev, o);
    ev->add_option("--model", o.model, "Fine-tuned model (eval.model)");
    ev->add_option("-m,--manifest", o.manifest, "Labeled manifest (eval.manifest)");

    auto* be = app.add_subcommand("bench", "Layer-stack memory scaling benchmark");
    add_common(be, o);
    be->add_option("--preset", o.preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    be->add_option("--seed", o.seed, "Run seed");

    auto* re = app.add_subcommand("rerun", "Repeat a run from its provenance file (environment overrides are ignored)");
    add_common(re, o, false);
    re->add_option("provenance", o.provenance, "Provenance JSON written by an earlier run")->required();

    std::string command = "bioseq";
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        if (!rev.empty()) rev.pop_back();
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << BIOSEQ_VERSION << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        for (auto* sub : app.get_subcommands()) command = sub->get_name();
        emit_error(err, command, 2, {{"", e.what()}});
        return 2;
    }
    command = app.get_subcommands().front()->get_name();

    try {
        ConfigLayers layers;
        std::string run_command = command;
        if (command == "rerun") {
            const json prov = read_config_file(o.provenance);
            if (!prov.contains("command") || !prov["command"].is_string() || !prov.contains("config") ||
                !prov["config"].is_object())
                throw ConfigErrors("provenance", "missing command or config");
            if (prov.contains("config_hash") && prov["config_hash"] != hex64(fnv1a64(prov["config"].dump())))
                throw ConfigErrors("provenance.config_hash", "does not match the stored config");
            run_command = prov["command"].get<std::string>();
            if (run_command == "rerun") throw ConfigErrors("provenance.command", "cannot be rerun");
            layers.file = prov["config"];
        } else {
            if (!o.config.empty()) layers.file = read_config_file(o.config);
            layers.env = env;
        }
        layers.sets = flag_sets(run_command, o);
        const RunConfig cfg = resolve_config(layers);

        CommandResult res;
        if (run_command == "synth-corpus")
            res = cmd_synth(cfg);
        else if (run_command == "pretrain")
            res = cmd_pretrain(cfg, err, o.verbose);
        else if (run_command == "finetune")
            res = cmd_finetune(cfg);
        else if (run_command == "eval")
            res = cmd_eval(cfg);
        else if (run_command == "bench")
            res = cmd_bench(cfg, err);
        else
            throw ConfigErrors("provenance.command", "unknown command '" + run_command + "'");

        fs::create_directories(cfg.out_dir);
        const fs::path prov_path = fs::path(cfg.out_dir) / (run_command + ".provenance.json");
        write_json(prov_path, provenance_json(run_command, cfg, res.inputs));
        json summary = {{"status", "ok"}, {"command", run_command}, {"out_dir", cfg.out_dir},
                        {"provenance", prov_path.string()}};
        summary.update(res.summary);
        out << summary.dump() << "\n";
        return 0;
    } catch (const ConfigErrors& e) {
        emit_error(err, command, 2, e.errors());
        return 2;
    } catch (const std::invalid_argument& e) {
        emit_error(err, command, 2, {{"", e.what()}});
        return 2;
    } catch (const std::exception& e) {
        emit_error(err, command, 1, {{"", e.what()}});
        return 1;
    }
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run_cli(args, std::cout, std::cerr, process_environment());
}

}  // namespace bioseq::app
