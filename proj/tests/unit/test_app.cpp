#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bioseq/app/cli.hpp"
#include "bioseq/app/config.hpp"
#include "bioseq/app/synth.hpp"
#include "bioseq/encoder/encoder.hpp"
#include "bioseq/signal/manifest.hpp"
#include "wav_fixture.hpp"

using namespace bioseq;
using namespace bioseq::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// relative path -> bytes, provenance files excluded
std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), root).string();
        if (rel.find("provenance") != std::string::npos) continue;
        out[rel] = slurp(e.path());
    }
    return out;
}

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args, const Environment& env = {}) {
    args.insert(args.begin(), "bioseq");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err, env);
    return {code, out.str(), err.str()};
}

// Power of one frequency over [b, e) (Goertzel), normalized per sample.
double tone_power(const std::vector<float>& x, double freq, std::size_t b, std::size_t e) {
    const double w = 2.0 * M_PI * freq / 16000.0;
    const double coeff = 2.0 * std::cos(w);
    double s1 = 0, s2 = 0;
    for (std::size_t t = b; t < e; ++t) {
        const double s0 = x[t] + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    const double n = static_cast<double>(e - b);
    return (s1 * s1 + s2 * s2 - coeff * s1 * s2) / (n * n);
}

// Largest tone_power over the first 0.1 s within +-2.5% of freq, in 1 Hz
// steps (class tones carry a small detuning).
double band_power(const std::vector<float>& x, double freq) {
    double best = 0.0;
    for (double f = 0.975 * freq; f <= 1.025 * freq; f += 1.0) best = std::max(best, tone_power(x, f, 0, 1600));
    return best;
}

std::vector<json> read_jsonl(const fs::path& p) {
    std::vector<json> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

encoder::EncoderConfig tiny_encoder() {
    auto c = encoder::EncoderConfig::desk();
    c.n_layers = 2;
    c.d = 16;
    c.phase2_feature_layer = 2;
    c.cnn.channels = 8;
    c.mamba.state_dim = 8;
    c.mamba.head_dim = 8;
    return c;
}

}  // namespace

TEST_CASE("synthetic corpora") {
    const auto dir = fixture::temp_dir("synth");
    SynthOptions opt;
    opt.n_utterances = 30;
    opt.seed = 7;
    const auto m = synth_corpus(dir / "a", opt);
    synth_corpus(dir / "b", opt);
    const auto ta = tree(dir / "a");
    CHECK(ta.size() == 3 * 30 + 1 + 3 + 3 + 1);
    CHECK(ta == tree(dir / "b"));
    opt.seed = 8;
    synth_corpus(dir / "c", opt);
    CHECK(tree(dir / "c") != ta);

    SUBCASE("pretrain corpus") {
        const auto entries = signal::read_corpus_manifest(m.pretrain);
        REQUIRE(entries.size() == 30);
        for (const auto& e : entries) {
            CHECK(e.duration_s >= 4.0);
            CHECK(e.duration_s <= 6.0);
            CHECK(signal::load_audio(e.path).size() == static_cast<std::size_t>(std::llround(e.duration_s * 16000)));
        }
    }
    SUBCASE("classification splits") {
        std::set<std::string> ids;
        std::set<int> classes;
        for (const auto& path : {m.classification_train, m.classification_valid, m.classification_test}) {
            std::map<int, int> per_class;
            for (const auto& e : signal::read_labeled_manifest(path)) {
                CHECK(!e.multi_label);
                CHECK(ids.insert(e.utterance_id).second);
                ++per_class[e.label];
                classes.insert(e.label);
            }
            CHECK(per_class.size() == 3);
            for (const auto& [c, n] : per_class) CHECK(n >= 2);
        }
        CHECK(classes.size() >= 2);
        CHECK(ids.size() == 30);
        // the two class tones dominate each clip
        for (const auto& e : signal::read_labeled_manifest(m.classification_train)) {
            const auto w = signal::load_audio(e.path);
            for (std::size_t c = 0; c < 3; ++c)
                for (double f : class_tones(c)) {
                    const double p = band_power(w.samples, f);
                    if (static_cast<int>(c) == e.label)
                        CHECK(p > 1e-3);
                    else
                        CHECK(p < 1e-4);
                }
        }
    }
    SUBCASE("detection labels match the event log and the audio") {
        std::map<std::string, std::vector<int>> labels;
        std::size_t total = 0;
        for (const auto& path : {m.detection_train, m.detection_valid, m.detection_test})
            for (const auto& e : signal::read_labeled_manifest(path)) {
                CHECK(e.multi_label);
                labels[e.utterance_id] = e.labels;
                ++total;
            }
        CHECK(total == 30);
        const auto log = read_jsonl(m.detection_events);
        REQUIRE(log.size() == 30);
        std::size_t positives = 0;
        for (const auto& line : log) {
            const std::string id = line.at("utterance_id");
            const auto events = read_event_log_entry(line);
            const auto presence = presence_from_events(events, opt.event_classes);
            CHECK(labels.at(id) == presence);
            const auto w = signal::load_audio(m.detection_events.parent_path() / "wav" / (id + ".wav"));
            for (std::size_t c = 0; c < opt.event_classes; ++c) {
                const double f = event_tone(c);
                if (presence[c]) {
                    ++positives;
                    const SynthEvent* ev = nullptr;
                    for (const auto& x : events)
                        if (x.cls == c) ev = &x;
                    REQUIRE(ev);
                    const auto b = static_cast<std::size_t>(ev->onset_s * 16000);
                    const auto e = std::min(w.size(), b + static_cast<std::size_t>(ev->duration_s * 16000));
                    // Hann-tapered tone of amplitude a has mean power a^2 * 3/8 / 4 in this normalization
                    CHECK(tone_power(w.samples, f, b, e) > 0.3 * ev->amplitude * ev->amplitude * 3.0 / 32.0);
                } else {
                    CHECK(tone_power(w.samples, f, 0, w.size()) < 1e-4);
                }
            }
        }
        CHECK(positives > 0);
    }
    SUBCASE("option errors") {
        SynthOptions bad;
        bad.classes = 1;
        bad.event_classes = 9;
        bad.clip_seconds = 0;
        CHECK(bad.validate().size() == 3);
        bad = SynthOptions{};
        bad.n_utterances = 17;
        CHECK(bad.validate().size() == 1);
        CHECK_THROWS_AS(synth_corpus(dir / "bad", bad), std::invalid_argument);
    }
}

TEST_CASE("config resolution") {
    SUBCASE("defaults round-trip") {
        const RunConfig d = resolve_config({});
        CHECK(to_json(d) == default_config_json("desk"));
        CHECK(d.pretrain.encoder.d == 64);
        const RunConfig f = resolve_config({.sets = {"preset=full"}});
        CHECK(to_json(f) == default_config_json("full"));
        CHECK(f.pretrain.encoder.d == 768);
        CHECK(f.bench.durations.size() == 200);
    }
    SUBCASE("precedence: flags > env > file > defaults") {
        ConfigLayers layers;
        layers.file = json{{"finetune", {{"sweep", {{"epochs", 10}, {"batch_size", 3}}}}},
                           {"pretrain", {{"phase1", {{"steps", 111}}}}},
                           {"out_dir", "from_file"}};
        layers.env = {{"BIOSEQ_FINETUNE__SWEEP__EPOCHS", "20"},
                      {"BIOSEQ_PRETRAIN__PHASE1__STEPS", "222"},
                      {"UNRELATED", "x"},
                      {"BIOSEQ_SEED", "5"}};
        layers.sets = {"finetune.sweep.epochs=30"};
        const RunConfig c = resolve_config(layers);
        CHECK(c.sweep.epochs == 30);         // flag over env over file
        CHECK(c.pretrain.phase1.steps == 222);  // env over file
        CHECK(c.sweep.batch_size == 3);      // file over default
        CHECK(c.out_dir == "from_file");
        CHECK(c.seed == 5);
        CHECK(c.pretrain.phase2.steps == 2000);  // default
        CHECK(c.sweep.seed == 5);
        CHECK(c.bench.seed == 5);
        CHECK(c.pretrain.seed == 5);
        CHECK(c.pretrain.phase1.seed != c.pretrain.phase2.seed);
    }
    SUBCASE("every problem is reported at once") {
        ConfigLayers layers;
        layers.file = json{{"pretrain", {{"phase2", {{"k", 1}}}}}, {"colour", "red"}};
        layers.env = {{"BIOSEQ_FINETUNE__SWEEP__EPOCHS", "many"}};
        layers.sets = {"bench.durations=[3,2]", "finetune.task.kind=\"regression\"", "noequals", "seed=-1",
                       "pretrain.encoder.d.x=1"};
        try {
            resolve_config(layers);
            FAIL("expected ConfigErrors");
        } catch (const ConfigErrors& e) {
            std::set<std::string> fields;
            for (const auto& x : e.errors()) fields.insert(x.field);
            CHECK(fields.count("colour"));
            CHECK(fields.count("finetune.sweep.epochs"));
            CHECK(fields.count("--set"));
            CHECK(fields.count("seed"));
            CHECK(fields.count("pretrain.encoder.d"));
            CHECK(fields.count("pretrain"));
            CHECK(fields.count("bench"));
            CHECK(fields.count("finetune.task"));
            CHECK(e.errors().size() >= 8);
        }
    }
    SUBCASE("bench grid shorthand") {
        const RunConfig c = resolve_config({.sets = {R"(bench.grid={"first":2,"last":8,"step":3})"}});
        CHECK(c.bench.durations == std::vector<double>{2, 5, 8});
        CHECK_THROWS_AS(resolve_config({.sets = {R"(bench.grid={"first":2,"last":8,"step":3})", "bench.durations=[1]"}}),
                        ConfigErrors);
    }
    SUBCASE("helpers") {
        CHECK(env_key_path("BIOSEQ_PRETRAIN__PHASE1__STEPS") == "pretrain.phase1.steps");
        CHECK(env_key_path("BIOSEQ_OUT_DIR") == "out_dir");
        CHECK(!env_key_path("BIOSEQ_"));
        CHECK(!env_key_path("HOME"));
        CHECK(parse_override_value("12") == json(12));
        CHECK(parse_override_value("1e-4") == json(1e-4));
        CHECK(parse_override_value("runs/x") == json("runs/x"));
        CHECK(parse_override_value("[1,2]") == json::array({1, 2}));
        CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
        CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
    }
}

TEST_CASE("cli") {
    const auto dir = fixture::temp_dir("cli");

    SUBCASE("usage and input errors are single-line JSON with exit 2") {
        for (const auto& r : {run({}), run({"nope"}), run({"finetune", "--out", (dir / "x").string()}),
                              run({"eval", "--model", (dir / "missing.bmck").string(), "-m",
                                   (dir / "missing.jsonl").string()}),
                              run({"pretrain", "--config", (dir / "none.json").string()}),
                              run({"pretrain", "--set", "pretrain.phase1.k=1", "--set", "bogus=1"})}) {
            CHECK(r.code == 2);
            CHECK(r.out.empty());
            REQUIRE(!r.err.empty());
            CHECK(r.err.find('\n') == r.err.size() - 1);
            const json e = json::parse(r.err);
            CHECK(e.at("status") == "error");
            CHECK(!e.at("errors").empty());
        }
        const json e = json::parse(run({"pretrain", "-m", (dir / "nothing.jsonl").string()}).err);
        CHECK(e.at("errors")[0].at("field") == "pretrain.manifest");
        const json e2 = json::parse(run({"finetune"}).err);
        CHECK(e2.at("errors").size() == 3);
        const json e3 = json::parse(run({"pretrain", "--config", (dir / "none.json").string()}).err);
        CHECK(e3.at("errors")[0].at("field") == "config");
        const json e4 = json::parse(run({"pretrain", "--set", "pretrain.phase1.k=1", "--set", "bogus=1"}).err);
        CHECK(e4.at("errors").size() == 2);
    }
    SUBCASE("help and version") {
        const auto h = run({"--help"});
        CHECK(h.code == 0);
        CHECK(h.out.find("synth-corpus") != std::string::npos);
        CHECK(run({"--version"}).code == 0);
    }
    SUBCASE("bench rows, provenance and rerun") {
        const auto out = (dir / "bench").string();
        const auto r = run({"bench", "--out", out, "--set", R"(bench.grid={"first":1,"last":5,"step":1})", "--set",
                            "bench.mamba.n_layers=2", "--set", "bench.attention.n_layers=2", "--set",
                            "bench.mamba.phase2_feature_layer=1", "--set", "bench.attention.phase2_feature_layer=1"});
        REQUIRE(r.code == 0);
        const json summary = json::parse(r.out);
        CHECK(summary.at("rows") == 10);
        const std::string csv = slurp(dir / "bench" / "bench_memory.csv");
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
        CHECK(fs::exists(dir / "bench" / "bench_memory.svg"));

        const fs::path prov_path = dir / "bench" / "bench.provenance.json";
        const json prov = json::parse(slurp(prov_path));
        CHECK(prov.at("command") == "bench");
        CHECK(prov.at("config_hash") == hex64(fnv1a64(prov.at("config").dump())));
        CHECK(prov.at("config").at("bench").at("durations").size() == 5);
        CHECK(prov.at("versions").contains("compiler"));
        CHECK(slurp(prov_path).find("time") == std::string::npos);

        // rerun from provenance ignores the environment and reproduces the CSV
        const auto r2 = run({"rerun", prov_path.string(), "--out", (dir / "bench2").string()},
                            {{"BIOSEQ_BENCH__MAMBA__N_LAYERS", "3"}});
        REQUIRE(r2.code == 0);
        CHECK(slurp(dir / "bench2" / "bench_memory.csv") == csv);
        CHECK(slurp(dir / "bench2" / "bench_report.json") == slurp(dir / "bench" / "bench_report.json"));

        json tampered = prov;
        tampered["config"]["seed"] = 99;
        std::ofstream(dir / "tampered.json") << tampered.dump();
        const auto r3 = run({"rerun", (dir / "tampered.json").string()});
        CHECK(r3.code == 2);
        CHECK(json::parse(r3.err).at("errors")[0].at("field") == "provenance.config_hash");
    }
    SUBCASE("synth, finetune and eval end to end") {
        const auto corpus = dir / "corpus";
        auto r = run({"synth-corpus", "--out", corpus.string(), "-n", "18", "--seed", "3"});
        REQUIRE(r.code == 0);
        num::Checkpoint ck;
        encoder::Encoder(tiny_encoder(), 2).save(ck);
        ck.save(dir / "tiny.bmck");

        r = run({"finetune", "--out", (dir / "ft").string(), "--checkpoint", (dir / "tiny.bmck").string(), "--train",
                 (corpus / "classification" / "train.jsonl").string(), "--valid",
                 (corpus / "classification" / "valid.jsonl").string(), "--test",
                 (corpus / "classification" / "test.jsonl").string(), "--set", "finetune.task.n_classes=3", "--set",
                 "finetune.sweep.lrs=[0.001]", "--set", "finetune.sweep.epochs=25", "--set",
                 "finetune.sweep.batch_size=3"});
        REQUIRE(r.code == 0);
        const json s = json::parse(r.out);
        CHECK(s.at("chosen_lr") == 0.001);
        CHECK(fs::exists(dir / "ft" / "finetuned.bmck"));
        const json prov = json::parse(slurp(dir / "ft" / "finetune.provenance.json"));
        CHECK(prov.at("inputs").size() == 4);

        r = run({"eval", "--out", (dir / "ev").string(), "--model", (dir / "ft" / "finetuned.bmck").string(), "-m",
                 (corpus / "classification" / "train.jsonl").string()});
        REQUIRE(r.code == 0);
        CHECK(json::parse(r.out).at("accuracy") == 1.0);
        const json rep = json::parse(slurp(dir / "ev" / "eval_report.json"));
        CHECK(rep.at("result").at("value") == 1.0);

        // labels that do not fit the task fail with exit 2
        r = run({"finetune", "--out", (dir / "ft2").string(), "--checkpoint", (dir / "tiny.bmck").string(), "--train",
                 (corpus / "classification" / "train.jsonl").string(), "--valid",
                 (corpus / "classification" / "valid.jsonl").string(), "--set", "finetune.task.n_classes=2"});
        CHECK(r.code == 2);
    }
}
