#include "bioseq/app/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "bioseq/num/random.hpp"

namespace bioseq::app {

using nlohmann::json;

namespace {

std::string join_errors(const std::vector<ConfigError>& errs) {
    std::string s;
    for (const auto& e : errs) s += (s.empty() ? "" : "; ") + e.field + ": " + e.message;
    return s;
}

// Returns the overrides that passed; rejected keys are reported and dropped so
// later validation can still run over the rest.
json check_overrides(const json& base, const json& over, const std::string& path, std::vector<ConfigError>& errs) {
    json kept = json::object();
    for (const auto& [key, val] : over.items()) {
        const std::string p = path.empty() ? key : path + "." + key;
        if (val.is_null()) {
            errs.push_back({p, "null is not allowed"});
            continue;
        }
        if (!base.contains(key)) {
            if (p == "bench.grid") {
                const bool ok = val.is_object() && val.size() == 3 && val.contains("first") && val.contains("last") &&
                                val.contains("step") && val["first"].is_number() && val["last"].is_number() &&
                                val["step"].is_number();
                if (ok)
                    kept[key] = val;
                else
                    errs.push_back({p, "expected {first, last, step} numbers"});
            } else {
                errs.push_back({p, "unknown key"});
            }
            continue;
        }
        const json& b = base.at(key);
        std::string problem;
        if (b.is_object()) {
            if (val.is_object())
                kept[key] = check_overrides(b, val, p, errs);
            else
                problem = "expected an object";
            if (problem.empty()) continue;
        } else if (b.is_array()) {
            if (!val.is_array()) problem = "expected an array";
        } else if (b.is_boolean()) {
            if (!val.is_boolean()) problem = "expected true or false";
        } else if (b.is_string()) {
            if (!val.is_string()) problem = "expected a string";
        } else if (b.is_number_unsigned()) {
            if (!val.is_number_integer() || (!val.is_number_unsigned() && val.get<std::int64_t>() < 0))
                problem = "expected a non-negative integer";
        } else if (b.is_number_integer()) {
            if (!val.is_number_integer()) problem = "expected an integer";
        } else if (b.is_number()) {
            if (!val.is_number()) problem = "expected a number";
        }
        if (problem.empty())
            kept[key] = val;
        else
            errs.push_back({p, problem});
    }
    return kept;
}

// Creates intermediate objects as needed.
void set_path(json& root, const std::string& path, json value, std::vector<ConfigError>& errs,
              const std::string& origin) {
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) {
            errs.push_back({path, "malformed key in " + origin});
            return;
        }
        if (dot == std::string::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        json& next = (*node)[key];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) {
            errs.push_back({path, "'" + path.substr(0, dot) + "' is not an object (" + origin + ")"});
            return;
        }
        node = &next;
        start = dot + 1;
    }
}

template <class F>
void section(const char* field, std::vector<ConfigError>& errs, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        errs.push_back({field, e.what()});
    }
}

void add_all(std::vector<ConfigError>& errs, const char* field, const std::vector<std::string>& msgs) {
    for (const auto& m : msgs) errs.push_back({field, m});
}

}  // namespace

ConfigErrors::ConfigErrors(std::vector<ConfigError> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

ConfigErrors::ConfigErrors(std::string field, std::string message)
    : ConfigErrors(std::vector<ConfigError>{{std::move(field), std::move(message)}}) {}

json to_json(const RunConfig& c) {
    json pre = pretrain::to_json(c.pretrain);
    pre.erase("seed");
    pre["phase1"].erase("seed");
    pre["phase2"].erase("seed");
    pre["manifest"] = c.pretrain_manifest;
    json sweep = downstream::to_json(c.sweep);
    sweep.erase("seed");
    json bench = bench::to_json(c.bench);
    bench.erase("seed");
    return {{"preset", c.preset},
            {"out_dir", c.out_dir},
            {"seed", c.seed},
            {"synth", to_json(c.synth)},
            {"pretrain", pre},
            {"finetune",
             {{"checkpoint", c.finetune_checkpoint},
              {"train", c.finetune_train},
              {"valid", c.finetune_valid},
              {"test", c.finetune_test},
              {"task", downstream::to_json(c.task)},
              {"sweep", sweep}}},
            {"eval", {{"model", c.eval_model}, {"manifest", c.eval_manifest}}},
            {"bench", bench}};
}

json default_config_json(const std::string& preset) {
    RunConfig c;
    if (preset == "full") {
        c.pretrain = pretrain::TwoPhaseConfig::full();
        c.bench = bench::BenchConfig::full();
    } else if (preset == "desk") {
        c.pretrain = pretrain::TwoPhaseConfig::desk();
        c.bench = bench::BenchConfig::desk();
    } else {
        throw std::invalid_argument("unknown preset '" + preset + "' (expected desk or full)");
    }
    c.preset = preset;
    return to_json(c);
}

std::optional<std::string> env_key_path(const std::string& name) {
    static const std::string prefix = "BIOSEQ_";
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) return std::nullopt;
    std::string rest = name.substr(prefix.size());
    std::string out;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        if (rest[i] == '_' && i + 1 < rest.size() && rest[i + 1] == '_') {
            out += '.';
            ++i;
        } else {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(rest[i])));
        }
    }
    return out;
}

json parse_override_value(const std::string& text) {
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) return json(text);
    return v;
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigErrors("config", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        json j = json::parse(ss.str());
        if (!j.is_object()) throw ConfigErrors("config", path.string() + ": top level must be an object");
        return j;
    } catch (const json::parse_error& e) {
        throw ConfigErrors("config", path.string() + ": " + e.what());
    }
}

void apply_seed(RunConfig& c) {
    c.pretrain.seed = c.seed;
    c.pretrain.phase1.seed = num::mix_seed(c.seed, {0x5101});
    c.pretrain.phase2.seed = num::mix_seed(c.seed, {0x5102});
    c.sweep.seed = c.seed;
    c.bench.seed = c.seed;
}

RunConfig resolve_config(const ConfigLayers& layers) {
    std::vector<ConfigError> errs;
    json over = json::object();
    if (layers.file) {
        if (!layers.file->is_object())
            errs.push_back({"config", "top level must be an object"});
        else
            over = *layers.file;
    }
    for (const auto& [name, value] : layers.env)
        if (auto key = env_key_path(name)) set_path(over, *key, parse_override_value(value), errs, "env " + name);
    for (const auto& s : layers.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            errs.push_back({"--set", "expected key=value, got '" + s + "'"});
            continue;
        }
        set_path(over, s.substr(0, eq), parse_override_value(s.substr(eq + 1)), errs, "--set");
    }

    std::string preset = "desk";
    if (over.contains("preset")) {
        if (over["preset"].is_string() && (over["preset"] == "desk" || over["preset"] == "full"))
            preset = over["preset"].get<std::string>();
        else
            errs.push_back({"preset", "expected \"desk\" or \"full\""});
        over.erase("preset");
    }
    const json base = default_config_json(preset);
    over = check_overrides(base, over, "", errs);
    if (over.contains("bench") && over["bench"].contains("grid") && over["bench"].contains("durations")) {
        errs.push_back({"bench.grid", "conflicts with bench.durations"});
        over["bench"].erase("grid");
    }

    json merged = base;
    merged.merge_patch(over);
    merged["preset"] = preset;

    RunConfig c;
    c.preset = preset;
    c.out_dir = merged["out_dir"].get<std::string>();
    c.seed = merged["seed"].get<std::uint64_t>();
    section("synth", errs, [&] { c.synth = synth_options_from_json(merged["synth"]); });
    section("pretrain", errs, [&] {
        json pre = merged["pretrain"];
        c.pretrain_manifest = pre["manifest"].get<std::string>();
        pre.erase("manifest");
        c.pretrain = pretrain::two_phase_config_from_json(pre);
    });
    const json& ft = merged["finetune"];
    c.finetune_checkpoint = ft["checkpoint"].get<std::string>();
    c.finetune_train = ft["train"].get<std::string>();
    c.finetune_valid = ft["valid"].get<std::string>();
    c.finetune_test = ft["test"].get<std::string>();
    section("finetune.task", errs, [&] { c.task = downstream::task_spec_from_json(ft["task"]); });
    section("finetune.sweep", errs, [&] { c.sweep = downstream::finetune_config_from_json(ft["sweep"]); });
    c.eval_model = merged["eval"]["model"].get<std::string>();
    c.eval_manifest = merged["eval"]["manifest"].get<std::string>();
    section("bench", errs, [&] {
        json b = merged["bench"];
        if (b.contains("grid")) {
            const json g = b["grid"];
            b.erase("grid");
            b["durations"] = bench::duration_grid(g["first"].get<double>(), g["last"].get<double>(),
                                                  g["step"].get<double>());
        }
        c.bench = bench::bench_config_from_json(b);
    });

    apply_seed(c);
    if (c.out_dir.empty()) errs.push_back({"out_dir", "must not be empty"});
    add_all(errs, "synth", c.synth.validate());
    add_all(errs, "pretrain", c.pretrain.validate());
    add_all(errs, "finetune.task", c.task.validate());
    add_all(errs, "finetune.sweep", c.sweep.validate());
    add_all(errs, "bench", c.bench.validate());
    if (!errs.empty()) throw ConfigErrors(std::move(errs));
    return c;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

}  // namespace bioseq::app
