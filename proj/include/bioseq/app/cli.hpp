#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bioseq/app/config.hpp"

namespace bioseq::app {

using Environment = std::vector<std::pair<std::string, std::string>>;

Environment process_environment();

struct InputFile {
    std::string field;
    std::filesystem::path path;
};

// Resolved config, its FNV-1a hash, seed, input file hashes and build info.
// Contains no timestamps, so reruns produce the same document.
nlohmann::json provenance_json(const std::string& command, const RunConfig& cfg, const std::vector<InputFile>& inputs);

// Subcommands: synth-corpus, pretrain, finetune, eval, bench, rerun.
// Exit 0 on success with a one-line JSON summary on `out`; 2 for usage,
// config or missing-input errors and 1 for failures while running, each with
// a one-line JSON error on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env);

int cli_main(int argc, char** argv);

}  // namespace bioseq::app
