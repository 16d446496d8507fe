#include "histo/cli/app.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>

#include "histo/cli/config.hpp"
#include "histo/cli/stages.hpp"
#include "histo/cli/synth.hpp"

namespace histo::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code, bool in_stage) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
      return kExitConfig;
    case ErrorCode::MissingInput:
    case ErrorCode::CorpusEmpty:
    case ErrorCode::MissingLevelFile:
      return kExitMissingInput;
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument:
      return in_stage ? kExitStageFailure : kExitConfig;
    default:
      return kExitStageFailure;
  }
}

namespace {

struct StageCommand {
  std::string config_path;
  std::map<std::string, std::string> flag_values;
};

void add_config_flags(CLI::App* sub, StageCommand& cmd) {
  sub->add_option("--config", cmd.config_path, "config file (key = value text with [section] headers)");
  sub->add_option("--seed", cmd.flag_values["seed"], "master seed");
  sub->add_option("--out", cmd.flag_values["paths.out"], "output directory");
  for (const auto& k : config_keys()) {
    if (k.key == "seed" || k.key == "paths.out") continue;
    sub->add_option("--" + std::string(k.key), cmd.flag_values[std::string(k.key)], std::string(k.help));
  }
}

PipelineConfig resolve(const StageCommand& cmd) {
  ConfigValues overrides;
  for (const auto& [key, value] : cmd.flag_values) {
    if (value.empty()) continue;
    // Path flags are relative to the working directory, not the config file.
    overrides[key] = key.rfind("paths.", 0) == 0 && value != "auto" ? fs::absolute(value).string() : value;
  }
  if (cmd.config_path.empty()) return resolve_config({}, overrides, fs::current_path());
  const fs::path path(cmd.config_path);
  if (!fs::exists(path)) throw Error(ErrorCode::ConfigInvalid, "config file not found: " + cmd.config_path);
  return load_config(fs::absolute(path), overrides);
}

void print_report(const EvalReport& r) {
  auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("null"); };
  std::printf("model %s: accuracy %s  precision %s  recall %s  f1 %s  auc %s\n", r.model_id.c_str(),
              show(r.test.accuracy).c_str(), show(r.test.precision).c_str(), show(r.test.recall).c_str(),
              show(r.test.f1).c_str(), show(r.test.auc).c_str());
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Histopathology patch classification pipeline"};
  app.require_subcommand(1);

  StageCommand stage_cmd;
  std::map<std::string, std::function<void(const PipelineConfig&)>> stages = {
      {"segment", run_segment},
      {"tile", run_tile},
      {"normalize", run_normalize},
      {"featurize", run_featurize},
      {"train", run_train},
      {"evaluate", [](const PipelineConfig& c) { print_report(run_evaluate(c)); }},
      {"pipeline", [](const PipelineConfig& c) { print_report(run_pipeline(c)); }},
  };
  const std::map<std::string, std::string> descriptions = {
      {"segment", "tissue masks and component tables"},
      {"tile", "extract patches under the tissue mask"},
      {"normalize", "fit stain models and normalize patches to the template"},
      {"featurize", "flatten patches into the feature matrix"},
      {"train", "split, cross-validate and fit the model"},
      {"evaluate", "score the held-out split and write the report"},
      {"pipeline", "run all stages in order"},
  };
  std::vector<std::pair<CLI::App*, std::string>> stage_subs;
  for (const auto& name : {"segment", "tile", "normalize", "featurize", "train", "evaluate", "pipeline"}) {
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    add_config_flags(sub, stage_cmd);
    stage_subs.emplace_back(sub, name);
  }

  std::string synth_seed;
  std::string synth_out;
  int n_slides = 20;
  double balance = 0.5;
  SynthOptions synth_options;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic slide corpus");
  synth->add_option("--seed", synth_seed, "master seed")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n-slides", n_slides, "number of slides")->check(CLI::Range(2, 100000));
  synth->add_option("--balance", balance, "fraction of tumor slides")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--base-size", synth_options.base_size, "level-0 edge in pixels")->check(CLI::Range(64, 16384));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (const CLI::App* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return kExitConfig;
  }

  try {
    if (synth->parsed()) {
      std::uint64_t seed = 0;
      try {
        seed = std::stoull(synth_seed);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigInvalid, "--seed must be a non-negative integer");
      }
      const fs::path corpus = synth_corpus(seed, n_slides, balance, synth_out, synth_options);
      std::printf("wrote %s\n", corpus.string().c_str());
      return kExitOk;
    }
    for (const auto& [sub, name] : stage_subs) {
      if (!sub->parsed()) continue;
      const PipelineConfig cfg = resolve(stage_cmd);
      stages.at(name)(cfg);
      return kExitOk;
    }
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code(), true);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code(), false);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitStageFailure;
  }
  return kExitConfig;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> storage = args;
  storage.insert(storage.begin(), "histo");
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(storage.size()), argv.data());
}

}  // namespace histo::cli
