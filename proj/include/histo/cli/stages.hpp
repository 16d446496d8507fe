#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "histo/cli/config.hpp"
#include "histo/error.hpp"
#include "histo/eval.hpp"

namespace histo::cli {

/// A stage failure: the underlying error code plus the stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, ErrorCode code, const std::string& message)
      : std::runtime_error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)), code_(code) {}

  const std::string& stage() const noexcept { return stage_; }
  ErrorCode code() const noexcept { return code_; }

 private:
  std::string stage_;
  ErrorCode code_;
};

// Each stage reads the previous stage's manifest under cfg.out_dir and writes
// its own subdirectory: segment/, tiles/, normalize/, features/, train/,
// evaluate/.
void run_segment(const PipelineConfig& cfg);
void run_tile(const PipelineConfig& cfg);
void run_normalize(const PipelineConfig& cfg);
void run_featurize(const PipelineConfig& cfg);
void run_train(const PipelineConfig& cfg);
EvalReport run_evaluate(const PipelineConfig& cfg);

/// All six stages in order.
EvalReport run_pipeline(const PipelineConfig& cfg);

/// Reads evaluate/report.json and returns its hashed payload.
nlohmann::json read_report_payload(const std::filesystem::path& out_dir);

struct FeatureTable {
  Matrix values;
  std::vector<int> labels;
  std::vector<std::string> paths;  // absolute patch paths
  std::vector<std::string> slide_ids;
  std::vector<int> xs;
  std::vector<int> ys;
  int patch_size = 0;
};

void write_features(const std::filesystem::path& dir, const FeatureTable& table, const std::string& config_hash);
FeatureTable read_features(const std::filesystem::path& dir);

}  // namespace histo::cli
