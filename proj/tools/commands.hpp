#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabattn/artifact.hpp"
#include "tabattn/data.hpp"
#include "tabattn/error.hpp"
#include "tabattn/gradcheck.hpp"
#include "tabattn/interpret.hpp"
#include "tabattn/pipeline.hpp"
#include "tabattn/training.hpp"

namespace tabattn::cli {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUnexpected = 1;
inline constexpr int kParse = 2;
inline constexpr int kSchema = 3;
inline constexpr int kDomain = 4;
inline constexpr int kIo = 5;
inline constexpr int kVersion = 6;
inline constexpr int kParameter = 7;
inline constexpr int kGradCheckFailed = 8;
}  // namespace exit_code

int exit_code_for(ErrorKind kind) noexcept;

enum class Ablation { Attention, MeanPool, Logistic };
Ablation parse_ablation(std::string_view text);

/// Synthetic signal presets: "xor" (planted interaction) or "null".
PlantedSignal signal_preset(std::string_view name);

struct GenDataOptions {
  std::optional<std::filesystem::path> schema;
  std::size_t n = 296;
  std::uint64_t seed = 42;
  std::string signal = "xor";
  double missing_rate = 0.0;
  std::filesystem::path out = ".";
};

struct RunConfig {
  std::optional<std::filesystem::path> schema;
  std::optional<std::filesystem::path> data;
  std::optional<std::size_t> generate;  // synthetic cohort size, instead of --data
  std::string signal = "xor";
  TrainConfig train;
  PipelineSettings pipeline;
  Ablation ablation = Ablation::Attention;
  std::filesystem::path out = ".";
};

struct EvalOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  std::filesystem::path out = ".";
};

struct ExplainOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  std::filesystem::path out = ".";
  Aggregation aggregation = Aggregation::Mean;
};

struct GradCheckOptions {
  std::uint64_t seed = GradCheckSettings{}.seed;
  std::size_t configurations = 20;
  std::optional<std::string> corrupt;  // tensor-name prefix whose gradient is perturbed
};

struct TrainOutcome {
  ModelArtifact artifact;
  TrainReport report;
  PreparedData data;
};

/// Writes <out>/cohort.csv and <out>/ground_truth.json.
SyntheticCohort cmd_gen_data(const GenDataOptions& options, std::ostream& log);

/// Writes <out>/model.json, curves.csv, train.csv, validation.csv (raw units)
/// and report.json.
TrainOutcome cmd_train(const RunConfig& config, std::ostream& log);

/// Prints metrics and writes <out>/metrics.json.
Metrics cmd_eval(const EvalOptions& options, std::ostream& log);

/// Writes attention_report.csv, importance.csv and embeddings.json.
ImportanceRanking cmd_explain(const ExplainOptions& options, std::ostream& log);

GradCheckReport cmd_gradcheck(const GradCheckOptions& options, std::ostream& log);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tabattn::cli
