#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tabattn/data.hpp"
#include "tabattn/model.hpp"

namespace tabattn {

struct Explanation {
  Vector alpha;  // attention over features, schema order
  double probability = 0.0;
};

/// Infer-mode forward for one raw sample, standardized with `stats`.
Explanation explain_sample(const ModelParams& params, const ScalerStats& stats, const Sample& sample);

struct AttentionRow {
  std::string sample_id;
  Vector alpha;
  double probability = 0.0;
  int predicted = 0;
  std::optional<int> label;
};

/// Patient-level attention heatmap data.
struct AttentionReport {
  std::vector<std::string> feature_names;
  std::vector<AttentionRow> rows;
};

/// One row per sample of the raw cohort, in cohort order; sample ids are the
/// zero-based row positions.
AttentionReport build_attention_report(const ModelParams& params, const ScalerStats& stats,
                                       const Cohort& raw);

enum class Aggregation { Mean, Median };

struct ImportanceEntry {
  std::string feature;
  double weight = 0.0;
  std::size_t rank = 0;  // 1-based
};

struct ImportanceRanking {
  std::vector<ImportanceEntry> entries;  // descending weight, ties in schema order
};

/// Per-feature mean of alpha across the report. The median variant is
/// renormalised so the weights stay on the simplex.
ImportanceRanking global_importance(const AttentionReport& report,
                                    Aggregation aggregation = Aggregation::Mean);

struct CategoryVector {
  std::string label;
  Vector values;
  double norm = 0.0;
};

struct FeatureEmbeddingExport {
  std::string feature;
  std::vector<CategoryVector> categories;
  Matrix distances;  // pairwise Euclidean, symmetric, zero diagonal
};

struct EmbeddingExport {
  std::vector<FeatureEmbeddingExport> features;  // categorical and binary, schema order
};

EmbeddingExport export_embeddings(const ModelParams& params);

void write_attention_report_csv(std::ostream& out, const AttentionReport& report);
void write_importance_csv(std::ostream& out, const ImportanceRanking& ranking);
std::string embeddings_to_json(const EmbeddingExport& exported);

void save_attention_report_csv(const std::filesystem::path& path, const AttentionReport& report);
void save_importance_csv(const std::filesystem::path& path, const ImportanceRanking& ranking);
void save_embeddings_json(const std::filesystem::path& path, const EmbeddingExport& exported);

}  // namespace tabattn
