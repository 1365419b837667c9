#include "tabattn/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "json_io.hpp"
#include "tabattn/error.hpp"
#include "tabattn/training.hpp"

namespace tabattn {
namespace {

void check_schema(const ModelParams& params, const FeatureSchema& schema) {
  if (!(params.schema == schema)) fail(ErrorKind::Schema, "data schema does not match the model schema");
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sq);
}

double median(Vector values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

template <class Writer>
void write_file(const std::filesystem::path& path, Writer writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  writer(out);
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

Explanation explain_sample(const ModelParams& params, const ScalerStats& stats, const Sample& sample) {
  Cohort single{params.schema, {sample}, "raw"};
  single.validate();
  const Cohort scaled = standardize(single, stats).cohort;
  ForwardResult out = forward(scaled.samples, params);
  return {std::move(out.alpha.front()), out.probabilities.front()};
}

AttentionReport build_attention_report(const ModelParams& params, const ScalerStats& stats,
                                       const Cohort& raw) {
  if (raw.empty()) fail(ErrorKind::Domain, "attention report needs a non-empty cohort");
  check_schema(params, raw.schema);
  const Cohort scaled = standardize(raw, stats).cohort;
  ForwardResult out = forward(scaled.samples, params);

  AttentionReport report;
  report.feature_names = params.schema.names();
  report.rows.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double p = out.probabilities[i];
    report.rows.push_back({std::to_string(i), std::move(out.alpha[i]), p,
                           p >= kDecisionThreshold ? 1 : 0, raw.samples[i].label});
  }
  return report;
}

ImportanceRanking global_importance(const AttentionReport& report, Aggregation aggregation) {
  if (report.rows.empty()) fail(ErrorKind::Domain, "importance needs a non-empty attention report");
  const std::size_t n = report.feature_names.size();
  Vector weights(n, 0.0);
  if (aggregation == Aggregation::Mean) {
    for (const auto& row : report.rows) {
      if (row.alpha.size() != n) fail(ErrorKind::Shape, "attention row width mismatch");
      for (std::size_t i = 0; i < n; ++i) weights[i] += row.alpha[i];
    }
    for (double& w : weights) w /= static_cast<double>(report.rows.size());
  } else {
    Vector column(report.rows.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < report.rows.size(); ++r) column[r] = report.rows[r].alpha.at(i);
      weights[i] = median(column);
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total > 0.0) {
      for (double& w : weights) w /= total;
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&weights](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  ImportanceRanking ranking;
  for (std::size_t r = 0; r < n; ++r) {
    ranking.entries.push_back({report.feature_names[order[r]], weights[order[r]], r + 1});
  }
  return ranking;
}

EmbeddingExport export_embeddings(const ModelParams& params) {
  EmbeddingExport out;
  for (std::size_t i = 0; i < params.schema.size(); ++i) {
    const auto& f = params.schema.feature(i);
    if (f.kind == FeatureKind::Numerical) continue;
    const auto& table = std::get<EmbeddingTable>(params.embedders[i]);
    FeatureEmbeddingExport fe;
    fe.feature = f.name;
    const std::size_t card = table.cardinality();
    for (std::size_t c = 0; c < card; ++c) {
      auto row = table.weights.row(c);
      CategoryVector cv;
      cv.label = f.kind == FeatureKind::Categorical ? f.categories[c] : std::to_string(c);
      cv.values.assign(row.begin(), row.end());
      cv.norm = std::sqrt(dot(row, row));
      fe.categories.push_back(std::move(cv));
    }
    fe.distances = Matrix(card, card);
    for (std::size_t a = 0; a < card; ++a) {
      for (std::size_t b = a + 1; b < card; ++b) {
        const double dist = euclidean(table.weights.row(a), table.weights.row(b));
        fe.distances(a, b) = dist;
        fe.distances(b, a) = dist;
      }
    }
    out.features.push_back(std::move(fe));
  }
  return out;
}

void write_attention_report_csv(std::ostream& out, const AttentionReport& report) {
  out << "sample_id";
  for (const auto& name : report.feature_names) out << ',' << name;
  out << ",probability,predicted,label\n";
  for (const auto& row : report.rows) {
    out << row.sample_id;
    for (double a : row.alpha) out << ',' << format_double(a);
    out << ',' << format_double(row.probability) << ',' << row.predicted << ',';
    if (row.label) out << *row.label;
    out << '\n';
  }
}

void write_importance_csv(std::ostream& out, const ImportanceRanking& ranking) {
  out << "rank,feature,mean_attention\n";
  for (const auto& e : ranking.entries) {
    out << e.rank << ',' << e.feature << ',' << format_double(e.weight) << '\n';
  }
}

std::string embeddings_to_json(const EmbeddingExport& exported) {
  detail::json root = detail::json::object();
  for (const auto& fe : exported.features) {
    detail::json categories = detail::json::object();
    for (const auto& cv : fe.categories) {
      categories[cv.label] = {{"vector", cv.values}, {"norm", cv.norm}};
    }
    std::vector<std::string> order;
    for (const auto& cv : fe.categories) order.push_back(cv.label);
    root[fe.feature] = {{"categories", std::move(categories)},
                        {"order", std::move(order)},
                        {"distances", detail::matrix_to_json(fe.distances)}};
  }
  return root.dump(2) + "\n";
}

void save_attention_report_csv(const std::filesystem::path& path, const AttentionReport& report) {
  write_file(path, [&](std::ostream& out) { write_attention_report_csv(out, report); });
}

void save_importance_csv(const std::filesystem::path& path, const ImportanceRanking& ranking) {
  write_file(path, [&](std::ostream& out) { write_importance_csv(out, ranking); });
}

void save_embeddings_json(const std::filesystem::path& path, const EmbeddingExport& exported) {
  write_file(path, [&](std::ostream& out) { out << embeddings_to_json(exported); });
}

}  // namespace tabattn
