#include <cmath>

#include "tabattn/data.hpp"
#include "tabattn/error.hpp"

namespace tabattn {

Cohort listwise_delete(const Cohort& cohort) {
  Cohort out;
  out.schema = cohort.schema;
  out.provenance = "cleaned";
  for (const Sample& s : cohort.samples) {
    if (!s.has_missing()) out.samples.push_back(s);
  }
  if (out.empty()) {
    fail(ErrorKind::DegenerateCohort, "listwise deletion removed every sample");
  }
  return out;
}

Standardized standardize(const Cohort& cohort, const std::optional<ScalerStats>& stats) {
  const std::size_t n_num = cohort.schema.count(FeatureKind::Numerical);
  ScalerStats used;
  if (stats) {
    if (stats->mean.size() != n_num || stats->stddev.size() != n_num) {
      fail(ErrorKind::Schema, "scaler statistics do not match the schema's numerical features");
    }
    used = *stats;
  } else {
    used.mean.assign(n_num, 0.0);
    used.stddev.assign(n_num, 0.0);
    if (!cohort.empty()) {
      const double count = static_cast<double>(cohort.size());
      for (std::size_t j = 0; j < n_num; ++j) {
        double sum = 0.0;
        for (const Sample& s : cohort.samples) sum += s.numerical[j];
        const double mean = sum / count;
        double sq = 0.0;
        for (const Sample& s : cohort.samples) {
          const double d = s.numerical[j] - mean;
          sq += d * d;
        }
        used.mean[j] = mean;
        used.stddev[j] = std::sqrt(sq / count);
      }
    }
  }

  Standardized out{cohort, used};
  for (Sample& s : out.cohort.samples) {
    for (std::size_t j = 0; j < n_num; ++j) {
      if (std::isnan(s.numerical[j])) {
        fail(ErrorKind::Domain, "standardize requires a cohort without missing values");
      }
      s.numerical[j] = used.stddev[j] > 0.0 ? (s.numerical[j] - used.mean[j]) / used.stddev[j] : 0.0;
    }
  }
  return out;
}

Cohort destandardize(const Cohort& cohort, const ScalerStats& stats) {
  const std::size_t n_num = cohort.schema.count(FeatureKind::Numerical);
  if (stats.mean.size() != n_num || stats.stddev.size() != n_num) {
    fail(ErrorKind::Schema, "scaler statistics do not match the schema's numerical features");
  }
  Cohort out = cohort;
  for (Sample& s : out.samples) {
    for (std::size_t j = 0; j < n_num; ++j) {
      s.numerical[j] = s.numerical[j] * stats.stddev[j] + stats.mean[j];
    }
  }
  return out;
}

Cohort remove_outliers(const Cohort& cohort, double z_threshold) {
  if (std::isnan(z_threshold) || z_threshold < 0.0) {
    fail(ErrorKind::Parameter, "outlier threshold must be non-negative");
  }
  Cohort out;
  out.schema = cohort.schema;
  out.provenance = cohort.provenance;
  for (const Sample& s : cohort.samples) {
    bool keep = true;
    for (double z : s.numerical) {
      if (std::abs(z) > z_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) out.samples.push_back(s);
  }
  if (out.empty()) fail(ErrorKind::DegenerateCohort, "outlier removal removed every sample");
  return out;
}

Split stratified_split(const Cohort& cohort, double val_fraction, RandomSource& rng) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    fail(ErrorKind::Parameter, "validation fraction must lie in (0, 1)");
  }
  std::vector<bool> in_validation(cohort.size(), false);
  std::size_t n_val = 0;
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      if (cohort.samples[i].label == label) members.push_back(i);
    }
    shuffle(members, rng);
    const auto take = static_cast<std::size_t>(
        std::llround(static_cast<double>(members.size()) * val_fraction));
    for (std::size_t j = 0; j < take; ++j) in_validation[members[j]] = true;
    n_val += take;
  }
  if (n_val == 0 || n_val == cohort.size()) {
    fail(ErrorKind::Parameter, "validation fraction " + format_double(val_fraction) + " on " +
                                   std::to_string(cohort.size()) +
                                   " samples leaves an empty partition");
  }

  Split split;
  split.train.schema = cohort.schema;
  split.validation.schema = cohort.schema;
  split.train.provenance = cohort.provenance;
  split.validation.provenance = cohort.provenance;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    (in_validation[i] ? split.validation : split.train).samples.push_back(cohort.samples[i]);
  }
  return split;
}

}  // namespace tabattn
