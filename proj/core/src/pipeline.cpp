#include "tabattn/pipeline.hpp"

#include <string>

#include "tabattn/error.hpp"

namespace tabattn {

std::string_view to_string(SmoteMode mode) noexcept {
  return mode == SmoteMode::FullCohort ? "full-cohort" : "train-only";
}

SmoteMode parse_smote_mode(std::string_view text) {
  if (text == "full-cohort") return SmoteMode::FullCohort;
  if (text == "train-only") return SmoteMode::TrainOnly;
  fail(ErrorKind::Parameter, "unknown SMOTE mode '" + std::string(text) + "'");
}

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage '") + name + "': " + e.what());
  }
}

}  // namespace

PreparedData prepare_cohort(const Cohort& raw, const PipelineSettings& settings) {
  stage("validate", [&] { raw.validate(); });
  PreparedData out;
  out.raw_count = raw.size();

  const Cohort cleaned = stage("listwise-delete", [&] { return listwise_delete(raw); });
  out.cleaned_count = cleaned.size();
  Standardized scaled = stage("standardize", [&] { return standardize(cleaned); });
  out.stats = scaled.stats;
  const Cohort inliers =
      stage("outlier-removal", [&] { return remove_outliers(scaled.cohort, settings.z_threshold); });
  out.inlier_count = inliers.size();

  RandomSource rng(settings.seed ^ 0x5eed5eed5eed5eedULL);
  if (settings.smote_mode == SmoteMode::FullCohort) {
    const Cohort balanced = stage("smote", [&] { return smote(inliers, settings.smote_k, rng); });
    out.balanced_count = balanced.size();
    Split split = stage("split", [&] { return stratified_split(balanced, settings.val_fraction, rng); });
    out.train = std::move(split.train);
    out.validation = std::move(split.validation);
  } else {
    Split split = stage("split", [&] { return stratified_split(inliers, settings.val_fraction, rng); });
    out.train = stage("smote", [&] { return smote(split.train, settings.smote_k, rng); });
    out.balanced_count = out.train.size();
    out.validation = std::move(split.validation);
  }
  return out;
}

}  // namespace tabattn
