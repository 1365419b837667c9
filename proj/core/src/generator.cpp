#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "tabattn/data.hpp"
#include "tabattn/error.hpp"

namespace tabattn {
namespace {

struct NumericBase {
  double mean;
  double stddev;
};

// Plausible marginals for the default schema; other numerical features are N(0, 1).
NumericBase numeric_base(const std::string& name) {
  static const std::unordered_map<std::string, NumericBase> known = {
      {"Age", {68.0, 10.0}},
      {"SurgicalTime", {45.0, 15.0}},
      {"TotalDaysInHospital", {3.0, 1.5}},
      {"TotalCigarettesSmoked", {150.0, 80.0}},
      {"TumourDiameter", {2.0, 0.8}},
  };
  auto it = known.find(name);
  return it == known.end() ? NumericBase{0.0, 1.0} : it->second;
}

std::size_t require_feature(const FeatureSchema& schema, const std::string& name) {
  auto idx = schema.index_of(name);
  if (!idx) fail(ErrorKind::Schema, "planted feature '" + name + "' is not in the schema");
  return *idx;
}

}  // namespace

PlantedSignal PlantedSignal::xor_interaction() {
  PlantedSignal s;
  s.effects = {{"SurgicalTime", 2.0}};
  s.interaction = PlantedInteraction{"Gender", "PTA", 6.0};
  return s;
}

PlantedSignal PlantedSignal::null_signal() { return {}; }

std::vector<std::string> PlantedSignal::planted_features() const {
  std::vector<std::string> out;
  auto add = [&out](const std::string& name) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  };
  for (const auto& e : effects) add(e.feature);
  if (interaction) {
    add(interaction->first);
    add(interaction->second);
  }
  return out;
}

SyntheticCohort generate_synthetic_cohort(const FeatureSchema& schema,
                                          const GeneratorSettings& settings,
                                          const PlantedSignal& planted, RandomSource& rng) {
  if (settings.n < kMinSyntheticCohort) {
    fail(ErrorKind::Parameter, "synthetic cohort needs n >= " +
                                   std::to_string(kMinSyntheticCohort) + ", got " +
                                   std::to_string(settings.n));
  }
  if (!(settings.missing_rate >= 0.0 && settings.missing_rate < 1.0)) {
    fail(ErrorKind::Parameter, "missing rate must lie in [0, 1)");
  }
  if (!(planted.noise_stddev >= 0.0)) fail(ErrorKind::Parameter, "noise stddev must be >= 0");

  std::vector<std::pair<std::size_t, double>> effects;
  for (const auto& e : planted.effects) effects.emplace_back(require_feature(schema, e.feature), e.weight);
  std::optional<std::pair<std::size_t, std::size_t>> pair;
  if (planted.interaction) {
    pair.emplace(require_feature(schema, planted.interaction->first),
                 require_feature(schema, planted.interaction->second));
    if (pair->first == pair->second) {
      fail(ErrorKind::Schema, "interaction needs two distinct features");
    }
  }

  const std::size_t n_features = schema.size();
  std::vector<NumericBase> bases(n_features, NumericBase{0.0, 1.0});
  for (std::size_t i = 0; i < n_features; ++i) {
    if (schema.feature(i).kind == FeatureKind::Numerical) bases[i] = numeric_base(schema.feature(i).name);
  }

  SyntheticCohort out;
  out.cohort.schema = schema;
  out.cohort.provenance = "synthetic";
  out.cohort.samples.reserve(settings.n);
  out.planted_features = planted.planted_features();
  out.signal = planted;

  std::vector<double> centred(n_features, 0.0);
  for (std::size_t r = 0; r < settings.n; ++r) {
    Sample s = make_empty_sample(schema);
    for (std::size_t i = 0; i < n_features; ++i) {
      const auto& f = schema.feature(i);
      const std::size_t slot = schema.slot(i);
      switch (f.kind) {
        case FeatureKind::Numerical: {
          const double z = gaussian(rng, 0.0, 1.0);
          s.numerical[slot] = bases[i].mean + bases[i].stddev * z;
          centred[i] = z;
          break;
        }
        case FeatureKind::Categorical: {
          const std::size_t card = f.cardinality();
          const std::size_t idx = rng.next_index(card);
          s.categorical[slot] = static_cast<int>(idx);
          centred[i] = 2.0 * static_cast<double>(idx) / static_cast<double>(card - 1) - 1.0;
          break;
        }
        case FeatureKind::Binary: {
          const int bit = rng.next_unit() < 0.5 ? 1 : 0;
          s.binary[slot] = bit;
          centred[i] = bit ? 1.0 : -1.0;
          break;
        }
      }
    }

    double score = planted.intercept;
    for (const auto& [idx, weight] : effects) score += weight * centred[idx];
    if (pair) score -= planted.interaction->weight * centred[pair->first] * centred[pair->second];
    score += gaussian(rng, 0.0, planted.noise_stddev);
    s.label = rng.next_unit() < sigmoid(score) ? 1 : 0;

    if (settings.missing_rate > 0.0) {
      for (std::size_t i = 0; i < n_features; ++i) {
        if (rng.next_unit() >= settings.missing_rate) continue;
        const std::size_t slot = schema.slot(i);
        switch (schema.feature(i).kind) {
          case FeatureKind::Numerical: s.numerical[slot] = std::nan(""); break;
          case FeatureKind::Categorical: s.categorical[slot] = kMissingIndex; break;
          case FeatureKind::Binary: s.binary[slot] = kMissingIndex; break;
        }
      }
    }
    out.cohort.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace tabattn
