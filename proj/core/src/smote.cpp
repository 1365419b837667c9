#include <algorithm>
#include <map>
#include <numeric>

#include "tabattn/data.hpp"
#include "tabattn/error.hpp"

namespace tabattn {
namespace {

// Majority vote over neighbour values; ties prefer the base value, then the
// smallest value.
int vote(const std::vector<int>& values, int base_value) {
  std::map<int, std::size_t> tally;
  for (int v : values) ++tally[v];
  std::size_t best = 0;
  for (const auto& [v, c] : tally) best = std::max(best, c);
  if (auto it = tally.find(base_value); it != tally.end() && it->second == best) return base_value;
  for (const auto& [v, c] : tally) {
    if (c == best) return v;
  }
  return base_value;
}

}  // namespace

double mixed_distance_sq(const Sample& a, const Sample& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.numerical.size(); ++j) {
    const double diff = a.numerical[j] - b.numerical[j];
    d += diff * diff;
  }
  for (std::size_t j = 0; j < a.categorical.size(); ++j) d += a.categorical[j] != b.categorical[j];
  for (std::size_t j = 0; j < a.binary.size(); ++j) d += a.binary[j] != b.binary[j];
  return d;
}

SmoteResult smote_traced(const Cohort& cohort, std::size_t k_neighbors, RandomSource& rng) {
  const std::size_t positives = cohort.count_label(1);
  const std::size_t negatives = cohort.size() - positives;
  if (positives == 0 || negatives == 0) {
    fail(ErrorKind::Domain, "SMOTE needs both classes; cohort is single-class");
  }
  if (k_neighbors == 0) fail(ErrorKind::Parameter, "SMOTE needs k_neighbors >= 1");
  SmoteResult result{cohort, {}};
  if (positives == negatives) return result;

  const int minority_label = positives < negatives ? 1 : 0;
  const std::size_t deficit = std::max(positives, negatives) - std::min(positives, negatives);
  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (cohort.samples[i].label == minority_label) minority.push_back(i);
  }
  if (minority.size() <= k_neighbors) {
    fail(ErrorKind::Parameter, "SMOTE needs more than k=" + std::to_string(k_neighbors) +
                                   " minority samples, found " + std::to_string(minority.size()));
  }

  // k nearest minority neighbours of each minority sample, ties by index.
  const std::size_t m = minority.size();
  std::vector<std::vector<std::size_t>> neighbours(m);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t a = 0; a < m; ++a) {
    dist.clear();
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      dist.emplace_back(
          mixed_distance_sq(cohort.samples[minority[a]], cohort.samples[minority[b]]), b);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_neighbors),
                      dist.end());
    for (std::size_t j = 0; j < k_neighbors; ++j) neighbours[a].push_back(dist[j].second);
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> values(k_neighbors);
  result.cohort.samples.reserve(cohort.size() + deficit);
  result.origins.reserve(deficit);

  for (std::size_t made = 0; made < deficit; ++made) {
    if (made % m == 0) shuffle(order, rng);
    const std::size_t a = order[made % m];
    const std::size_t b = neighbours[a][rng.next_index(k_neighbors)];
    const double gap = rng.next_unit();
    const Sample& base = cohort.samples[minority[a]];
    const Sample& other = cohort.samples[minority[b]];

    Sample synth = base;
    synth.synthetic = true;
    for (std::size_t j = 0; j < base.numerical.size(); ++j) {
      synth.numerical[j] = base.numerical[j] + gap * (other.numerical[j] - base.numerical[j]);
    }
    for (std::size_t j = 0; j < base.categorical.size(); ++j) {
      for (std::size_t q = 0; q < k_neighbors; ++q) {
        values[q] = cohort.samples[minority[neighbours[a][q]]].categorical[j];
      }
      synth.categorical[j] = vote(values, base.categorical[j]);
    }
    for (std::size_t j = 0; j < base.binary.size(); ++j) {
      for (std::size_t q = 0; q < k_neighbors; ++q) {
        values[q] = cohort.samples[minority[neighbours[a][q]]].binary[j];
      }
      synth.binary[j] = vote(values, base.binary[j]);
    }
    result.cohort.samples.push_back(std::move(synth));
    result.origins.push_back({minority[a], minority[b], gap});
  }
  result.cohort.provenance = "oversampled";
  return result;
}

Cohort smote(const Cohort& cohort, std::size_t k_neighbors, RandomSource& rng) {
  return smote_traced(cohort, k_neighbors, rng).cohort;
}

}  // namespace tabattn
