#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json_io.hpp"
#include "tabattn/data.hpp"
#include "tabattn/error.hpp"

namespace tabattn {

std::string_view to_string(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::Numerical: return "numerical";
    case FeatureKind::Categorical: return "categorical";
    case FeatureKind::Binary: return "binary";
  }
  return "numerical";
}

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "numerical") return FeatureKind::Numerical;
  if (text == "categorical") return FeatureKind::Categorical;
  if (text == "binary") return FeatureKind::Binary;
  fail(ErrorKind::Schema, "unknown feature kind '" + std::string(text) + "'");
}

std::size_t FeatureDescriptor::cardinality() const noexcept {
  switch (kind) {
    case FeatureKind::Numerical: return 0;
    case FeatureKind::Categorical: return categories.size();
    case FeatureKind::Binary: return 2;
  }
  return 0;
}

FeatureSchema::FeatureSchema(std::vector<FeatureDescriptor> features, std::string label_name)
    : features_(std::move(features)), label_name_(std::move(label_name)) {
  if (features_.empty()) fail(ErrorKind::Schema, "schema declares no features");
  if (label_name_.empty()) fail(ErrorKind::Schema, "schema label name is empty");
  std::unordered_set<std::string> seen;
  std::size_t counts[3] = {0, 0, 0};
  slots_.reserve(features_.size());
  for (const auto& f : features_) {
    if (f.name.empty()) fail(ErrorKind::Schema, "feature with empty name");
    if (!seen.insert(f.name).second || f.name == label_name_) {
      fail(ErrorKind::Schema, "duplicate feature name '" + f.name + "'");
    }
    if (f.kind == FeatureKind::Categorical && f.categories.size() < 2) {
      fail(ErrorKind::Schema, "categorical feature '" + f.name + "' needs >= 2 categories");
    }
    if (f.kind != FeatureKind::Categorical && !f.categories.empty()) {
      fail(ErrorKind::Schema, "feature '" + f.name + "' is not categorical but lists categories");
    }
    slots_.push_back(counts[static_cast<int>(f.kind)]++);
  }
}

FeatureSchema FeatureSchema::default_schema() {
  using K = FeatureKind;
  auto num = [](std::string name, std::string unit) {
    return FeatureDescriptor{std::move(name), K::Numerical, {}, std::move(unit)};
  };
  auto cat = [](std::string name, std::vector<std::string> cats) {
    return FeatureDescriptor{std::move(name), K::Categorical, std::move(cats), {}};
  };
  auto bin = [](std::string name) { return FeatureDescriptor{std::move(name), K::Binary, {}, {}}; };

  std::vector<FeatureDescriptor> f = {
      num("Age", "years"),
      cat("SmokingStatus", {"Never", "Previous", "Current"}),
      bin("Gender"),
      num("SurgicalTime", "minutes"),
      cat("IntravesicalTreatment",
          {"None", "BCG Induction Only", "BCG Induction and Maintenance"}),
      bin("PTA"),
      num("TotalDaysInHospital", "days"),
      num("TotalCigarettesSmoked", "thousands"),
      num("TumourDiameter", "cm"),
      cat("TumourGrade", {"G1", "G2", "G3"}),
      cat("TumourStage", {"Ta", "T1", "CIS"}),
      cat("TumourNumberCategory", {"Single", "2-7", "8+"}),
      cat("EQ5DBand", {"Low", "Medium", "High"}),
      bin("Diabetes"),
      bin("Hypertension"),
      bin("CardiovascularDisease"),
      bin("ChronicKidneyDisease"),
      bin("PreviousCancer"),
      bin("ConcomitantCIS"),
      bin("RepeatResection"),
      bin("PerioperativeChemotherapy"),
      bin("DetrusorMuscleSampled"),
      bin("FamilyHistory"),
  };
  return FeatureSchema(std::move(f), "Recurrence");
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::count(FeatureKind kind) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      features_.begin(), features_.end(), [kind](const auto& f) { return f.kind == kind; }));
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

std::string FeatureSchema::to_json() const { return detail::schema_to_json(*this).dump(2); }

FeatureSchema FeatureSchema::from_json(std::string_view text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    fail(ErrorKind::Format, std::string("schema JSON: ") + e.what());
  }
  return detail::schema_from_json(j);
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open schema file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

bool Sample::has_missing() const noexcept {
  return std::any_of(numerical.begin(), numerical.end(), [](double v) { return std::isnan(v); }) ||
         std::find(categorical.begin(), categorical.end(), kMissingIndex) != categorical.end() ||
         std::find(binary.begin(), binary.end(), kMissingIndex) != binary.end();
}

bool Sample::operator==(const Sample& other) const {
  if (numerical.size() != other.numerical.size()) return false;
  for (std::size_t i = 0; i < numerical.size(); ++i) {
    const double a = numerical[i];
    const double b = other.numerical[i];
    if (!(a == b || (std::isnan(a) && std::isnan(b)))) return false;
  }
  return categorical == other.categorical && binary == other.binary && label == other.label &&
         synthetic == other.synthetic;
}

Sample make_empty_sample(const FeatureSchema& schema) {
  Sample s;
  s.numerical.assign(schema.count(FeatureKind::Numerical), std::nan(""));
  s.categorical.assign(schema.count(FeatureKind::Categorical), kMissingIndex);
  s.binary.assign(schema.count(FeatureKind::Binary), kMissingIndex);
  return s;
}

std::size_t Cohort::count_label(int label) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [label](const Sample& s) { return s.label == label; }));
}

void Cohort::validate() const {
  const std::size_t n_num = schema.count(FeatureKind::Numerical);
  const std::size_t n_cat = schema.count(FeatureKind::Categorical);
  const std::size_t n_bin = schema.count(FeatureKind::Binary);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const Sample& s = samples[r];
    const std::string where = "sample " + std::to_string(r);
    if (s.numerical.size() != n_num || s.categorical.size() != n_cat || s.binary.size() != n_bin) {
      fail(ErrorKind::Schema, where + " does not match the schema layout");
    }
    if (s.label != 0 && s.label != 1) fail(ErrorKind::Schema, where + " has a non-binary label");
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const auto& f = schema.feature(i);
      const std::size_t slot = schema.slot(i);
      if (f.kind == FeatureKind::Categorical) {
        const int v = s.categorical[slot];
        if (v != kMissingIndex && (v < 0 || static_cast<std::size_t>(v) >= f.cardinality())) {
          fail(ErrorKind::Schema, where + ": category index out of range for " + f.name);
        }
      } else if (f.kind == FeatureKind::Binary) {
        const int v = s.binary[slot];
        if (v != kMissingIndex && v != 0 && v != 1) {
          fail(ErrorKind::Schema, where + ": non-binary value for " + f.name);
        }
      }
    }
  }
}

namespace detail {

json schema_to_json(const FeatureSchema& schema) {
  json features = json::array();
  for (const auto& f : schema.features()) {
    json entry = {{"name", f.name}, {"kind", std::string(to_string(f.kind))}};
    if (f.kind == FeatureKind::Categorical) entry["categories"] = f.categories;
    if (!f.unit.empty()) entry["unit"] = f.unit;
    features.push_back(std::move(entry));
  }
  return json{{"label", schema.label_name()}, {"features", std::move(features)}};
}

FeatureSchema schema_from_json(const json& j) {
  if (!j.is_object() || !j.contains("features") || !j["features"].is_array()) {
    fail(ErrorKind::Format, "schema JSON needs a 'features' array");
  }
  std::vector<FeatureDescriptor> features;
  for (const auto& entry : j["features"]) {
    FeatureDescriptor f;
    f.name = require<std::string>(entry, "name");
    f.kind = parse_feature_kind(require<std::string>(entry, "kind"));
    if (entry.contains("categories")) f.categories = require<std::vector<std::string>>(entry, "categories");
    if (entry.contains("unit")) f.unit = require<std::string>(entry, "unit");
    features.push_back(std::move(f));
  }
  std::string label = j.contains("label") ? require<std::string>(j, "label") : "label";
  return FeatureSchema(std::move(features), std::move(label));
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorKind::Format, "matrix JSON must be an array of rows");
  std::vector<Vector> rows;
  try {
    for (const auto& r : j) rows.push_back(r.get<Vector>());
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("matrix JSON: ") + e.what());
  }
  if (rows.empty()) return {};
  return Matrix::from_rows(rows);
}

}  // namespace detail
}  // namespace tabattn
