#pragma once

// Internal JSON helpers shared by the schema, artifact and interpret writers.

#include <json.hpp>

#include "tabattn/data.hpp"
#include "tabattn/error.hpp"
#include "tabattn/numerics.hpp"

namespace tabattn::detail {

using json = nlohmann::json;

json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const json& j);

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

template <class T>
T require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorKind::Format, std::string("missing JSON field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("bad JSON field '") + key + "': " + e.what());
  }
}

}  // namespace tabattn::detail
