#pragma once

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "tabattn/data.hpp"
#include "tabattn/error.hpp"
#include "tabattn/model.hpp"

#define CHECK_ERROR_KIND(expr, expected_kind)                     \
  do {                                                            \
    bool tabattn_caught_ = false;                                 \
    try {                                                         \
      (void)(expr);                                               \
    } catch (const ::tabattn::Error& tabattn_e_) {                \
      tabattn_caught_ = true;                                     \
      CHECK_MESSAGE(tabattn_e_.kind() == (expected_kind), tabattn_e_.what()); \
    }                                                             \
    CHECK_MESSAGE(tabattn_caught_, "expected a tabattn::Error");  \
  } while (0)

namespace testing {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tabattn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline tabattn::FeatureDescriptor numerical(std::string name) {
  return {std::move(name), tabattn::FeatureKind::Numerical, {}, ""};
}
inline tabattn::FeatureDescriptor binary(std::string name) {
  return {std::move(name), tabattn::FeatureKind::Binary, {}, ""};
}
inline tabattn::FeatureDescriptor categorical(std::string name, std::vector<std::string> cats) {
  return {std::move(name), tabattn::FeatureKind::Categorical, std::move(cats), ""};
}

/// Cohort whose only feature is one numerical column.
inline tabattn::Cohort numeric_cohort(const std::vector<double>& values, const std::vector<int>& labels) {
  tabattn::Cohort c;
  c.schema = tabattn::FeatureSchema({numerical("x")}, "y");
  for (std::size_t i = 0; i < values.size(); ++i) {
    tabattn::Sample s = tabattn::make_empty_sample(c.schema);
    s.numerical[0] = values[i];
    s.label = labels[i];
    c.samples.push_back(s);
  }
  return c;
}

}  // namespace testing
