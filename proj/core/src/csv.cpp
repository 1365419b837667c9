#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "tabattn/data.hpp"
#include "tabattn/error.hpp"

namespace tabattn {
namespace {

using Record = std::vector<std::string>;

// RFC 4180 reader: quoted fields may hold commas, doubled quotes and newlines.
std::vector<Record> read_records(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<Record> records;
  Record current;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;

  auto end_field = [&] {
    current.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(current.size() == 1 && current.front().empty())) records.push_back(std::move(current));
    current.clear();
  };

  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      // tolerated as part of CRLF
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) fail(ErrorKind::Format, "CSV ends inside a quoted field");
  if (!field.empty() || !current.empty()) end_record();
  return records;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Cohort parse_csv(std::istream& in, const FeatureSchema& schema) {
  const auto records = read_records(in);
  if (records.empty()) fail(ErrorKind::Format, "CSV has no header row");

  const Record& header = records.front();
  const std::size_t n = schema.size();
  // column -> feature index; n denotes the label column
  std::vector<std::size_t> column_feature(header.size(), n + 1);
  std::vector<bool> seen(n + 1, false);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name{trim(header[c])};
    std::size_t target;
    if (name == schema.label_name()) {
      target = n;
    } else if (auto idx = schema.index_of(name)) {
      target = *idx;
    } else {
      fail(ErrorKind::Format, "CSV header names unknown column '" + name + "'");
    }
    if (seen[target]) fail(ErrorKind::Format, "CSV header repeats column '" + name + "'");
    seen[target] = true;
    column_feature[c] = target;
  }
  for (std::size_t i = 0; i <= n; ++i) {
    if (!seen[i]) {
      const std::string name = i == n ? schema.label_name() : schema.feature(i).name;
      fail(ErrorKind::Format, "CSV header is missing column '" + name + "'");
    }
  }

  Cohort cohort;
  cohort.schema = schema;
  cohort.provenance = "raw";
  cohort.samples.reserve(records.size() - 1);

  for (std::size_t r = 1; r < records.size(); ++r) {
    const Record& rec = records[r];
    const std::string where = "row " + std::to_string(r);
    if (rec.size() != header.size()) {
      fail(ErrorKind::Parse, where + ": expected " + std::to_string(header.size()) +
                                 " fields, found " + std::to_string(rec.size()));
    }
    Sample s = make_empty_sample(schema);
    for (std::size_t c = 0; c < rec.size(); ++c) {
      const std::string_view cell = trim(rec[c]);
      const std::size_t target = column_feature[c];
      if (target == n) {
        if (cell == "0" || cell == "1") {
          s.label = cell == "1" ? 1 : 0;
        } else {
          fail(ErrorKind::Parse, where + ", column '" + schema.label_name() +
                                     "': label must be 0 or 1, got '" + std::string(cell) + "'");
        }
        continue;
      }
      if (cell.empty()) continue;  // missing marker
      const auto& f = schema.feature(target);
      const std::size_t slot = schema.slot(target);
      const std::string col = ", column '" + f.name + "'";
      switch (f.kind) {
        case FeatureKind::Numerical: {
          double v = 0.0;
          auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
          if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
            fail(ErrorKind::Parse,
                 where + col + ": not a finite number: '" + std::string(cell) + "'");
          }
          s.numerical[slot] = v;
          break;
        }
        case FeatureKind::Categorical: {
          const auto& cats = f.categories;
          auto it = std::find(cats.begin(), cats.end(), cell);
          if (it == cats.end()) {
            fail(ErrorKind::Parse, where + col + ": unknown category '" + std::string(cell) + "'");
          }
          s.categorical[slot] = static_cast<int>(it - cats.begin());
          break;
        }
        case FeatureKind::Binary: {
          if (cell != "0" && cell != "1") {
            fail(ErrorKind::Parse,
                 where + col + ": binary value must be 0 or 1, got '" + std::string(cell) + "'");
          }
          s.binary[slot] = cell == "1" ? 1 : 0;
          break;
        }
      }
    }
    cohort.samples.push_back(std::move(s));
  }
  return cohort;
}

Cohort load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open CSV file " + path.string());
  return parse_csv(in, schema);
}

void write_csv(std::ostream& out, const Cohort& cohort) {
  const FeatureSchema& schema = cohort.schema;
  for (std::size_t i = 0; i < schema.size(); ++i) out << quote_if_needed(schema.feature(i).name) << ',';
  out << quote_if_needed(schema.label_name()) << '\n';
  for (const Sample& s : cohort.samples) {
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const auto& f = schema.feature(i);
      const std::size_t slot = schema.slot(i);
      switch (f.kind) {
        case FeatureKind::Numerical:
          if (!std::isnan(s.numerical[slot])) out << format_double(s.numerical[slot]);
          break;
        case FeatureKind::Categorical:
          if (s.categorical[slot] != kMissingIndex) {
            out << quote_if_needed(f.categories.at(static_cast<std::size_t>(s.categorical[slot])));
          }
          break;
        case FeatureKind::Binary:
          if (s.binary[slot] != kMissingIndex) out << s.binary[slot];
          break;
      }
      out << ',';
    }
    out << s.label << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const Cohort& cohort) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write CSV file " + path.string());
  write_csv(out, cohort);
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace tabattn
