#pragma once

// Prediction log: a one-line JSON header followed by one tab-separated row per
// (model, example):
//
//   {"format":"bvdual.prediction_log","version":1,"n_models":2,"n_examples":1,
//    "n_classes":2,"generator":"kl","tags":["seed","train_id","group"]}
//   model  example  seed  train_id  group  v_0 ... v_{c-1}
//
// For generator "kl" the values are log-probabilities (each row has
// logsumexp = 0 within 1e-6); for "mse" they are raw coordinates. An empty
// group field means "no group". Values are written in shortest round-trip form.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bvdual/error.hpp"
#include "bvdual/numeric.hpp"
#include "bvdual/pool.hpp"
#include "bvdual/report.hpp"

namespace bvdual {

inline constexpr std::string_view kLogFormat = "bvdual.prediction_log";

struct PredictionLog {
  std::string generator = "kl";
  PredictionPool pool;

  bool operator==(const PredictionLog&) const = default;
};

inline std::string write_prediction_log(const PredictionLog& log) {
  const PredictionPool& pool = log.pool;
  if (log.generator != "kl" && log.generator != "mse") {
    throw UsageError("prediction log generator must be kl or mse");
  }
  nlohmann::ordered_json header;
  header["format"] = kLogFormat;
  header["version"] = 1;
  header["n_models"] = pool.n_models();
  header["n_examples"] = pool.n_examples();
  header["n_classes"] = pool.n_classes();
  header["generator"] = log.generator;
  header["tags"] = {"seed", "train_id", "group"};

  std::string out = header.dump() + "\n";
  for (std::size_t m = 0; m < pool.n_models(); ++m) {
    const Provenance& tag = pool.tags[m];
    for (std::string_view field : {std::string_view(tag.train_id),
                                   std::string_view(tag.group ? *tag.group : std::string())}) {
      if (field.find_first_of("\t\n\r") != std::string_view::npos) {
        throw UsageError("tag values may not contain tabs or newlines");
      }
    }
    if (tag.group && tag.group->empty()) throw UsageError("group tags may not be empty strings");
    const std::string prefix = std::to_string(tag.seed) + '\t' + tag.train_id + '\t' +
                               (tag.group ? *tag.group : std::string());
    for (std::size_t e = 0; e < pool.n_examples(); ++e) {
      out += std::to_string(m);
      out += '\t';
      out += std::to_string(e);
      out += '\t';
      out += prefix;
      for (double v : pool.models[m].row(e)) {
        out += '\t';
        out += format_number(v, 0);
      }
      out += '\n';
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, const std::string& source, std::size_t line, const char* what) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ParseError(source, line, std::string("invalid ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

inline std::size_t header_size(const nlohmann::json& h, const char* key) {
  if (!h.contains(key) || !h[key].is_number_unsigned()) {
    throw SchemaError(std::string("header field '") + key + "' missing or not a non-negative integer");
  }
  return h[key].get<std::size_t>();
}

}  // namespace detail

inline PredictionLog read_prediction_log(std::string_view text, const std::string& source = "<log>") {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, 1, std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || header.value("format", "") != kLogFormat) {
    throw SchemaError("header 'format' must be \"" + std::string(kLogFormat) + "\"");
  }
  if (header.value("version", 0) != 1) throw SchemaError("unsupported prediction log version");
  const std::size_t n_models = detail::header_size(header, "n_models");
  const std::size_t n_examples = detail::header_size(header, "n_examples");
  const std::size_t n_classes = detail::header_size(header, "n_classes");
  if (n_models == 0 || n_examples == 0 || n_classes == 0) {
    throw SchemaError("header counts must be positive");
  }
  PredictionLog log;
  log.generator = header.value("generator", "");
  if (log.generator != "kl" && log.generator != "mse") {
    throw SchemaError("header 'generator' must be \"kl\" or \"mse\"");
  }

  log.pool.models.assign(n_models, Predictions(n_examples, n_classes));
  log.pool.tags.assign(n_models, Provenance{});
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (rows == n_models * n_examples) {
      throw SchemaError("file has more rows than the header's " + std::to_string(rows));
    }
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 5 + n_classes) {
      throw ParseError(source, lineno, "expected " + std::to_string(5 + n_classes) + " fields, got " +
                                           std::to_string(fields.size()));
    }
    const auto m = detail::parse_number<std::size_t>(fields[0], source, lineno, "model index");
    const auto e = detail::parse_number<std::size_t>(fields[1], source, lineno, "example index");
    if (m != rows / n_examples || e != rows % n_examples) {
      throw ParseError(source, lineno, "rows must be ordered by model then example");
    }
    Provenance tag;
    tag.seed = detail::parse_number<std::int64_t>(fields[2], source, lineno, "seed");
    tag.train_id = std::string(fields[3]);
    if (!fields[4].empty()) tag.group = std::string(fields[4]);
    if (e == 0) {
      log.pool.tags[m] = tag;
    } else if (!(log.pool.tags[m] == tag)) {
      throw ParseError(source, lineno, "tags differ between rows of the same model");
    }
    auto row = log.pool.models[m].row(e);
    for (std::size_t j = 0; j < n_classes; ++j) {
      row[j] = detail::parse_number<double>(fields[5 + j], source, lineno, "value");
    }
    if (!all_finite(row)) throw ParseError(source, lineno, "non-finite value");
    if (log.generator == "kl" && std::abs(logsumexp(row)) > 1e-6) {
      throw ParseError(source, lineno, "log-probabilities do not normalize (logsumexp = " +
                                           format_number(logsumexp(row)) + ")");
    }
    ++rows;
  }
  if (rows != n_models * n_examples) {
    throw SchemaError("header declares " + std::to_string(n_models * n_examples) + " rows, file has " +
                      std::to_string(rows));
  }
  return log;
}

/// One non-negative class index per line; blank lines and '#' comments are skipped.
inline std::vector<int> read_labels(std::string_view text, const std::string& source = "<labels>") {
  std::vector<int> labels;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) {
      line.remove_suffix(1);
    }
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (!line.empty()) {
      const int v = detail::parse_number<int>(line, source, lineno, "class index");
      if (v < 0) throw ParseError(source, lineno, "class index must be non-negative");
      labels.push_back(v);
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return labels;
}

inline std::string write_labels(std::span<const int> labels) {
  std::string out;
  for (int y : labels) out += std::to_string(y) + "\n";
  return out;
}

}  // namespace bvdual
