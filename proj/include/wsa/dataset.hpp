#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wsa/error.hpp"
#include "wsa/tokenize.hpp"

namespace wsa {

struct LabeledDocument {
  std::string id;
  std::string raw_text;
  std::vector<std::string> tokens;
  int gold_label = 0;
};

namespace detail {

// Minimal RFC-4180-ish row parser: quoted fields, "" escapes, commas in quotes.
inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline int parse_label(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size() || v < 0) throw format_error("");
    return v;
  } catch (...) {
    throw format_error(where + ": bad label value '" + s + "'");
  }
}

}  // namespace detail

struct DatasetSummary {
  std::size_t documents = 0;
  std::size_t skipped_empty = 0;
  int classes = 0;
  double avg_tokens = 0.0;
};

// CSV (header with text,label columns) or JSONL ({"text":..,"label":..}).
// Labels must be 0-based contiguous ints. Documents that tokenize to nothing
// are skipped with a warning.
inline std::vector<LabeledDocument> load_dataset(const std::string& path,
                                                 const std::string& format,
                                                 DatasetSummary* summary = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open dataset: " + path);

  std::vector<std::pair<std::string, int>> rows;
  std::string line;
  std::size_t line_no = 0;
  if (format == "jsonl") {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!j.contains("text") || !j.contains("label"))
        throw format_error(path + ":" + std::to_string(line_no) +
                           ": missing text/label key");
      if (!j["label"].is_number_integer() || j["label"].get<int>() < 0)
        throw format_error(path + ":" + std::to_string(line_no) + ": bad label value");
      rows.emplace_back(j["text"].get<std::string>(), j["label"].get<int>());
    }
  } else if (format == "csv") {
    if (!std::getline(in, line)) throw format_error(path + ": empty dataset");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_csv_row(line);
    int text_col = -1, label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == "text") text_col = static_cast<int>(i);
      if (header[i] == "label") label_col = static_cast<int>(i);
    }
    if (text_col < 0 || label_col < 0)
      throw format_error(path + ": CSV header must contain text and label columns");
    line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = detail::split_csv_row(line);
      if (static_cast<int>(fields.size()) <= std::max(text_col, label_col))
        throw format_error(path + ":" + std::to_string(line_no) + ": short row");
      rows.emplace_back(fields[text_col],
                        detail::parse_label(fields[label_col],
                                            path + ":" + std::to_string(line_no)));
    }
  } else {
    throw format_error("unknown dataset format: " + format);
  }
  if (rows.empty()) throw format_error(path + ": empty dataset");

  std::set<int> labels;
  for (const auto& [text, label] : rows) labels.insert(label);
  int classes = *labels.rbegin() + 1;
  if (static_cast<int>(labels.size()) != classes || *labels.begin() != 0)
    throw format_error(path + ": labels must be contiguous 0-based ints, saw max " +
                       std::to_string(*labels.rbegin()) + " over " +
                       std::to_string(labels.size()) + " distinct values");

  std::vector<LabeledDocument> docs;
  docs.reserve(rows.size());
  std::size_t skipped = 0;
  std::size_t total_tokens = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    LabeledDocument d;
    d.id = std::to_string(docs.size());
    d.raw_text = rows[i].first;
    d.tokens = tokenize(d.raw_text);
    d.gold_label = rows[i].second;
    if (d.tokens.empty()) {
      std::cerr << "warning: " << path << ": row " << i
                << " tokenizes to nothing, skipped\n";
      ++skipped;
      continue;
    }
    total_tokens += d.tokens.size();
    docs.push_back(std::move(d));
  }
  if (docs.empty()) throw format_error(path + ": no non-empty documents");
  if (summary) {
    summary->documents = docs.size();
    summary->skipped_empty = skipped;
    summary->classes = classes;
    summary->avg_tokens = static_cast<double>(total_tokens) / docs.size();
  }
  return docs;
}

}  // namespace wsa
