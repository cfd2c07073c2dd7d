#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "graphcache/common.hpp"

namespace graphcache {

// One labeled sentence: tokens, subject/object spans (inclusive-exclusive
// token ranges), optional entity types (empty string = absent), relation.
struct Instance {
  int id = 0;
  std::vector<std::string> tokens;
  int subj_start = 0, subj_end = 0;
  int obj_start = 0, obj_end = 0;
  std::string subj_type;
  std::string obj_type;
  std::string relation;

  bool has_types() const { return !subj_type.empty() && !obj_type.empty(); }

  std::string span_text(int start, int end) const {
    std::string s;
    for (int i = start; i < end; ++i) {
      if (i > start) s += ' ';
      s += tokens[static_cast<std::size_t>(i)];
    }
    return s;
  }
  std::string subj_text() const { return span_text(subj_start, subj_end); }
  std::string obj_text() const { return span_text(obj_start, obj_end); }

  bool operator==(const Instance& o) const = default;
};

struct Dataset {
  std::vector<Instance> instances;
  std::vector<std::string> labels;  // sorted, unique
  std::string negative_label;
  bool has_types = false;

  std::size_t size() const { return instances.size(); }

  int label_index(const std::string& label) const {
    auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label) return -1;
    return static_cast<int>(it - labels.begin());
  }

  bool operator==(const Dataset& o) const = default;
};

// Ordered pair key "subj_type→obj_type"; absent unless both types exist.
// Order matters: the relation is directional.
inline std::optional<std::string> entity_type_key(const Instance& inst) {
  if (!inst.has_types()) return std::nullopt;
  return inst.subj_type + "→" + inst.obj_type;
}

namespace detail {

inline void validate_spans(const Instance& inst) {
  const int n = static_cast<int>(inst.tokens.size());
  auto bad = [&](const char* which) {
    throw DataError("instance " + std::to_string(inst.id) + ": " + which +
                    " span out of range");
  };
  if (inst.subj_start < 0 || inst.subj_start >= inst.subj_end ||
      inst.subj_end > n)
    bad("subject");
  if (inst.obj_start < 0 || inst.obj_start >= inst.obj_end || inst.obj_end > n)
    bad("object");
  if (inst.subj_start < inst.obj_end && inst.obj_start < inst.subj_end)
    throw DataError("instance " + std::to_string(inst.id) +
                    ": subject and object spans overlap");
}

// Negative-label autodetection: no_relation, then Other, then the
// lexicographically first label. An explicit override wins.
inline std::string pick_negative(const std::vector<std::string>& labels,
                                 const std::string& override_label) {
  if (!override_label.empty()) {
    if (!std::binary_search(labels.begin(), labels.end(), override_label))
      throw DataError("negative label '" + override_label +
                      "' not present in dataset");
    return override_label;
  }
  if (std::binary_search(labels.begin(), labels.end(),
                         std::string("no_relation")))
    return "no_relation";
  if (std::binary_search(labels.begin(), labels.end(), std::string("Other")))
    return "Other";
  return labels.front();
}

}  // namespace detail

// Recomputes labels (sorted unique), has_types, and the negative label from
// the instances currently present.
inline void finalize_dataset(Dataset& ds,
                             const std::string& negative_override = "") {
  if (ds.instances.empty()) throw DataError("empty dataset");
  std::vector<std::string> labels;
  bool typed = true;
  for (const auto& inst : ds.instances) {
    labels.push_back(inst.relation);
    typed = typed && inst.has_types();
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  ds.labels = std::move(labels);
  ds.has_types = typed;
  ds.negative_label = detail::pick_negative(ds.labels, negative_override);
}

// Reads one JSON object per line: token, subj_start, subj_end, obj_start,
// obj_end, relation, optional subj_type / obj_type. Span ends are exclusive.
inline Dataset load_jsonl(const std::string& path,
                          const std::string& negative_override = "") {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) +
                      ": malformed JSON: " + e.what());
    }
    Instance inst;
    inst.id = static_cast<int>(ds.instances.size());
    try {
      for (const auto& t : j.at("token")) {
        inst.tokens.push_back(t.get<std::string>());
      }
      inst.subj_start = j.at("subj_start").get<int>();
      inst.subj_end = j.at("subj_end").get<int>();
      inst.obj_start = j.at("obj_start").get<int>();
      inst.obj_end = j.at("obj_end").get<int>();
      inst.relation = j.at("relation").get<std::string>();
      if (j.contains("subj_type")) inst.subj_type = j["subj_type"].get<std::string>();
      if (j.contains("obj_type")) inst.obj_type = j["obj_type"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (inst.tokens.empty())
      throw DataError("line " + std::to_string(lineno) + ": no tokens");
    detail::validate_spans(inst);
    ds.instances.push_back(std::move(inst));
  }
  finalize_dataset(ds, negative_override);
  return ds;
}

inline nlohmann::ordered_json instance_to_json(const Instance& inst) {
  nlohmann::ordered_json j;
  j["token"] = inst.tokens;
  j["subj_start"] = inst.subj_start;
  j["subj_end"] = inst.subj_end;
  j["obj_start"] = inst.obj_start;
  j["obj_end"] = inst.obj_end;
  if (!inst.subj_type.empty()) j["subj_type"] = inst.subj_type;
  if (!inst.obj_type.empty()) j["obj_type"] = inst.obj_type;
  j["relation"] = inst.relation;
  return j;
}

inline void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  for (const auto& inst : ds.instances) out << instance_to_json(inst).dump() << '\n';
}

// Content hash over the canonical JSONL serialization.
inline std::uint64_t dataset_fingerprint(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& inst : ds.instances) {
    std::string line = instance_to_json(inst).dump();
    line += '\n';
    h = fnv1a64(line.data(), line.size(), h);
  }
  return h;
}

// Word index. Index 0 is reserved for unknown words; kept words get indices
// >= 1 by descending corpus frequency, ties broken lexicographically.
struct Vocabulary {
  static constexpr int kUnk = 0;

  std::unordered_map<std::string, int> index;
  std::vector<std::string> words;  // index -> word; words[0] is the UNK slot
  int min_count = 1;

  std::size_t size() const { return words.size(); }

  int lookup(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? kUnk : it->second;
  }
};

inline Vocabulary build_vocab(const Dataset& ds, int min_count) {
  if (min_count < 1) throw DataError("min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& inst : ds.instances)
    for (const auto& tok : inst.tokens) ++freq[tok];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [w, c] : freq)
    if (c >= static_cast<std::size_t>(min_count)) kept.emplace_back(w, c);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_count = min_count;
  v.words.push_back("<unk>");
  for (const auto& [w, c] : kept) {
    v.index.emplace(w, static_cast<int>(v.words.size()));
    v.words.push_back(w);
  }
  return v;
}

}  // namespace graphcache
