#pragma once

#include <map>
#include <string>
#include <vector>

#include "graphcache/common.hpp"

namespace graphcache {

// Micro precision/recall/F1 over the non-negative labels, the standard
// relation-extraction convention: the designated negative class counts
// neither as a prediction nor as a gold positive.
struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;

  struct LabelCount {
    std::size_t gold = 0;
    std::size_t predicted = 0;
    std::size_t correct = 0;
  };
  std::map<std::string, LabelCount> per_label;
};

inline MetricsReport compute_metrics(const std::vector<std::string>& gold,
                                     const std::vector<std::string>& pred,
                                     const std::string& negative_label) {
  if (gold.size() != pred.size())
    throw InvariantError("gold/prediction length mismatch");
  MetricsReport r;
  r.n = gold.size();
  std::size_t correct_pos = 0, pred_pos = 0, gold_pos = 0, correct_all = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    r.per_label[gold[i]].gold++;
    r.per_label[pred[i]].predicted++;
    if (gold[i] == pred[i]) {
      ++correct_all;
      r.per_label[gold[i]].correct++;
    }
    if (pred[i] != negative_label) {
      ++pred_pos;
      if (pred[i] == gold[i]) ++correct_pos;
    }
    if (gold[i] != negative_label) ++gold_pos;
  }
  r.precision = pred_pos == 0 ? 0.0
                              : static_cast<double>(correct_pos) /
                                    static_cast<double>(pred_pos);
  r.recall = gold_pos == 0 ? 0.0
                           : static_cast<double>(correct_pos) /
                                 static_cast<double>(gold_pos);
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  r.accuracy = gold.empty() ? 0.0
                            : static_cast<double>(correct_all) /
                                  static_cast<double>(gold.size());
  return r;
}

}  // namespace graphcache
