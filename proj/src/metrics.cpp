#include "deepdfa/metrics.hpp"

#include "deepdfa/error.hpp"

namespace deepdfa {

double Metrics::accuracy() const {
  const std::size_t total = tp + fp + tn + fn;
  return total == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

Metrics compute_metrics(std::span<const double> probabilities, std::span<const int> labels, double threshold) {
  if (probabilities.empty()) throw ValidationError("metrics need at least one prediction");
  if (probabilities.size() != labels.size()) {
    throw ValidationError("metrics got " + std::to_string(probabilities.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  }
  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("label must be 0 or 1");
    const bool predicted = probabilities[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++m.tp;
    if (predicted && !actual) ++m.fp;
    if (!predicted && !actual) ++m.tn;
    if (!predicted && actual) ++m.fn;
  }
  m.precision_undefined = m.tp + m.fp == 0;
  m.recall_undefined = m.tp + m.fn == 0;
  m.precision = m.precision_undefined ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  m.recall = m.recall_undefined ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  m.f1_undefined = m.precision + m.recall == 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

nlohmann::ordered_json metrics_to_json(const Metrics& m) {
  nlohmann::ordered_json doc{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                             {"tp", m.tp},               {"fp", m.fp},         {"tn", m.tn},
                             {"fn", m.fn}};
  auto flags = nlohmann::ordered_json::array();
  if (m.precision_undefined) flags.push_back("precision");
  if (m.recall_undefined) flags.push_back("recall");
  if (m.f1_undefined) flags.push_back("f1");
  if (!flags.empty()) doc["zero_denominator"] = std::move(flags);
  return doc;
}

}  // namespace deepdfa
