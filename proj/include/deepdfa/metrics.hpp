#pragma once

#include <cstddef>
#include <span>

#include <nlohmann/json.hpp>

namespace deepdfa {

/// Binary confusion counts with derived scores. A ratio whose denominator is
/// zero is reported as 0 and flagged.
struct Metrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  double accuracy() const;
};

inline constexpr double kDecisionThreshold = 0.5;

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

/// A prediction counts as positive when probability >= threshold. Throws
/// ValidationError on empty or mismatched inputs and on labels outside {0, 1}.
Metrics compute_metrics(std::span<const double> probabilities, std::span<const int> labels,
                        double threshold = kDecisionThreshold);

nlohmann::ordered_json metrics_to_json(const Metrics& m);

}  // namespace deepdfa
