#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deepdfa/cfg.hpp"

namespace deepdfa {

enum class Label { Safe = 0, Vulnerable = 1 };

std::string_view to_string(Label l);
Label label_from_string(std::string_view s);
inline int as_int(Label l) { return static_cast<int>(l); }

struct Example {
  std::string id;
  std::string project;
  std::string source;  // may be empty for CFGs loaded without source
  Cfg cfg;
  Label label = Label::Safe;
};

/// The labelling oracle: true iff some definition whose whole value is the
/// literal NULL reaches (is in IN of) a deref-use node that uses the same
/// variable, according to the reaching-definitions solver.
bool null_reaches_deref(const Cfg& cfg);

/// Throws ValidationError if the stored label disagrees with the oracle.
void check_label(const Example& ex);

/// Dataset directory: manifest.json plus one CFG interchange file per example
/// (and the mini-C source beside it when known).
void write_dataset(const std::filesystem::path& dir, const std::vector<Example>& examples);
/// Reads and re-validates every label against the oracle.
std::vector<Example> read_dataset(const std::filesystem::path& dir);

enum class Regime { Mixed, Cross };
Regime regime_from_string(std::string_view s);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

/// Example indices per split.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

/// Mixed: random example-level split with sizes round(n * train),
/// round(n * valid) and the rest for test.
/// Cross: whole projects are held out for test (about `test` of the projects,
/// at least one); valid is drawn from the training projects' examples.
/// Throws ValidationError when fractions do not sum to 1 or when the cross
/// regime has fewer than two projects.
Split split(const std::vector<Example>& data, Regime regime, SplitFractions fractions, std::uint64_t seed);

/// K-fold cross-project splits: projects are partitioned into `folds` groups
/// and each group is the test side exactly once. `valid_fraction` of the
/// remaining examples form the validation split.
std::vector<Split> cross_project_folds(const std::vector<Example>& data, std::size_t folds, double valid_fraction,
                                       std::uint64_t seed);

/// Keeps every minority-class index and a seeded random subset of the
/// majority class of the same size; result is in ascending index order.
/// Throws ValidationError when either class is absent.
std::vector<std::size_t> undersample(const std::vector<Example>& data, const std::vector<std::size_t>& indices,
                                     std::uint64_t seed);

template <typename T>
std::vector<T> select(const std::vector<T>& items, const std::vector<std::size_t>& indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(items[i]);
  return out;
}

}  // namespace deepdfa
