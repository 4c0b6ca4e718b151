#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepdfa/dataset.hpp"

namespace deepdfa {

struct SynthOptions {
  std::size_t n = 100;
  std::uint64_t seed = 0;
  double vulnerable_fraction = 0.5;
  /// Maximum nesting of if/while in generated code. 0 gives straight-line
  /// programs only.
  std::size_t max_depth = 2;
  /// Upper bound on filler statements before and after the pointer pattern.
  std::size_t max_distractors = 3;
};

/// Project tags, one per template family.
const std::vector<std::string>& synth_projects();

/// Generates mini-C functions around a pointer that may be NULL at a
/// dereference. Exactly round(n * vulnerable_fraction) examples are
/// vulnerable. Every label is confirmed with `null_reaches_deref`; a template
/// that disagrees with the oracle raises an Error instead of being emitted.
std::vector<Example> synth_generate(const SynthOptions& options);

}  // namespace deepdfa
