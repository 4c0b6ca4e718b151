#pragma once

#include <string_view>

#include "deepdfa/cfg.hpp"

namespace deepdfa {

struct ParseOptions {
  /// Lower a value-producing dereference expression statement such as
  /// `str[i];` into a deref-use node that also defines an anonymous
  /// temporary `$d<id>`. Off by default.
  bool anonymous_deref_defs = false;
};

/// Parses exactly one mini-C function (grammar in docs/minic.ebnf) into a
/// canonical statement-level CFG.
///
/// Node ids follow source order: entry is 0, exit is the last id. A branch
/// node gets exactly two successors with the then-side first; empty branch or
/// loop bodies are materialized as `nop` nodes so that edges stay unique.
///
/// Throws ParseError (with line/column) on malformed input and
/// UnsupportedError naming the construct for anything outside the grammar.
Cfg parse_function(std::string_view source, const ParseOptions& options = {});

}  // namespace deepdfa
