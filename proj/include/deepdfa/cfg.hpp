#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace deepdfa {

enum class StatementKind {
  DeclInit,
  Assign,
  CallAssign,
  Condition,
  DerefUse,
  Return,
  Nop,
};

std::string_view to_string(StatementKind kind);
/// Throws ValidationError on an unknown spelling.
StatementKind statement_kind_from_string(std::string_view name);

/// Prefix reserved for frontend-synthesized variable names. No mini-C
/// identifier can start with it.
inline constexpr std::string_view kAnonymousPrefix = "$";

/// One CFG node: a single statement with the syntactic facts the later
/// stages need.
struct Statement {
  StatementKind kind = StatementKind::Nop;
  std::string code;
  std::optional<std::string> target;
  std::optional<std::string> type;
  std::optional<std::string> callee;
  std::vector<std::string> constants;
  std::vector<std::string> operators;
  std::vector<std::string> uses;  // sorted, duplicate-free

  /// A node defines a variable iff it carries a target.
  bool is_definition() const { return target.has_value(); }

  friend bool operator==(const Statement&, const Statement&) = default;
};

using NodeId = std::size_t;
using Edge = std::pair<NodeId, NodeId>;

/// Statement-level control-flow graph of one function. Node ids are the
/// indices into `nodes`.
struct Cfg {
  std::string function;
  std::vector<Statement> nodes;
  std::vector<Edge> edges;
  NodeId entry = 0;
  NodeId exit = 0;

  std::size_t size() const { return nodes.size(); }

  /// Successor lists in edge order.
  std::vector<std::vector<NodeId>> successors() const;
  /// Predecessor lists in edge order.
  std::vector<std::vector<NodeId>> predecessors() const;

  /// Sorts edges lexicographically. Node order is already canonical.
  void canonicalize();

  friend bool operator==(const Cfg&, const Cfg&) = default;
};

/// Checks the structural invariants: dense ids, in-range and unique edges,
/// entry reaches every node, every node reaches exit, kind/target agreement.
/// Throws ValidationError naming the first violation.
void validate(const Cfg& cfg);

}  // namespace deepdfa
