#include "deepdfa/cfg.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "deepdfa/error.hpp"

namespace deepdfa {

namespace {

constexpr std::array<std::pair<StatementKind, std::string_view>, 7> kKindNames{{
    {StatementKind::DeclInit, "decl-init"},
    {StatementKind::Assign, "assign"},
    {StatementKind::CallAssign, "call-assign"},
    {StatementKind::Condition, "condition"},
    {StatementKind::DerefUse, "deref-use"},
    {StatementKind::Return, "return"},
    {StatementKind::Nop, "nop"},
}};

std::vector<bool> reach(std::size_t n, NodeId start, const std::vector<std::vector<NodeId>>& adj) {
  std::vector<bool> seen(n, false);
  std::vector<NodeId> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    for (NodeId w : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return seen;
}

}  // namespace

std::string_view to_string(StatementKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "nop";
}

StatementKind statement_kind_from_string(std::string_view name) {
  for (const auto& [k, spelled] : kKindNames) {
    if (spelled == name) return k;
  }
  throw ValidationError("unknown statement kind '" + std::string(name) + "'");
}

std::vector<std::vector<NodeId>> Cfg::successors() const {
  std::vector<std::vector<NodeId>> out(nodes.size());
  for (const auto& [from, to] : edges) out[from].push_back(to);
  return out;
}

std::vector<std::vector<NodeId>> Cfg::predecessors() const {
  std::vector<std::vector<NodeId>> out(nodes.size());
  for (const auto& [from, to] : edges) out[to].push_back(from);
  return out;
}

void Cfg::canonicalize() { std::sort(edges.begin(), edges.end()); }

void validate(const Cfg& cfg) {
  const std::size_t n = cfg.nodes.size();
  if (n == 0) throw ValidationError("cfg '" + cfg.function + "' has no nodes");
  if (cfg.entry >= n) throw ValidationError("entry id " + std::to_string(cfg.entry) + " out of range");
  if (cfg.exit >= n) throw ValidationError("exit id " + std::to_string(cfg.exit) + " out of range");

  std::set<Edge> unique;
  for (const auto& e : cfg.edges) {
    if (e.first >= n || e.second >= n) {
      throw ValidationError("dangling edge [" + std::to_string(e.first) + ", " + std::to_string(e.second) +
                            "] in cfg with " + std::to_string(n) + " nodes");
    }
    if (!unique.insert(e).second) {
      throw ValidationError("duplicate edge [" + std::to_string(e.first) + ", " + std::to_string(e.second) + "]");
    }
  }

  for (NodeId v = 0; v < n; ++v) {
    const Statement& s = cfg.nodes[v];
    const bool def_kind = s.kind == StatementKind::DeclInit || s.kind == StatementKind::Assign ||
                          s.kind == StatementKind::CallAssign;
    // deref-use may carry a synthesized target (see ParseOptions).
    const bool anonymous = s.kind == StatementKind::DerefUse && s.target &&
                           s.target->starts_with(kAnonymousPrefix);
    if (def_kind != s.target.has_value() && !anonymous) {
      throw ValidationError("node " + std::to_string(v) + " of kind " + std::string(to_string(s.kind)) +
                            (s.target ? " must not carry a target" : " requires a target"));
    }
  }

  const auto fwd = reach(n, cfg.entry, cfg.successors());
  const auto bwd = reach(n, cfg.exit, cfg.predecessors());
  for (NodeId v = 0; v < n; ++v) {
    if (!fwd[v]) throw ValidationError("node " + std::to_string(v) + " unreachable from entry");
    if (!bwd[v]) throw ValidationError("exit unreachable from node " + std::to_string(v));
  }
}

}  // namespace deepdfa
