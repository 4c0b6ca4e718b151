#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepdfa/bitvec.hpp"
#include "deepdfa/cfg.hpp"

namespace deepdfa {

struct Definition {
  std::size_t id;
  NodeId node;
  std::string variable;

  friend bool operator==(const Definition&, const Definition&) = default;
};

/// One entry per definition node, ordered by node id; `id` is dense in [0, D).
struct DefinitionTable {
  std::vector<Definition> entries;

  std::size_t size() const { return entries.size(); }
  /// Definition index generated at `node`, or -1 when the node defines nothing.
  long index_of_node(NodeId node) const;
};

/// Per-node reaching-definitions sets. `in`/`out` are empty until solved.
struct DataflowState {
  std::vector<BitVec> gen;
  std::vector<BitVec> kill;
  std::vector<BitVec> in;
  std::vector<BitVec> out;
};

struct GenKill {
  DefinitionTable defs;
  DataflowState state;
};

/// GEN is the node's own definition (if any); KILL holds every other
/// definition of the same variable.
GenKill compute_gen_kill(const Cfg& cfg);

/// Worklist solver for the forward, union-meet problem. Starts from all-zero
/// OUT and returns the least fixpoint with `in` and `out` filled.
DataflowState solve(const Cfg& cfg, const DataflowState& gen_kill);

/// Synchronous sweeps: snapshot r holds OUT after r rounds in which every IN
/// is computed from round r-1's OUT before any OUT changes. Snapshot 0 is all
/// zeros, so the result has `rounds + 1` entries.
std::vector<std::vector<BitVec>> trace(const Cfg& cfg, const DataflowState& gen_kill, std::size_t rounds);

/// Smallest r with trace(r) == trace(r + 1).
std::size_t rounds_to_fixpoint(const Cfg& cfg, const DataflowState& gen_kill);

/// Report document for the `dfa` subcommand: definition table plus per-node
/// GEN/KILL/IN/OUT as 0/1 strings.
nlohmann::ordered_json dataflow_report(const Cfg& cfg, const GenKill& gk, const DataflowState& solved);

/// Table-style trace: one row per round, one 0/1 string per node.
nlohmann::ordered_json trace_report(const Cfg& cfg, const std::vector<std::vector<BitVec>>& snapshots);

}  // namespace deepdfa
