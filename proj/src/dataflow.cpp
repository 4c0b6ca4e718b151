#include "deepdfa/dataflow.hpp"

#include <deque>
#include <map>

#include "deepdfa/error.hpp"

namespace deepdfa {

namespace {

// Reverse postorder from entry; nodes unreachable from entry are appended in
// id order so every node is visited at least once.
std::vector<NodeId> reverse_postorder(const Cfg& cfg, const std::vector<std::vector<NodeId>>& succ) {
  const std::size_t n = cfg.size();
  std::vector<bool> seen(n, false);
  std::vector<NodeId> post;
  post.reserve(n);
  // Iterative DFS keeping (node, next-successor-index).
  std::vector<std::pair<NodeId, std::size_t>> stack{{cfg.entry, 0}};
  seen[cfg.entry] = true;
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    if (next < succ[v].size()) {
      NodeId w = succ[v][next++];
      if (!seen[w]) {
        seen[w] = true;
        stack.emplace_back(w, 0);
      }
    } else {
      post.push_back(v);
      stack.pop_back();
    }
  }
  std::vector<NodeId> order(post.rbegin(), post.rend());
  for (NodeId v = 0; v < n; ++v) {
    if (!seen[v]) order.push_back(v);
  }
  return order;
}

void require_gen_kill(const Cfg& cfg, const DataflowState& s) {
  if (s.gen.size() != cfg.size() || s.kill.size() != cfg.size()) {
    throw ShapeError("gen/kill sized for " + std::to_string(s.gen.size()) + " nodes, cfg has " +
                     std::to_string(cfg.size()));
  }
}

BitVec transfer(const BitVec& in, const BitVec& gen, const BitVec& kill) { return gen | (in - kill); }

std::size_t width_of(const DataflowState& s) { return s.gen.empty() ? 0 : s.gen[0].width(); }

// One Jacobi round: every IN reads only `prev`.
std::vector<BitVec> sweep(const std::vector<std::vector<NodeId>>& pred, const DataflowState& gk,
                          const std::vector<BitVec>& prev) {
  const std::size_t width = width_of(gk);
  std::vector<BitVec> next;
  next.reserve(prev.size());
  for (NodeId v = 0; v < prev.size(); ++v) {
    BitVec in(width);
    for (NodeId u : pred[v]) in |= prev[u];
    next.push_back(transfer(in, gk.gen[v], gk.kill[v]));
  }
  return next;
}

}  // namespace

long DefinitionTable::index_of_node(NodeId node) const {
  for (const auto& d : entries) {
    if (d.node == node) return static_cast<long>(d.id);
  }
  return -1;
}

GenKill compute_gen_kill(const Cfg& cfg) {
  GenKill gk;
  std::map<std::string, std::vector<std::size_t>> by_variable;
  for (NodeId v = 0; v < cfg.size(); ++v) {
    const Statement& s = cfg.nodes[v];
    if (!s.is_definition()) continue;
    const std::size_t id = gk.defs.entries.size();
    gk.defs.entries.push_back({id, v, *s.target});
    by_variable[*s.target].push_back(id);
  }

  const std::size_t width = gk.defs.size();
  gk.state.gen.assign(cfg.size(), BitVec(width));
  gk.state.kill.assign(cfg.size(), BitVec(width));
  for (const auto& d : gk.defs.entries) {
    gk.state.gen[d.node].set(d.id);
    for (std::size_t other : by_variable[d.variable]) {
      if (other != d.id) gk.state.kill[d.node].set(other);
    }
  }
  return gk;
}

DataflowState solve(const Cfg& cfg, const DataflowState& gen_kill) {
  require_gen_kill(cfg, gen_kill);
  const std::size_t n = cfg.size();
  const std::size_t width = width_of(gen_kill);
  const auto succ = cfg.successors();
  const auto pred = cfg.predecessors();

  DataflowState s = gen_kill;
  s.in.assign(n, BitVec(width));
  s.out.assign(n, BitVec(width));

  std::deque<NodeId> work;
  std::vector<bool> queued(n, false);
  for (NodeId v : reverse_postorder(cfg, succ)) {
    work.push_back(v);
    queued[v] = true;
  }
  while (!work.empty()) {
    const NodeId v = work.front();
    work.pop_front();
    queued[v] = false;

    BitVec in(width);
    for (NodeId u : pred[v]) in |= s.out[u];
    BitVec out = transfer(in, s.gen[v], s.kill[v]);
    s.in[v] = std::move(in);
    if (out != s.out[v]) {
      s.out[v] = std::move(out);
      for (NodeId w : succ[v]) {
        if (!queued[w]) {
          queued[w] = true;
          work.push_back(w);
        }
      }
    }
  }
  return s;
}

std::vector<std::vector<BitVec>> trace(const Cfg& cfg, const DataflowState& gen_kill, std::size_t rounds) {
  require_gen_kill(cfg, gen_kill);
  const auto pred = cfg.predecessors();
  std::vector<std::vector<BitVec>> snapshots;
  snapshots.reserve(rounds + 1);
  snapshots.emplace_back(cfg.size(), BitVec(width_of(gen_kill)));
  for (std::size_t r = 1; r <= rounds; ++r) snapshots.push_back(sweep(pred, gen_kill, snapshots.back()));
  return snapshots;
}

std::size_t rounds_to_fixpoint(const Cfg& cfg, const DataflowState& gen_kill) {
  require_gen_kill(cfg, gen_kill);
  const auto pred = cfg.predecessors();
  std::vector<BitVec> cur(cfg.size(), BitVec(width_of(gen_kill)));
  for (std::size_t r = 0;; ++r) {
    auto next = sweep(pred, gen_kill, cur);
    if (next == cur) return r;
    cur = std::move(next);
  }
}

nlohmann::ordered_json dataflow_report(const Cfg& cfg, const GenKill& gk, const DataflowState& solved) {
  nlohmann::ordered_json doc;
  doc["function"] = cfg.function;
  auto defs = nlohmann::ordered_json::array();
  for (const auto& d : gk.defs.entries) {
    defs.push_back({{"id", d.id}, {"node", d.node}, {"variable", d.variable}, {"code", cfg.nodes[d.node].code}});
  }
  doc["definitions"] = std::move(defs);
  auto nodes = nlohmann::ordered_json::array();
  for (NodeId v = 0; v < cfg.size(); ++v) {
    nlohmann::ordered_json row;
    row["id"] = v;
    row["code"] = cfg.nodes[v].code;
    row["gen"] = solved.gen[v].to_string();
    row["kill"] = solved.kill[v].to_string();
    row["in"] = solved.in[v].to_string();
    row["out"] = solved.out[v].to_string();
    nodes.push_back(std::move(row));
  }
  doc["nodes"] = std::move(nodes);
  return doc;
}

nlohmann::ordered_json trace_report(const Cfg& cfg, const std::vector<std::vector<BitVec>>& snapshots) {
  nlohmann::ordered_json doc;
  doc["function"] = cfg.function;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < snapshots.size(); ++r) {
    nlohmann::ordered_json row;
    row["iteration"] = r;
    auto out = nlohmann::ordered_json::array();
    for (const auto& bits : snapshots[r]) out.push_back(bits.to_string());
    row["out"] = std::move(out);
    rows.push_back(std::move(row));
  }
  doc["trace"] = std::move(rows);
  return doc;
}

}  // namespace deepdfa
