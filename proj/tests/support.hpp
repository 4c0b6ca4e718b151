#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "deepdfa/cfg.hpp"
#include "deepdfa/model.hpp"
#include "deepdfa/tensor.hpp"

namespace deepdfa::testing {

inline std::string data_path(const std::string& name) { return std::string(DEEPDFA_TEST_DATA) + "/" + name; }

// Random valid CFG: nodes 0 (entry) .. n-1 (exit). A forward edge into every
// node keeps it reachable from entry, a forward edge out of every node keeps
// exit reachable, and extra random edges add joins and back edges.
inline Cfg random_cfg(std::mt19937_64& rng, std::size_t max_nodes = 20, std::size_t max_vars = 8) {
  auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const std::size_t n = 2 + below(max_nodes - 1);
  const std::size_t vars = 1 + below(max_vars);
  Cfg cfg;
  cfg.function = "random";
  cfg.entry = 0;
  cfg.exit = n - 1;
  for (std::size_t i = 0; i < n; ++i) {
    Statement s;
    if (i == 0 || i == n - 1) {
      s.kind = StatementKind::Nop;
      s.code = i == 0 ? "ENTRY" : "EXIT";
    } else if (below(10) < 6) {
      s.kind = below(2) ? StatementKind::Assign : StatementKind::CallAssign;
      s.target = "v" + std::to_string(below(vars));
      s.code = *s.target + " = ...;";
      s.type = "int";
      if (s.kind == StatementKind::CallAssign) s.callee = "f" + std::to_string(below(3));
      s.constants = {std::to_string(below(4))};
      s.operators = {below(2) ? "+" : "*"};
    } else {
      s.kind = StatementKind::Condition;
      s.code = "c" + std::to_string(i);
      s.uses = {"v" + std::to_string(below(vars))};
    }
    cfg.nodes.push_back(std::move(s));
  }
  std::set<Edge> edges;
  for (std::size_t v = 1; v < n; ++v) edges.emplace(below(v), v);
  for (std::size_t u = 0; u + 1 < n; ++u) edges.emplace(u, u + 1 + below(n - 1 - u));
  const std::size_t extra = below(n + 1);
  for (std::size_t e = 0; e < extra; ++e) {
    const std::size_t u = below(n - 1);  // the exit keeps no successors
    const std::size_t v = 1 + below(n - 1);
    if (u != v) edges.emplace(u, v);
  }
  cfg.edges.assign(edges.begin(), edges.end());
  return cfg;
}

// Reaching definitions with std::set, a definition per defining node in node
// order, and Jacobi sweeps until nothing changes.
struct OracleSolution {
  std::vector<std::set<std::size_t>> in, out;
};

inline OracleSolution oracle_reaching_definitions(const Cfg& cfg) {
  const std::size_t n = cfg.nodes.size();
  std::vector<long> def_at(n, -1);
  std::vector<std::string> var_of;
  for (std::size_t v = 0; v < n; ++v) {
    if (cfg.nodes[v].target) {
      def_at[v] = static_cast<long>(var_of.size());
      var_of.push_back(*cfg.nodes[v].target);
    }
  }
  OracleSolution s{std::vector<std::set<std::size_t>>(n), std::vector<std::set<std::size_t>>(n)};
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<std::set<std::size_t>> in(n);
    for (const auto& [u, v] : cfg.edges) in[v].insert(s.out[u].begin(), s.out[u].end());
    std::vector<std::set<std::size_t>> out(n);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t d : in[v]) {
        if (def_at[v] < 0 || var_of[d] != *cfg.nodes[v].target) out[v].insert(d);
      }
      if (def_at[v] >= 0) out[v].insert(static_cast<std::size_t>(def_at[v]));
    }
    if (out != s.out) changed = true;
    s.in = std::move(in);
    s.out = std::move(out);
  }
  return s;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = u(rng);
  return m;
}

// Max over entries of |analytic - numeric| / max(|analytic|, |numeric|, floor),
// numeric by central differences with step h. The floor keeps round-off in
// near-zero gradients from dominating.
inline double max_relative_error(const std::function<double(const std::vector<Matrix>&)>& f,
                                 std::vector<Matrix> inputs, const std::vector<Matrix>& analytic,
                                 double h = 1e-6, double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double orig = inputs[i].data()[j];
      inputs[i].data()[j] = orig + h;
      const double up = f(inputs);
      inputs[i].data()[j] = orig - h;
      const double down = f(inputs);
      inputs[i].data()[j] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i].data()[j];
      const double denom = std::max({floor, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

// Random parameters, biases included, so every term of the network is
// exercised by a gradient check.
inline ModelParams random_params(std::mt19937_64& rng, const ModelConfig& config, std::size_t feature_width) {
  ModelParams p = init_params(config, feature_width, rng());
  for (auto& [name, m] : p.entries) {
    if (!ModelParams::is_weight(name)) m = random_matrix(rng, m.rows(), m.cols(), 0.3);
  }
  return p;
}

// End-to-end check of d loss / d params for the whole network on one batch.
inline double model_gradient_error(const ModelParams& params, const ModelConfig& config, const GraphBatch& batch,
                                   const std::vector<int>& labels, double l2) {
  auto value = [&](const std::vector<Matrix>& xs) {
    ModelParams p = params;
    for (std::size_t i = 0; i < xs.size(); ++i) p.entries[i].second = xs[i];
    Tape tape;
    return loss_on_tape(forward_on_tape(tape, p, config, batch), labels, p, l2).value()(0, 0);
  };
  Tape tape;
  const ForwardTrace fwd = forward_on_tape(tape, params, config, batch);
  const GradientResult g = gradients(loss_on_tape(fwd, labels, params, l2), fwd.params);
  std::vector<Matrix> xs;
  for (const auto& [name, m] : params.entries) xs.push_back(m);
  return max_relative_error(value, xs, g.grads);
}

}  // namespace deepdfa::testing
