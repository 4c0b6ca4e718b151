#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepdfa/cfg.hpp"
#include "deepdfa/embedding.hpp"
#include "deepdfa/tensor.hpp"

namespace deepdfa {

/// Training and architecture settings. epochs and patience govern early
/// stopping.
struct ModelConfig {
  std::size_t hidden = 32;
  std::size_t steps = 5;
  std::size_t output_layers = 3;
  double learning_rate = 1e-3;
  double l2_weight = 1e-2;
  std::size_t batch_size = 256;
  std::size_t k = 1000;
  FeatureMask mask = FeatureMask::all();
  std::size_t epochs = 50;
  std::size_t patience = 10;

  /// Throws ValidationError when hidden, steps, output_layers, batch_size or
  /// k is zero, or a rate is negative.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::ordered_json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& doc);

/// Named learnable tensors in a fixed order.
///
/// `input.*` projects features to the hidden width, `aggregate.*` is the
/// message MLP, `gru.*` the update cell, `pool.gate.*` / `pool.feature.*`
/// the attention readout, and `classifier.<i>.*` the output stack.
struct ModelParams {
  std::vector<std::pair<std::string, Matrix>> entries;

  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;
  std::size_t feature_width() const { return at("input.W").rows(); }
  std::size_t parameter_count() const;

  /// Weight matrices (names ending in ".W" or ".U_*") carry the L2 penalty;
  /// biases do not.
  static bool is_weight(std::string_view name);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Glorot-uniform weights, zero biases, fully determined by `seed`.
ModelParams init_params(const ModelConfig& config, std::size_t feature_width, std::uint64_t seed);

/// Glorot bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

/// Several graphs packed as one disjoint union.
struct GraphBatch {
  Matrix features;                                   // nodes x feature width
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // global node ids
  std::vector<std::size_t> graph_of_node;
  std::size_t graphs = 0;
};

GraphBatch make_batch(const std::vector<const Cfg*>& cfgs, const std::vector<const FeatureMatrix*>& features);

// Building blocks of the network, each recorded on the tape of its inputs.

/// Dense layer over the sum of predecessor states: relu(edge_sum(h) W + b).
Var aggregate_messages(Var h, std::span<const std::pair<std::size_t, std::size_t>> edges, Var W, Var b);

struct GruWeights {
  Var W_z, U_z, b_z;
  Var W_r, U_r, b_r;
  Var W_h, U_h, b_h;
};
/// Gated update of node states `h` from messages `a`.
Var gru_cell(Var a, Var h, const GruWeights& w);

struct PoolWeights {
  Var gate_W, gate_b;
  Var feature_W, feature_b;
};
struct PoolOutput {
  Var gates;    // nodes x 1
  Var readout;  // count x hidden
};
/// Sigmoid-gated sum of tanh node features per graph.
PoolOutput attention_pool(Var h, const PoolWeights& w, std::span<const std::size_t> graph_of_node, std::size_t count);

/// Dense layers with relu between them and a linear last layer.
Var classifier_head(Var x, std::span<const std::pair<Var, Var>> layers);

/// Tape handles produced by one forward pass.
struct ForwardTrace {
  std::vector<Var> params;       // same order as ModelParams::entries
  std::vector<Var> states;       // H^0 .. H^t
  std::vector<Var> aggregates;   // A^1 .. A^t
  Var gates;                     // nodes x 1 attention gates
  Var readout;                   // graphs x hidden
  Var logits;                    // graphs x 1
};

/// Records the whole network on `tape`. The parameters enter as variables so
/// the caller can differentiate any scalar built from the outputs.
ForwardTrace forward_on_tape(Tape& tape, const ModelParams& params, const ModelConfig& config,
                             const GraphBatch& batch);

struct NodeStates {
  std::vector<Matrix> hidden;      // H^0 .. H^t, each nodes x hidden
  std::vector<Matrix> aggregates;  // A^1 .. A^t
};

struct ForwardResult {
  double probability = 0.0;
  NodeStates states;
};

/// Single-graph inference: probability that the function is vulnerable.
ForwardResult forward(const ModelParams& params, const ModelConfig& config, const FeatureMatrix& features,
                      const Cfg& cfg);

/// Binary cross-entropy of `probability` against `label` plus
/// l2_weight * sum of squared weight entries (biases excluded).
double loss(double probability, int label, const ModelParams& params, double l2_weight);

/// Same objective on the tape from logits, averaged over the batch.
Var loss_on_tape(const ForwardTrace& fwd, const std::vector<int>& labels, const ModelParams& params,
                 double l2_weight);

}  // namespace deepdfa
