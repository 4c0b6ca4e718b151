#include "deepdfa/model.hpp"

#include <cmath>
#include <random>

#include "deepdfa/error.hpp"

namespace deepdfa {

void ModelConfig::validate() const {
  if (hidden == 0) throw ValidationError("hidden size must be at least 1");
  if (steps == 0) throw ValidationError("message-passing steps must be at least 1");
  if (output_layers == 0) throw ValidationError("output layers must be at least 1");
  if (batch_size == 0) throw ValidationError("batch size must be at least 1");
  if (k == 0) throw ValidationError("vocabulary threshold k must be at least 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (l2_weight < 0.0) throw ValidationError("L2 weight must be non-negative");
}

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  return {{"hidden", c.hidden},
          {"steps", c.steps},
          {"output_layers", c.output_layers},
          {"learning_rate", c.learning_rate},
          {"l2_weight", c.l2_weight},
          {"batch_size", c.batch_size},
          {"k", c.k},
          {"mask", c.mask.to_string()},
          {"epochs", c.epochs},
          {"patience", c.patience}};
}

ModelConfig config_from_json(const nlohmann::json& doc) {
  ModelConfig c;
  try {
    c.hidden = doc.at("hidden").get<std::size_t>();
    c.steps = doc.at("steps").get<std::size_t>();
    c.output_layers = doc.at("output_layers").get<std::size_t>();
    c.learning_rate = doc.at("learning_rate").get<double>();
    c.l2_weight = doc.at("l2_weight").get<double>();
    c.batch_size = doc.at("batch_size").get<std::size_t>();
    c.k = doc.at("k").get<std::size_t>();
    c.mask = FeatureMask::parse(doc.at("mask").get<std::string>());
    c.epochs = doc.value("epochs", c.epochs);
    c.patience = doc.value("patience", c.patience);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("schema violation in config: ") + e.what());
  }
  c.validate();
  return c;
}

Matrix& ModelParams::at(std::string_view name) {
  for (auto& [n, m] : entries) {
    if (n == name) return m;
  }
  throw Error("no parameter named '" + std::string(name) + "'");
}

const Matrix& ModelParams::at(std::string_view name) const {
  for (const auto& [n, m] : entries) {
    if (n == name) return m;
  }
  throw Error("no parameter named '" + std::string(name) + "'");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : entries) n += m.size();
  return n;
}

bool ModelParams::is_weight(std::string_view name) {
  return name.ends_with(".W") || name.find(".W_") != std::string_view::npos ||
         name.find(".U_") != std::string_view::npos;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

namespace {

// Uniform in [-bound, bound) from the top 53 bits; avoids the
// implementation-defined std::uniform_real_distribution.
double uniform(std::mt19937_64& rng, double bound) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * bound;
}

Matrix glorot(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  const double s = glorot_bound(rows, cols);
  for (double& x : m.data()) x = uniform(rng, s);
  return m;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::size_t feature_width, std::uint64_t seed) {
  config.validate();
  if (feature_width == 0) throw ValidationError("feature width must be at least 1");
  const std::size_t h = config.hidden;
  std::mt19937_64 rng(seed);
  ModelParams p;
  auto dense = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    p.entries.emplace_back(prefix + ".W", glorot(rng, in, out));
    p.entries.emplace_back(prefix + ".b", Matrix(1, out));
  };
  dense("input", feature_width, h);
  dense("aggregate", h, h);
  for (const char* gate : {"z", "r", "h"}) {
    p.entries.emplace_back(std::string("gru.W_") + gate, glorot(rng, h, h));
    p.entries.emplace_back(std::string("gru.U_") + gate, glorot(rng, h, h));
    p.entries.emplace_back(std::string("gru.b_") + gate, Matrix(1, h));
  }
  dense("pool.gate", h, 1);
  dense("pool.feature", h, h);
  for (std::size_t i = 0; i < config.output_layers; ++i) {
    dense("classifier." + std::to_string(i), h, i + 1 == config.output_layers ? 1 : h);
  }
  return p;
}

GraphBatch make_batch(const std::vector<const Cfg*>& cfgs, const std::vector<const FeatureMatrix*>& features) {
  if (cfgs.size() != features.size()) throw ShapeError("batch has mismatched cfg and feature counts");
  if (cfgs.empty()) throw ShapeError("batch is empty");
  std::size_t total = 0;
  const std::size_t width = features.front()->cols;
  for (std::size_t g = 0; g < cfgs.size(); ++g) {
    if (cfgs[g]->size() == 0) throw ShapeError("graph " + std::to_string(g) + " has no nodes");
    if (features[g]->rows != cfgs[g]->size()) {
      throw ShapeError("graph " + std::to_string(g) + ": " + std::to_string(features[g]->rows) +
                       " feature rows for " + std::to_string(cfgs[g]->size()) + " nodes");
    }
    if (features[g]->cols != width) throw ShapeError("graph " + std::to_string(g) + " has a different feature width");
    total += cfgs[g]->size();
  }

  GraphBatch b;
  b.features = Matrix(total, width);
  b.graphs = cfgs.size();
  b.graph_of_node.reserve(total);
  std::size_t offset = 0;
  for (std::size_t g = 0; g < cfgs.size(); ++g) {
    const FeatureMatrix& f = *features[g];
    for (std::size_t r = 0; r < f.rows; ++r) {
      for (std::size_t c = 0; c < f.cols; ++c) b.features(offset + r, c) = f.at(r, c);
      b.graph_of_node.push_back(g);
    }
    for (const auto& [u, v] : cfgs[g]->edges) b.edges.emplace_back(offset + u, offset + v);
    offset += cfgs[g]->size();
  }
  return b;
}

Var aggregate_messages(Var h, std::span<const std::pair<std::size_t, std::size_t>> edges, Var W, Var b) {
  // Messages flow along CFG edges only: the sum runs over predecessors.
  return relu(add(matmul(edge_sum(h, edges), W), b));
}

Var gru_cell(Var a, Var h, const GruWeights& w) {
  Var z = sigmoid(add(add(matmul(a, w.W_z), matmul(h, w.U_z)), w.b_z));
  Var r = sigmoid(add(add(matmul(a, w.W_r), matmul(h, w.U_r)), w.b_r));
  Var cand = tanh(add(add(matmul(a, w.W_h), matmul(hadamard(r, h), w.U_h)), w.b_h));
  return add(hadamard(one_minus(z), h), hadamard(z, cand));
}

PoolOutput attention_pool(Var h, const PoolWeights& w, std::span<const std::size_t> graph_of_node,
                          std::size_t count) {
  PoolOutput out;
  out.gates = sigmoid(add(matmul(h, w.gate_W), w.gate_b));
  Var feat = tanh(add(matmul(h, w.feature_W), w.feature_b));
  out.readout = segment_sum(scale_rows(feat, out.gates), graph_of_node, count);
  return out;
}

Var classifier_head(Var x, std::span<const std::pair<Var, Var>> layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = add(matmul(x, layers[i].first), layers[i].second);
    if (i + 1 < layers.size()) x = relu(x);
  }
  return x;
}

ForwardTrace forward_on_tape(Tape& tape, const ModelParams& params, const ModelConfig& config,
                             const GraphBatch& batch) {
  if (batch.features.cols() != params.feature_width()) {
    throw ShapeError("feature width " + std::to_string(batch.features.cols()) + " does not match model width " +
                     std::to_string(params.feature_width()));
  }
  ForwardTrace fwd;
  for (const auto& [name, m] : params.entries) fwd.params.push_back(tape.variable(m));
  auto p = [&](std::string_view name) -> Var {
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
      if (params.entries[i].first == name) return fwd.params[i];
    }
    throw Error("no parameter named '" + std::string(name) + "'");
  };

  Var x = tape.constant(batch.features);
  Var h = relu(add(matmul(x, p("input.W")), p("input.b")));
  fwd.states.push_back(h);
  const GruWeights gru{p("gru.W_z"), p("gru.U_z"), p("gru.b_z"), p("gru.W_r"), p("gru.U_r"),
                       p("gru.b_r"), p("gru.W_h"), p("gru.U_h"), p("gru.b_h")};
  for (std::size_t step = 0; step < config.steps; ++step) {
    Var a = aggregate_messages(h, batch.edges, p("aggregate.W"), p("aggregate.b"));
    h = gru_cell(a, h, gru);
    fwd.aggregates.push_back(a);
    fwd.states.push_back(h);
  }

  const PoolOutput pooled = attention_pool(
      h, {p("pool.gate.W"), p("pool.gate.b"), p("pool.feature.W"), p("pool.feature.b")}, batch.graph_of_node,
      batch.graphs);
  fwd.gates = pooled.gates;
  fwd.readout = pooled.readout;

  std::vector<std::pair<Var, Var>> head;
  for (std::size_t i = 0; i < config.output_layers; ++i) {
    const std::string prefix = "classifier." + std::to_string(i);
    head.emplace_back(p(prefix + ".W"), p(prefix + ".b"));
  }
  fwd.logits = classifier_head(fwd.readout, head);
  return fwd;
}

ForwardResult forward(const ModelParams& params, const ModelConfig& config, const FeatureMatrix& features,
                      const Cfg& cfg) {
  const GraphBatch batch = make_batch({&cfg}, {&features});
  Tape tape;
  const ForwardTrace fwd = forward_on_tape(tape, params, config, batch);
  ForwardResult out;
  out.probability = sigmoid(fwd.logits).value()(0, 0);
  for (Var s : fwd.states) out.states.hidden.push_back(s.value());
  for (Var a : fwd.aggregates) out.states.aggregates.push_back(a.value());
  return out;
}

double loss(double probability, int label, const ModelParams& params, double l2_weight) {
  if (!(probability > 0.0 && probability < 1.0)) throw NumericError("probability must lie strictly inside (0, 1)");
  if (label != 0 && label != 1) throw ValidationError("label must be 0 or 1");
  const double bce = label == 1 ? -std::log(probability) : -std::log1p(-probability);
  double l2 = 0.0;
  for (const auto& [name, m] : params.entries) {
    if (!ModelParams::is_weight(name)) continue;
    for (double w : m.data()) l2 += w * w;
  }
  return bce + l2_weight * l2;
}

Var loss_on_tape(const ForwardTrace& fwd, const std::vector<int>& labels, const ModelParams& params,
                 double l2_weight) {
  Tape& tape = *fwd.logits.tape;
  Matrix y(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) y(i, 0) = labels[i];
  Var total = bce_with_logits(fwd.logits, tape.constant(std::move(y)));
  if (l2_weight != 0.0) {
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
      if (!ModelParams::is_weight(params.entries[i].first)) continue;
      total = add(total, scale(sum_squares(fwd.params[i]), l2_weight));
    }
  }
  return total;
}

}  // namespace deepdfa
