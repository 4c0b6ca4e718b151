#include "deepdfa/train.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "deepdfa/error.hpp"
#include "rng.hpp"

namespace deepdfa {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-8;

// Adam with decoupled weight decay on weight matrices.
class AdamW {
 public:
  AdamW(const ModelParams& params, double lr, double decay) : lr_(lr), decay_(decay) {
    for (const auto& [name, m] : params.entries) {
      m_.emplace_back(m.rows(), m.cols());
      v_.emplace_back(m.rows(), m.cols());
      decays_.push_back(ModelParams::is_weight(name));
    }
  }

  void step(ModelParams& params, const std::vector<Matrix>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
      auto w = params.entries[i].second.data();
      const auto g = grads[i].data();
      auto m = m_[i].data();
      auto v = v_[i].data();
      const double shrink = decays_[i] ? 1.0 - lr_ * decay_ : 1.0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
        v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
        w[j] = w[j] * shrink - lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + kEpsilon);
      }
    }
  }

 private:
  double lr_;
  double decay_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::vector<bool> decays_;
};

std::vector<double> run_batches(const ModelParams& params, const ModelConfig& config,
                                const std::vector<const Cfg*>& cfgs, const std::vector<const FeatureMatrix*>& feats,
                                std::size_t batch_size) {
  std::vector<double> probs;
  probs.reserve(cfgs.size());
  for (std::size_t start = 0; start < cfgs.size(); start += batch_size) {
    const std::size_t end = std::min(cfgs.size(), start + batch_size);
    const GraphBatch batch = make_batch({cfgs.begin() + static_cast<long>(start), cfgs.begin() + static_cast<long>(end)},
                                        {feats.begin() + static_cast<long>(start), feats.begin() + static_cast<long>(end)});
    Tape tape;
    const ForwardTrace fwd = forward_on_tape(tape, params, config, batch);
    const Matrix p = sigmoid(fwd.logits).value();
    for (std::size_t i = 0; i < p.rows(); ++i) probs.push_back(p(i, 0));
  }
  return probs;
}

}  // namespace

TrainResult train(const ModelConfig& config, const std::vector<Example>& train_split,
                  const std::vector<Example>& valid_split, std::uint64_t seed) {
  config.validate();
  if (train_split.empty()) throw ValidationError("training split is empty");

  std::vector<Cfg> train_cfgs;
  train_cfgs.reserve(train_split.size());
  for (const auto& ex : train_split) train_cfgs.push_back(ex.cfg);

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.vocab = build_vocabulary(train_cfgs, config.k);

  std::vector<std::size_t> all(train_split.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::vector<std::size_t> balanced = undersample(train_split, all, seed);
  result.train_examples = balanced.size();

  std::vector<FeatureMatrix> train_feats(train_split.size());
  for (std::size_t i : balanced) train_feats[i] = encode(train_split[i].cfg, ckpt.vocab, config.mask);

  // With no validation split, model selection falls back to the training data.
  const std::vector<Example>& select_on = valid_split.empty() ? train_split : valid_split;
  std::vector<FeatureMatrix> select_feats;
  std::vector<const Cfg*> select_cfgs;
  std::vector<int> select_labels;
  for (const auto& ex : select_on) {
    select_feats.push_back(encode(ex.cfg, ckpt.vocab, config.mask));
    select_cfgs.push_back(&ex.cfg);
    select_labels.push_back(as_int(ex.label));
  }
  std::vector<const FeatureMatrix*> select_ptrs;
  for (const auto& f : select_feats) select_ptrs.push_back(&f);

  ModelParams params = init_params(config, feature_width(config.k), seed);
  AdamW opt(params, config.learning_rate, config.l2_weight);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

  double best_f1 = -1.0;
  std::size_t since_best = 0;
  ckpt.params = params;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = balanced;
    detail::shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const Cfg*> cfgs;
      std::vector<const FeatureMatrix*> feats;
      std::vector<int> labels;
      for (std::size_t j = start; j < end; ++j) {
        cfgs.push_back(&train_split[order[j]].cfg);
        feats.push_back(&train_feats[order[j]]);
        labels.push_back(as_int(train_split[order[j]].label));
      }
      Tape tape;
      const ForwardTrace fwd = forward_on_tape(tape, params, config, make_batch(cfgs, feats));
      // Weight decay is applied by the optimizer, so the data term alone is
      // differentiated here.
      const Var batch_loss = loss_on_tape(fwd, labels, params, 0.0);
      const GradientResult g = gradients(batch_loss, fwd.params);
      opt.step(params, g.grads);
      loss_sum += batch_loss.value()(0, 0) * static_cast<double>(end - start);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.valid = compute_metrics(run_batches(params, config, select_cfgs, select_ptrs, 64), select_labels);
    result.history.push_back(rec);

    if (rec.valid.f1 > best_f1) {
      best_f1 = rec.valid.f1;
      ckpt.params = params;
      ckpt.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

double predict(const Checkpoint& ckpt, const Cfg& cfg) {
  const FeatureMatrix f = encode(cfg, ckpt.vocab, ckpt.config.mask);
  if (f.cols != ckpt.params.feature_width()) {
    throw ValidationError("feature width " + std::to_string(f.cols) + " does not match checkpoint width " +
                          std::to_string(ckpt.params.feature_width()));
  }
  return forward(ckpt.params, ckpt.config, f, cfg).probability;
}

std::vector<double> predict_all(const Checkpoint& ckpt, const std::vector<Example>& examples, std::size_t batch_size) {
  if (examples.empty()) return {};
  std::vector<FeatureMatrix> feats;
  std::vector<const Cfg*> cfgs;
  feats.reserve(examples.size());
  for (const auto& ex : examples) {
    feats.push_back(encode(ex.cfg, ckpt.vocab, ckpt.config.mask));
    cfgs.push_back(&ex.cfg);
  }
  if (feats.front().cols != ckpt.params.feature_width()) {
    throw ValidationError("feature width " + std::to_string(feats.front().cols) +
                          " does not match checkpoint width " + std::to_string(ckpt.params.feature_width()));
  }
  std::vector<const FeatureMatrix*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  return run_batches(ckpt.params, ckpt.config, cfgs, ptrs, std::max<std::size_t>(1, batch_size));
}

Metrics evaluate(const Checkpoint& ckpt, const std::vector<Example>& examples) {
  std::vector<int> labels;
  for (const auto& ex : examples) labels.push_back(as_int(ex.label));
  return compute_metrics(predict_all(ckpt, examples), labels);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json doc;
  doc["version"] = Checkpoint::kVersion;
  doc["config"] = config_to_json(ckpt.config);
  doc["vocab_path"] = ckpt.vocab_path;
  nlohmann::ordered_json params;
  for (const auto& [name, m] : ckpt.params.entries) {
    params[name] = {{"shape", {m.rows(), m.cols()}}, {"data", m.values()}};
  }
  doc["params"] = std::move(params);
  doc["best_epoch"] = ckpt.best_epoch;

  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  if (!dir.empty()) std::filesystem::create_directories(dir);
  write_vocabulary_file(dir / ckpt.vocab_path, ckpt.vocab);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump() << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
  if (!doc.is_object() || doc.value("version", -1) != Checkpoint::kVersion) {
    throw ValidationError("unsupported checkpoint version (expected " + std::to_string(Checkpoint::kVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.config = config_from_json(doc.at("config"));
  if (!doc.contains("vocab_path") || !doc["vocab_path"].is_string()) {
    throw ValidationError("schema violation at $.vocab_path: expected string");
  }
  ckpt.vocab_path = doc["vocab_path"].get<std::string>();
  ckpt.best_epoch = doc.value("best_epoch", std::size_t{0});
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  ckpt.vocab = read_vocabulary_file(dir / ckpt.vocab_path);
  if (ckpt.vocab.k != ckpt.config.k) {
    throw ValidationError("vocabulary k=" + std::to_string(ckpt.vocab.k) + " disagrees with config k=" +
                          std::to_string(ckpt.config.k));
  }

  ckpt.params = init_params(ckpt.config, feature_width(ckpt.config.k), 0);
  const auto& stored = doc.at("params");
  for (auto& [name, m] : ckpt.params.entries) {
    const std::string path_str = "$.params." + name;
    if (!stored.contains(name)) throw ValidationError("schema violation at " + path_str + ": missing parameter");
    const auto& entry = stored[name];
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols()) {
      throw ValidationError("schema violation at " + path_str + ".shape: expected [" + std::to_string(m.rows()) +
                            ", " + std::to_string(m.cols()) + "]");
    }
    m = Matrix(m.rows(), m.cols(), entry.at("data").get<std::vector<double>>());
  }
  return ckpt;
}

nlohmann::ordered_json history_to_json(const std::vector<EpochRecord>& history) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : history) {
    out.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"valid", metrics_to_json(r.valid)}});
  }
  return out;
}

}  // namespace deepdfa
