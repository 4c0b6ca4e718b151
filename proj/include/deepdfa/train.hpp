#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepdfa/dataset.hpp"
#include "deepdfa/embedding.hpp"
#include "deepdfa/metrics.hpp"
#include "deepdfa/model.hpp"

namespace deepdfa {

struct Checkpoint {
  static constexpr int kVersion = 1;

  ModelConfig config;
  ModelParams params;
  Vocabulary vocab;
  /// Where the vocabulary lives on disk, relative to the checkpoint file.
  std::string vocab_path = "vocab.json";
  std::size_t best_epoch = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  Metrics valid;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  std::size_t train_examples = 0;  // after undersampling
};

/// Mini-batch AdamW training. The vocabulary comes from `train` only, the
/// training split is undersampled to 1:1, and the parameters from the epoch
/// with the best validation F1 are kept (ties go to the earlier epoch).
/// Stops after `config.patience` epochs without improvement. Throws
/// ValidationError on an empty or single-class training split.
TrainResult train(const ModelConfig& config, const std::vector<Example>& train, const std::vector<Example>& valid,
                  std::uint64_t seed);

/// Probability that `cfg` is vulnerable: forward(encode(cfg)).
double predict(const Checkpoint& ckpt, const Cfg& cfg);
inline bool classify(double probability) { return probability >= kDecisionThreshold; }

/// Batched inference over many CFGs, same values as calling predict on each.
std::vector<double> predict_all(const Checkpoint& ckpt, const std::vector<Example>& examples,
                                std::size_t batch_size = 64);

Metrics evaluate(const Checkpoint& ckpt, const std::vector<Example>& examples);

/// Writes the checkpoint JSON and the vocabulary beside it at `vocab_path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Loads the checkpoint and its vocabulary; throws ValidationError when the
/// parameter shapes disagree with the config or the vocabulary width.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::ordered_json history_to_json(const std::vector<EpochRecord>& history);

}  // namespace deepdfa
