// deepdfa command-line tool.
//
// Exit codes: 0 on success, 2 on invalid input (parse, schema, validation or
// shape errors), 1 on anything else.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "deepdfa/cfg_json.hpp"
#include "deepdfa/dataflow.hpp"
#include "deepdfa/dataset.hpp"
#include "deepdfa/embedding.hpp"
#include "deepdfa/error.hpp"
#include "deepdfa/minic.hpp"
#include "deepdfa/synth.hpp"
#include "deepdfa/train.hpp"

namespace fs = std::filesystem;
using namespace deepdfa;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// `.c` files go through the mini-C frontend, anything else is read as a CFG
// interchange document.
Cfg read_input(const fs::path& path, bool deref_defs) {
  if (path.extension() == ".c") return parse_function(slurp(path), ParseOptions{deref_defs});
  return load_cfg(slurp(path));
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw Error("cannot write " + out_path);
  out << text;
}

std::vector<Cfg> read_corpus(const fs::path& dir) {
  std::vector<Cfg> corpus;
  if (fs::exists(dir / "manifest.json")) {
    for (auto& ex : read_dataset(dir)) corpus.push_back(std::move(ex.cfg));
    return corpus;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".c" || ext == ".json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) corpus.push_back(read_input(f, false));
  return corpus;
}

nlohmann::ordered_json split_to_json(const std::vector<Example>& data, const Split& s) {
  auto ids = [&](const std::vector<std::size_t>& idx) {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i : idx) arr.push_back(data[i].id);
    return arr;
  };
  return {{"train", ids(s.train)}, {"valid", ids(s.valid)}, {"test", ids(s.test)}};
}

// Reads one fold of a split document back into example lists.
struct NamedSplit {
  std::vector<Example> train, valid, test;
};

NamedSplit load_split(const std::vector<Example>& data, const fs::path& split_file, std::size_t fold) {
  const auto doc = nlohmann::json::parse(slurp(split_file));
  if (!doc.contains("folds") || !doc["folds"].is_array() || fold >= doc["folds"].size()) {
    throw ValidationError("split file has no fold " + std::to_string(fold));
  }
  std::map<std::string, const Example*> by_id;
  for (const auto& ex : data) by_id[ex.id] = &ex;
  auto take = [&](const nlohmann::json& ids) {
    std::vector<Example> out;
    for (const auto& id : ids) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) throw ValidationError("split refers to unknown example " + id.get<std::string>());
      out.push_back(*it->second);
    }
    return out;
  };
  const auto& f = doc["folds"][fold];
  return {take(f.at("train")), take(f.at("valid")), take(f.at("test"))};
}

NamedSplit resolve_split(const std::vector<Example>& data, const std::string& split_file, std::size_t fold,
                         std::uint64_t seed) {
  if (!split_file.empty()) return load_split(data, split_file, fold);
  const Split s = split(data, Regime::Mixed, {}, seed);
  return {select(data, s.train), select(data, s.valid), select(data, s.test)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reaching-definitions analysis and dataflow-inspired vulnerability detection"};
  app.require_subcommand(1);

  // parse
  std::string parse_in, parse_out;
  bool parse_deref_defs = false;
  auto* parse_cmd = app.add_subcommand("parse", "Parse a mini-C function into a CFG interchange document");
  parse_cmd->add_option("source", parse_in, "mini-C source file")->required();
  parse_cmd->add_option("-o,--output", parse_out, "output file (default stdout)");
  parse_cmd->add_flag("--deref-defs", parse_deref_defs, "model value-producing dereferences as anonymous definitions");

  // dfa
  std::string dfa_in;
  std::size_t dfa_trace = 0;
  bool dfa_deref_defs = false;
  auto* dfa_cmd = app.add_subcommand("dfa", "Reaching definitions: definition table and per-node IN/OUT");
  dfa_cmd->add_option("input", dfa_in, "mini-C source (.c) or CFG document (.json)")->required();
  auto* trace_opt = dfa_cmd->add_option("--trace", dfa_trace, "emit OUT after each of N synchronous sweeps");
  dfa_cmd->add_flag("--deref-defs", dfa_deref_defs, "model value-producing dereferences as anonymous definitions");

  // vocab build
  std::string vocab_corpus, vocab_out;
  std::size_t vocab_k = 1000;
  auto* vocab_cmd = app.add_subcommand("vocab", "Vocabulary operations");
  auto* vocab_build = vocab_cmd->add_subcommand("build", "Build top-k property vocabularies from a corpus");
  vocab_cmd->require_subcommand(1);
  vocab_build->add_option("--corpus", vocab_corpus, "dataset directory or directory of .c/.json files")->required();
  vocab_build->add_option("--k", vocab_k, "values kept per property")->check(CLI::PositiveNumber);
  vocab_build->add_option("-o,--output", vocab_out, "vocabulary file")->required();

  // encode
  std::string encode_vocab, encode_mask = "api,datatype,constant,operator", encode_in;
  auto* encode_cmd = app.add_subcommand("encode", "Emit the per-node feature matrix as rows of 0/1");
  encode_cmd->add_option("--vocab", encode_vocab, "vocabulary file")->required();
  encode_cmd->add_option("--mask", encode_mask, "enabled properties");
  encode_cmd->add_option("cfg", encode_in, "mini-C source (.c) or CFG document (.json)")->required();

  // synth
  std::size_t synth_n = 100, synth_depth = 2;
  std::uint64_t synth_seed = 0;
  double synth_frac = 0.5;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a labelled synthetic dataset");
  synth_cmd->add_option("--n", synth_n, "number of examples")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed, "random seed");
  synth_cmd->add_option("--vuln-frac", synth_frac, "fraction of vulnerable examples")->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--max-depth", synth_depth, "maximum if/while nesting");
  synth_cmd->add_option("-o,--output", synth_out, "dataset directory")->required();

  // split
  std::string split_data, split_regime = "mixed", split_out;
  std::size_t split_folds = 1;
  std::uint64_t split_seed = 0;
  double split_train = 0.8, split_valid = 0.1, split_test = 0.1;
  auto* split_cmd = app.add_subcommand("split", "Split a dataset into train/valid/test");
  split_cmd->add_option("--data", split_data, "dataset directory")->required();
  split_cmd->add_option("--regime", split_regime, "mixed or cross")->check(CLI::IsMember({"mixed", "cross"}));
  split_cmd->add_option("--folds", split_folds, "cross-project folds (cross regime)")->check(CLI::PositiveNumber);
  split_cmd->add_option("--seed", split_seed, "random seed");
  split_cmd->add_option("--train", split_train, "train fraction");
  split_cmd->add_option("--valid", split_valid, "valid fraction");
  split_cmd->add_option("--test", split_test, "test fraction");
  split_cmd->add_option("-o,--output", split_out, "split file (default stdout)");

  // train
  ModelConfig train_cfg;
  std::string train_data, train_split_file, train_ckpt, train_mask = "api,datatype,constant,operator", train_history;
  std::size_t train_fold = 0;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train the graph model");
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--split", train_split_file, "split file (default: mixed 0.8/0.1/0.1 by --seed)");
  train_cmd->add_option("--fold", train_fold, "fold of the split file");
  train_cmd->add_option("--ckpt", train_ckpt, "checkpoint output path")->required();
  train_cmd->add_option("--history", train_history, "per-epoch history output (JSON)");
  train_cmd->add_option("--seed", train_seed, "random seed");
  train_cmd->add_option("--epochs", train_cfg.epochs, "maximum epochs");
  train_cmd->add_option("--batch-size", train_cfg.batch_size, "graphs per batch")->check(CLI::PositiveNumber);
  train_cmd->add_option("--mask", train_mask, "enabled embedding properties");
  train_cmd->add_option("--k", train_cfg.k, "vocabulary threshold")->check(CLI::PositiveNumber);
  train_cmd->add_option("--steps", train_cfg.steps, "message-passing steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden", train_cfg.hidden, "hidden size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_cfg.learning_rate, "learning rate");
  train_cmd->add_option("--l2", train_cfg.l2_weight, "decoupled L2 weight");
  train_cmd->add_option("--patience", train_cfg.patience, "early-stopping patience in epochs");

  // eval
  std::string eval_ckpt, eval_data, eval_split_file, eval_part = "test";
  std::size_t eval_fold = 0;
  bool eval_timing = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and emit metrics JSON");
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--split", eval_split_file, "split file; evaluates --part of --fold (default: all examples)");
  eval_cmd->add_option("--fold", eval_fold, "fold of the split file");
  eval_cmd->add_option("--part", eval_part, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));
  eval_cmd->add_flag("--timing", eval_timing, "also report single-example encode+forward latency");

  // predict
  std::string predict_ckpt, predict_in;
  auto* predict_cmd = app.add_subcommand("predict", "Classify one function");
  predict_cmd->add_option("--ckpt", predict_ckpt, "checkpoint file")->required();
  predict_cmd->add_option("input", predict_in, "mini-C source (.c) or CFG document (.json)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*parse_cmd) {
      emit(dump_cfg(parse_function(slurp(parse_in), ParseOptions{parse_deref_defs})), parse_out);
    } else if (*dfa_cmd) {
      const Cfg cfg = read_input(dfa_in, dfa_deref_defs);
      const GenKill gk = compute_gen_kill(cfg);
      if (trace_opt->count() > 0) {
        emit(trace_report(cfg, trace(cfg, gk.state, dfa_trace)).dump(2) + "\n", "");
      } else {
        emit(dataflow_report(cfg, gk, solve(cfg, gk.state)).dump(2) + "\n", "");
      }
    } else if (*vocab_build) {
      write_vocabulary_file(vocab_out, build_vocabulary(read_corpus(vocab_corpus), vocab_k));
    } else if (*encode_cmd) {
      const FeatureMatrix m = encode(read_input(encode_in, false), read_vocabulary_file(encode_vocab),
                                     FeatureMask::parse(encode_mask));
      std::string text;
      for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) text += static_cast<char>('0' + m.at(r, c));
        text += '\n';
      }
      emit(text, "");
    } else if (*synth_cmd) {
      SynthOptions opts;
      opts.n = synth_n;
      opts.seed = synth_seed;
      opts.vulnerable_fraction = synth_frac;
      opts.max_depth = synth_depth;
      write_dataset(synth_out, synth_generate(opts));
    } else if (*split_cmd) {
      const auto data = read_dataset(split_data);
      nlohmann::ordered_json doc;
      doc["regime"] = split_regime;
      auto folds = nlohmann::ordered_json::array();
      if (split_regime == "cross" && split_folds > 1) {
        for (const auto& s : cross_project_folds(data, split_folds, split_valid, split_seed)) {
          folds.push_back(split_to_json(data, s));
        }
      } else {
        folds.push_back(split_to_json(
            data, split(data, regime_from_string(split_regime), {split_train, split_valid, split_test}, split_seed)));
      }
      doc["folds"] = std::move(folds);
      emit(doc.dump(2) + "\n", split_out);
    } else if (*train_cmd) {
      train_cfg.mask = FeatureMask::parse(train_mask);
      const auto data = read_dataset(train_data);
      const NamedSplit s = resolve_split(data, train_split_file, train_fold, train_seed);
      const TrainResult result = train(train_cfg, s.train, s.valid, train_seed);
      save_checkpoint(train_ckpt, result.checkpoint);
      if (!train_history.empty()) emit(history_to_json(result.history).dump(2) + "\n", train_history);
      nlohmann::ordered_json summary;
      summary["best_epoch"] = result.checkpoint.best_epoch;
      summary["epochs_run"] = result.history.size();
      summary["train_examples"] = result.train_examples;
      if (!s.test.empty()) summary["test"] = metrics_to_json(evaluate(result.checkpoint, s.test));
      emit(summary.dump(2) + "\n", "");
    } else if (*eval_cmd) {
      const Checkpoint ckpt = load_checkpoint(eval_ckpt);
      const auto data = read_dataset(eval_data);
      std::vector<Example> subset = data;
      if (!eval_split_file.empty()) {
        NamedSplit s = load_split(data, eval_split_file, eval_fold);
        subset = eval_part == "train" ? s.train : eval_part == "valid" ? s.valid : s.test;
      }
      nlohmann::ordered_json doc = metrics_to_json(evaluate(ckpt, subset));
      if (eval_timing) {
        using clock = std::chrono::steady_clock;
        double total_ms = 0.0, worst_ms = 0.0;
        for (const auto& ex : subset) {
          const auto t0 = clock::now();
          (void)predict(ckpt, ex.cfg);
          const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
          total_ms += ms;
          worst_ms = std::max(worst_ms, ms);
        }
        doc["timing"] = {{"examples", subset.size()},
                         {"mean_ms_per_example", total_ms / static_cast<double>(subset.size())},
                         {"max_ms_per_example", worst_ms}};
      }
      emit(doc.dump(2) + "\n", "");
    } else if (*predict_cmd) {
      const Checkpoint ckpt = load_checkpoint(predict_ckpt);
      const double p = predict(ckpt, read_input(predict_in, false));
      nlohmann::ordered_json doc{{"probability", p}, {"vulnerable", classify(p)}};
      emit(doc.dump(2) + "\n", "");
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UnsupportedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
