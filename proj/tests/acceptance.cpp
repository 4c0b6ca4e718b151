// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "deepdfa/cfg_json.hpp"
#include "deepdfa/dataflow.hpp"
#include "deepdfa/dataset.hpp"
#include "deepdfa/embedding.hpp"
#include "deepdfa/error.hpp"
#include "deepdfa/metrics.hpp"
#include "deepdfa/minic.hpp"
#include "deepdfa/model.hpp"
#include "deepdfa/synth.hpp"
#include "deepdfa/train.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace deepdfa;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream out;
  out.precision(digits);
  out << std::fixed << x;
  return out.str();
}

std::string run_command(const std::string& cmd, int& status) {
  std::array<char, 4096> buf{};
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    status = -1;
    return out;
  }
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) out += buf.data();
  status = pclose(pipe);
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Expected OUT rows for v1..v4 after rounds 1..3 of the synchronous trace of
// data/null_deref.c.
const std::array<std::array<const char*, 4>, 3> kExpectedTrace{{
    {"100", "000", "010", "001"},
    {"100", "100", "010", "011"},
    {"100", "100", "010", "111"},
}};

Outcome golden_trace() {
  const auto t0 = Clock::now();
  int status = 0;
  const std::string out =
      run_command(std::string(DEEPDFA_CLI) + " dfa --deref-defs --trace 3 " + DEEPDFA_TEST_DATA "/null_deref.c", status);
  const double elapsed = seconds_since(t0);
  if (status != 0) return {false, "dfa exited with status " + std::to_string(status)};
  const auto doc = nlohmann::json::parse(out);
  std::size_t cells = 0, matched = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t v = 0; v < 4; ++v) {
      ++cells;
      matched += doc["trace"][r + 1]["out"][v + 1].get<std::string>() == kExpectedTrace[r][v];
    }
  }
  return {matched == cells && elapsed < 1.0,
          std::to_string(matched) + "/" + std::to_string(cells) + " cells, " + fmt(elapsed, 3) + " s"};
}

Outcome solver_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::size_t agree = 0, monotone = 0, stable = 0;
  const std::size_t graphs = 200;
  for (std::size_t i = 0; i < graphs; ++i) {
    const Cfg cfg = testing::random_cfg(rng, 20, 8);
    const GenKill gk = compute_gen_kill(cfg);
    const DataflowState s = solve(cfg, gk.state);
    const auto oracle = testing::oracle_reaching_definitions(cfg);
    bool same = true;
    for (std::size_t v = 0; v < cfg.size(); ++v) {
      for (std::size_t d = 0; d < gk.defs.size(); ++d) {
        same = same && s.out[v].test(d) == (oracle.out[v].count(d) == 1) &&
               s.in[v].test(d) == (oracle.in[v].count(d) == 1);
      }
    }
    agree += same;
    const std::size_t r = rounds_to_fixpoint(cfg, gk.state);
    const auto snaps = trace(cfg, gk.state, r + 1);
    bool mono = true;
    for (std::size_t k = 1; k < snaps.size(); ++k) {
      for (std::size_t v = 0; v < cfg.size(); ++v) mono = mono && snaps[k - 1][v].is_subset_of(snaps[k][v]);
    }
    monotone += mono;
    stable += snaps[r] == snaps[r + 1] && snaps[r] == s.out;
  }
  const double elapsed = seconds_since(t0);
  return {agree == graphs && monotone == graphs && stable == graphs && elapsed < 10.0,
          "oracle " + std::to_string(agree) + "/200, monotone " + std::to_string(monotone) + "/200, stable " +
              std::to_string(stable) + "/200, " + fmt(elapsed, 3) + " s"};
}

Outcome metric_formula() {
  const double f1 = f1_score(0.5398, 0.9281);
  return {std::abs(f1 - 0.6826) <= 5e-4, "F1 = " + fmt(f1, 6) + " (target 0.6826 +/- 5e-4)"};
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  ModelConfig config;  // hidden 32, 5 steps, 3 output layers
  config.k = 4;
  const Cfg cfg = parse_function("void f(int n) { char *p = NULL; p = malloc(n * 4); }");
  const FeatureMatrix feats = encode(cfg, build_vocabulary({cfg}, config.k));
  const ModelParams params = testing::random_params(rng, config, feature_width(config.k));
  const double end_to_end =
      testing::model_gradient_error(params, config, make_batch({&cfg}, {&feats}), {1}, config.l2_weight);

  // Each composite on its own random instance.
  const std::size_t n = 4, h = 6;
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}, {1, 3}, {2, 3}, {3, 1}};
  const std::vector<std::size_t> seg{0, 0, 1, 1};
  auto m = [&](std::size_t r, std::size_t c) { return testing::random_matrix(rng, r, c, 0.8); };
  using Build = std::function<Var(Tape&, const std::vector<Var>&)>;
  std::vector<std::tuple<std::string, std::vector<Matrix>, Build>> composites;
  composites.emplace_back("input projection", std::vector<Matrix>{m(n, 7), m(7, h), m(1, h)},
                          [](Tape&, const std::vector<Var>& v) {
                            return sum_squares(relu(add(matmul(v[0], v[1]), v[2])));
                          });
  composites.emplace_back("aggregate", std::vector<Matrix>{m(n, h), m(h, h), m(1, h)},
                          [&](Tape&, const std::vector<Var>& v) {
                            return sum_squares(aggregate_messages(v[0], edges, v[1], v[2]));
                          });
  std::vector<Matrix> gru_in{m(n, h), m(n, h)};
  for (int i = 0; i < 3; ++i) {
    gru_in.push_back(m(h, h));
    gru_in.push_back(m(h, h));
    gru_in.push_back(m(1, h));
  }
  composites.emplace_back("gru", gru_in, [](Tape&, const std::vector<Var>& v) {
    return sum_squares(gru_cell(v[0], v[1], {v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]}));
  });
  composites.emplace_back("pooling", std::vector<Matrix>{m(n, h), m(h, 1), m(1, 1), m(h, h), m(1, h)},
                          [&](Tape&, const std::vector<Var>& v) {
                            return sum_squares(attention_pool(v[0], {v[1], v[2], v[3], v[4]}, seg, 2).readout);
                          });
  composites.emplace_back(
      "classifier", std::vector<Matrix>{m(2, h), m(h, h), m(1, h), m(h, h), m(1, h), m(h, 1), m(1, 1)},
      [](Tape&, const std::vector<Var>& v) {
        const std::vector<std::pair<Var, Var>> layers{{v[1], v[2]}, {v[3], v[4]}, {v[5], v[6]}};
        return sum_squares(classifier_head(v[0], layers));
      });
  composites.emplace_back("loss", std::vector<Matrix>{m(3, 1), m(2, 2)}, [](Tape& t, const std::vector<Var>& v) {
    Matrix y(3, 1);
    y(1, 0) = 1.0;
    return add(bce_with_logits(v[0], t.constant(y)), scale(sum_squares(v[1]), 0.01));
  });

  bool ok = end_to_end < 1e-5;
  std::string detail = "end-to-end " + fmt(end_to_end * 1e9, 3) + "e-9";
  for (const auto& [name, inputs, build] : composites) {
    auto value = [&, &build = build](const std::vector<Matrix>& xs) {
      Tape tape;
      std::vector<Var> vars;
      for (const auto& x : xs) vars.push_back(tape.variable(x));
      return build(tape, vars).value()(0, 0);
    };
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.variable(x));
    const GradientResult g = gradients(build(tape, vars), vars);
    const double err = testing::max_relative_error(value, inputs, g.grads);
    ok = ok && err < 1e-6;
    detail += ", " + name + " " + fmt(err * 1e9, 3) + "e-9";
  }
  const double elapsed = seconds_since(t0);
  return {ok && elapsed < 30.0, detail + ", " + fmt(elapsed, 2) + " s"};
}

struct LearningRun {
  Outcome outcome;
  Checkpoint checkpoint;
  std::vector<Example> test;
  fs::path data_dir;
};

ModelConfig small_corpus_config() {
  ModelConfig c;
  c.batch_size = 32;
  c.epochs = 50;
  return c;
}

constexpr std::uint64_t kCorpusSeed = 1;

LearningRun synthetic_learning(const fs::path& work) {
  LearningRun run;
  SynthOptions opts;
  opts.n = 800;
  opts.seed = kCorpusSeed;
  const std::vector<Example> data = synth_generate(opts);
  run.data_dir = work / "corpus";
  write_dataset(run.data_dir, data);

  const Split mixed = split(data, Regime::Mixed, {0.625, 0.125, 0.25}, kCorpusSeed);
  const auto t0 = Clock::now();
  const TrainResult r =
      train(small_corpus_config(), select(data, mixed.train), select(data, mixed.valid), kCorpusSeed);
  const double train_seconds = seconds_since(t0);
  run.test = select(data, mixed.test);
  const Metrics m = evaluate(r.checkpoint, run.test);
  run.checkpoint = r.checkpoint;

  // Held-out families: two of the six template families never appear in training.
  const Split cross = split(data, Regime::Cross, {0.625, 0.125, 0.25}, kCorpusSeed);
  const TrainResult rc =
      train(small_corpus_config(), select(data, cross.train), select(data, cross.valid), kCorpusSeed);
  const Metrics mc = evaluate(rc.checkpoint, select(data, cross.test));
  std::set<std::string> held;
  for (std::size_t i : cross.test) held.insert(data[i].project);
  std::string held_list;
  for (const auto& p : held) held_list += (held_list.empty() ? "" : "+") + p;

  const double drop = (m.f1 - mc.f1) * 100.0;
  const bool vulnerable_flagged = classify(predict(r.checkpoint, parse_function(read_text(DEEPDFA_TEST_DATA "/null_deref.c"))));
  const bool patched_clear = !classify(predict(
      r.checkpoint,
      parse_function("void f(int argc) { char *str = NULL; str = malloc(10 * argc); str[(10 * argc)-1]; }")));

  run.outcome.pass = m.f1 >= 0.95 && r.history.size() <= 50 && train_seconds < 300.0 && drop < 10.0;
  run.outcome.detail = "mixed F1 " + fmt(m.f1) + " on " + std::to_string(run.test.size()) + " held-out (train " +
                       std::to_string(mixed.train.size()) + ", best epoch " +
                       std::to_string(r.checkpoint.best_epoch) + "/" + std::to_string(r.history.size()) + ", " +
                       fmt(train_seconds, 1) + " s); cross F1 " + fmt(mc.f1) + " on unseen " + held_list +
                       " (drop " + fmt(drop, 2) + " points); null-deref example " +
                       (vulnerable_flagged ? "flagged" : "missed") + ", patched variant " +
                       (patched_clear ? "clear" : "flagged");
  return run;
}

Outcome invariant_suites(const fs::path& work) {
  const auto t0 = Clock::now();
  std::vector<std::string> failed;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  SynthOptions opts;
  opts.n = 240;
  opts.seed = 99;
  const std::vector<Example> data = synth_generate(opts);
  std::vector<Cfg> cfgs;
  for (const auto& ex : data) cfgs.push_back(ex.cfg);

  // Embedding: width, one-hot per block, masked blocks zero.
  const std::size_t k = 12;
  const Vocabulary vocab = build_vocabulary(cfgs, k);
  bool embed_ok = true;
  for (const char* mask_text : {"api,datatype,constant,operator", "api", "constant,operator"}) {
    const FeatureMask mask = FeatureMask::parse(mask_text);
    for (const auto& cfg : cfgs) {
      const FeatureMatrix f = encode(cfg, vocab, mask);
      embed_ok = embed_ok && f.cols == feature_width(k) && f.rows == cfg.size();
      for (std::size_t r = 0; r < f.rows; ++r) {
        for (Property p : kAllProperties) {
          std::size_t hot = 0;
          for (std::size_t s = 0; s < block_width(k); ++s) hot += f.at(r, static_cast<std::size_t>(p) * block_width(k) + s);
          embed_ok = embed_ok && hot == ((cfg.nodes[r].is_definition() && mask.enabled(p)) ? 1u : 0u);
        }
      }
    }
  }
  require(embed_ok, "embedding");

  // Forward permutation invariance.
  ModelConfig mc;
  mc.k = k;
  std::mt19937_64 rng(5);
  const ModelParams params = testing::random_params(rng, mc, feature_width(k));
  double worst = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const Cfg& cfg = cfgs[i];
    const FeatureMatrix f = encode(cfg, vocab);
    std::vector<std::size_t> perm(cfg.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Cfg pc = cfg;
    FeatureMatrix pf = f;
    for (std::size_t v = 0; v < cfg.size(); ++v) {
      pc.nodes[perm[v]] = cfg.nodes[v];
      for (std::size_t c = 0; c < f.cols; ++c) pf.data[perm[v] * f.cols + c] = f.at(v, c);
    }
    for (auto& [u, v] : pc.edges) {
      u = perm[u];
      v = perm[v];
    }
    pc.entry = perm[cfg.entry];
    pc.exit = perm[cfg.exit];
    pc.canonicalize();
    worst = std::max(worst, std::abs(forward(params, mc, f, cfg).probability - forward(params, mc, pf, pc).probability));
  }
  require(worst <= 1e-9, "permutation invariance");

  // Undersampling ratio.
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  SynthOptions skew = opts;
  skew.vulnerable_fraction = 0.06;
  const auto skewed = synth_generate(skew);
  std::vector<std::size_t> skew_all(skewed.size());
  std::iota(skew_all.begin(), skew_all.end(), 0);
  const auto balanced = undersample(skewed, skew_all, 3);
  std::size_t vuln = 0;
  for (std::size_t i : balanced) vuln += skewed[i].label == Label::Vulnerable;
  require(2 * vuln == balanced.size() && vuln == 14, "undersample ratio");

  // Split hygiene.
  bool split_ok = true;
  for (Regime regime : {Regime::Mixed, Regime::Cross}) {
    const Split s = split(data, regime, {0.8, 0.1, 0.1}, 4);
    std::set<std::string> ids, train_projects;
    for (const auto* part : {&s.train, &s.valid, &s.test}) {
      for (std::size_t i : *part) split_ok = split_ok && ids.insert(data[i].id).second;
    }
    for (std::size_t i : s.train) train_projects.insert(data[i].project);
    if (regime == Regime::Cross) {
      for (std::size_t i : s.test) split_ok = split_ok && train_projects.count(data[i].project) == 0;
    }
  }
  require(split_ok, "split hygiene");

  // Label soundness on reload, including a tampered manifest.
  const fs::path dir = work / "invariants";
  write_dataset(dir, data);
  bool sound = read_dataset(dir).size() == data.size();
  auto manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  manifest["examples"][3]["label"] = manifest["examples"][3]["label"] == "safe" ? "vulnerable" : "safe";
  std::ofstream(dir / "manifest.json") << manifest.dump();
  try {
    read_dataset(dir);
    sound = false;
  } catch (const ValidationError&) {
  }
  require(sound, "label soundness");

  // Seed determinism end to end.
  ModelConfig tiny;
  tiny.hidden = 8;
  tiny.steps = 3;
  tiny.k = 50;
  tiny.batch_size = 32;
  tiny.epochs = 3;
  auto metrics_for = [&](std::uint64_t seed) {
    const auto corpus = synth_generate(SynthOptions{120, seed, 0.5, 2, 3});
    const Split s = split(corpus, Regime::Mixed, {0.6, 0.2, 0.2}, seed);
    const TrainResult r = train(tiny, select(corpus, s.train), select(corpus, s.valid), seed);
    return predict_all(r.checkpoint, select(corpus, s.test));
  };
  require(metrics_for(8) == metrics_for(8), "determinism");

  const double elapsed = seconds_since(t0);
  std::string detail = failed.empty() ? "embedding, permutation (max " + fmt(worst * 1e12, 3) +
                                            "e-12), undersample, split hygiene, label soundness, determinism"
                                      : "failed:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty() && elapsed < 120.0, detail + ", " + fmt(elapsed, 2) + " s"};
}

Outcome inference_latency(const LearningRun& run, const fs::path& work) {
  if (run.checkpoint.params.entries.empty()) return {false, "no checkpoint from the learning run"};
  const fs::path ckpt = work / "ckpt" / "model.json";
  save_checkpoint(ckpt, run.checkpoint);
  int status = 0;
  const std::string out = run_command(
      std::string(DEEPDFA_CLI) + " eval --timing --ckpt " + ckpt.string() + " --data " + run.data_dir.string(), status);
  if (status != 0) return {false, "eval exited with status " + std::to_string(status)};
  const auto doc = nlohmann::json::parse(out);
  const double mean = doc["timing"]["mean_ms_per_example"].get<double>();
  const double worst = doc["timing"]["max_ms_per_example"].get<double>();
  return {mean < 10.0, "mean " + fmt(mean, 3) + " ms, max " + fmt(worst, 3) + " ms over " +
                           std::to_string(doc["timing"]["examples"].get<std::size_t>()) + " functions (eval --timing)"};
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "deepdfa_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << std::endl;
  };

  report(1, "golden reaching-definitions trace", golden_trace);
  report(2, "solver/oracle equivalence", solver_oracle);
  report(3, "metric formula", metric_formula);
  report(4, "gradient checks", gradient_checks);
  LearningRun learning;
  report(5, "synthetic-corpus learning", [&] {
    learning = synthetic_learning(work);
    return learning.outcome;
  });
  report(6, "invariant suites", [&] { return invariant_suites(work); });
  report(7, "inference latency", [&] { return inference_latency(learning, work); });
  return failures == 0 ? 0 : 1;
}
