#include "deepdfa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deepdfa/cfg_json.hpp"
#include "deepdfa/dataflow.hpp"
#include "deepdfa/error.hpp"
#include "rng.hpp"

namespace deepdfa {

namespace {

bool is_null_definition(const Statement& s) {
  return s.is_definition() && s.constants.size() == 1 && s.constants.front() == "NULL" && s.operators.empty() &&
         s.uses.empty() && !s.callee;
}

}  // namespace

std::string_view to_string(Label l) { return l == Label::Vulnerable ? "vulnerable" : "safe"; }

Label label_from_string(std::string_view s) {
  if (s == "vulnerable") return Label::Vulnerable;
  if (s == "safe") return Label::Safe;
  throw ValidationError("label must be 'vulnerable' or 'safe', got '" + std::string(s) + "'");
}

bool null_reaches_deref(const Cfg& cfg) {
  const GenKill gk = compute_gen_kill(cfg);
  const DataflowState solved = solve(cfg, gk.state);
  for (NodeId v = 0; v < cfg.size(); ++v) {
    const Statement& s = cfg.nodes[v];
    if (s.kind != StatementKind::DerefUse) continue;
    for (const auto& d : gk.defs.entries) {
      if (!is_null_definition(cfg.nodes[d.node])) continue;
      if (!std::binary_search(s.uses.begin(), s.uses.end(), d.variable)) continue;
      if (solved.in[v].test(d.id)) return true;
    }
  }
  return false;
}

void check_label(const Example& ex) {
  const Label oracle = null_reaches_deref(ex.cfg) ? Label::Vulnerable : Label::Safe;
  if (oracle != ex.label) {
    throw ValidationError("example " + ex.id + " is labelled " + std::string(to_string(ex.label)) +
                          " but the dataflow oracle says " + std::string(to_string(oracle)));
  }
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Example>& examples) {
  std::filesystem::create_directories(dir / "cfg");
  nlohmann::ordered_json manifest;
  auto list = nlohmann::ordered_json::array();
  for (const Example& ex : examples) {
    const std::string rel = "cfg/" + ex.id + ".json";
    write_cfg_file(dir / rel, ex.cfg);
    if (!ex.source.empty()) {
      std::ofstream src(dir / "cfg" / (ex.id + ".c"));
      src << ex.source;
    }
    list.push_back({{"id", ex.id}, {"project", ex.project}, {"label", std::string(to_string(ex.label))}, {"path", rel}});
  }
  manifest["examples"] = std::move(list);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

std::vector<Example> read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("examples") || !manifest["examples"].is_array()) {
    throw ValidationError("schema violation at $.examples: expected array");
  }
  std::vector<Example> out;
  std::set<std::string> ids;
  const auto& list = manifest["examples"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "$.examples[" + std::to_string(i) + "]";
    const auto& e = list[i];
    for (const char* key : {"id", "project", "label", "path"}) {
      if (!e.contains(key) || !e[key].is_string()) throw ValidationError("schema violation at " + path + "." + key + ": expected string");
    }
    Example ex;
    ex.id = e["id"].get<std::string>();
    if (!ids.insert(ex.id).second) throw ValidationError("duplicate example id " + ex.id);
    ex.project = e["project"].get<std::string>();
    ex.label = label_from_string(e["label"].get<std::string>());
    const auto cfg_path = dir / e["path"].get<std::string>();
    ex.cfg = read_cfg_file(cfg_path);
    auto src_path = cfg_path;
    src_path.replace_extension(".c");
    if (std::ifstream src(src_path); src) {
      std::stringstream buf;
      buf << src.rdbuf();
      ex.source = buf.str();
    }
    check_label(ex);
    out.push_back(std::move(ex));
  }
  return out;
}

Regime regime_from_string(std::string_view s) {
  if (s == "mixed") return Regime::Mixed;
  if (s == "cross") return Regime::Cross;
  throw ValidationError("regime must be 'mixed' or 'cross', got '" + std::string(s) + "'");
}

namespace {

void check_fractions(const SplitFractions& f) {
  if (f.train < 0 || f.valid < 0 || f.test < 0 || std::abs(f.train + f.valid + f.test - 1.0) > 1e-9) {
    throw ValidationError("split fractions must be non-negative and sum to 1");
  }
}

std::vector<std::string> projects_of(const std::vector<Example>& data) {
  std::set<std::string> tags;
  for (const auto& ex : data) tags.insert(ex.project);
  return {tags.begin(), tags.end()};
}

// Carves `valid_fraction` of `pool` (shuffled) into valid, rest into train.
void fill_train_valid(std::vector<std::size_t> pool, double valid_fraction, std::mt19937_64& rng, Split& s) {
  detail::shuffle(pool, rng);
  const auto n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(pool.size()) * valid_fraction));
  s.valid.assign(pool.begin(), pool.begin() + static_cast<long>(std::min(n_valid, pool.size())));
  s.train.assign(pool.begin() + static_cast<long>(s.valid.size()), pool.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.valid.begin(), s.valid.end());
}

}  // namespace

Split split(const std::vector<Example>& data, Regime regime, SplitFractions fractions, std::uint64_t seed) {
  check_fractions(fractions);
  std::mt19937_64 rng(seed);
  Split s;
  if (regime == Regime::Mixed) {
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    detail::shuffle(idx, rng);
    const double n = static_cast<double>(data.size());
    const auto n_train = std::min(data.size(), static_cast<std::size_t>(std::llround(n * fractions.train)));
    const auto n_valid =
        std::min(data.size() - n_train, static_cast<std::size_t>(std::llround(n * fractions.valid)));
    s.train.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
    s.valid.assign(idx.begin() + static_cast<long>(n_train), idx.begin() + static_cast<long>(n_train + n_valid));
    s.test.assign(idx.begin() + static_cast<long>(n_train + n_valid), idx.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.valid.begin(), s.valid.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
  }

  auto projects = projects_of(data);
  if (projects.size() < 2) {
    throw ValidationError("cross-project split needs at least 2 projects, found " + std::to_string(projects.size()));
  }
  detail::shuffle(projects, rng);
  auto held = static_cast<std::size_t>(std::llround(static_cast<double>(projects.size()) * fractions.test));
  held = std::clamp<std::size_t>(held, 1, projects.size() - 1);
  const std::set<std::string> test_projects(projects.begin(), projects.begin() + static_cast<long>(held));
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (test_projects.count(data[i].project)) {
      s.test.push_back(i);
    } else {
      pool.push_back(i);
    }
  }
  const double rest = fractions.train + fractions.valid;
  fill_train_valid(std::move(pool), rest == 0.0 ? 0.0 : fractions.valid / rest, rng, s);
  return s;
}

std::vector<Split> cross_project_folds(const std::vector<Example>& data, std::size_t folds, double valid_fraction,
                                       std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cross-project folds must be at least 2");
  auto projects = projects_of(data);
  if (projects.size() < folds) {
    throw ValidationError("cannot make " + std::to_string(folds) + " cross-project folds from " +
                          std::to_string(projects.size()) + " projects");
  }
  std::mt19937_64 rng(seed);
  detail::shuffle(projects, rng);
  std::map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < projects.size(); ++i) fold_of[projects[i]] = i % folds;

  std::vector<Split> out(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (fold_of[data[i].project] == f) {
        out[f].test.push_back(i);
      } else {
        pool.push_back(i);
      }
    }
    fill_train_valid(std::move(pool), valid_fraction, rng, out[f]);
  }
  return out;
}

std::vector<std::size_t> undersample(const std::vector<Example>& data, const std::vector<std::size_t>& indices,
                                     std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i : indices) (data.at(i).label == Label::Vulnerable ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw ValidationError("undersampling needs both classes in the training split");
  auto& minority = pos.size() <= neg.size() ? pos : neg;
  auto& majority = pos.size() <= neg.size() ? neg : pos;
  std::mt19937_64 rng(seed);
  detail::shuffle(majority, rng);
  majority.resize(minority.size());
  std::vector<std::size_t> out = minority;
  out.insert(out.end(), majority.begin(), majority.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace deepdfa
