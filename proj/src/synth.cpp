#include "deepdfa/synth.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "deepdfa/error.hpp"
#include "deepdfa/minic.hpp"
#include "rng.hpp"

namespace deepdfa {

namespace {

using detail::below;
using detail::chance;
using detail::pick;

// Surface idioms of one synthetic "project". Every allocator and pointer type
// is shared by at least two families so that a held-out family is never
// entirely out of vocabulary.
struct Family {
  std::string tag;
  std::vector<std::string> allocators;
  std::vector<std::string> pointer_types;
  std::vector<std::string> helpers;
  std::vector<std::string> compare_ops;
  double distractor_rate;
};

const std::vector<Family>& families() {
  static const std::vector<Family> kFamilies{
      {"atlas", {"malloc", "calloc"}, {"char*", "int*"}, {"abs", "hash"}, {">", "<"}, 0.5},
      {"borealis", {"malloc", "realloc"}, {"char*", "void*"}, {"hash", "clamp"}, {">", "!="}, 0.6},
      {"cobalt", {"calloc", "xmalloc"}, {"int*", "char*"}, {"abs", "clamp"}, {"<", "=="}, 0.4},
      {"dune", {"xmalloc", "strdup"}, {"char*"}, {"abs", "hash"}, {">=", "<"}, 0.5},
      {"ember", {"strdup", "realloc"}, {"char*", "void*"}, {"clamp", "hash"}, {"!=", ">"}, 0.7},
      {"fjord", {"malloc", "xmalloc", "calloc"}, {"void*", "int*"}, {"abs", "clamp"}, {"<=", ">"}, 0.5},
  };
  return kFamilies;
}

const std::vector<std::string> kPointerNames{"buf", "str", "p", "ptr", "data", "out", "dst", "name", "line", "tmp"};
const std::vector<std::string> kIntNames{"n", "len", "i", "count", "size", "idx", "k", "total", "pos", "step"};
const std::vector<std::string> kParamNames{"argc", "flags", "mode", "limit", "width", "depth", "level", "opt"};
const std::vector<std::string> kFunctionNames{"parse", "load", "copy", "render", "decode", "fill", "scan", "emit"};

class Writer {
 public:
  void line(const std::string& s) { out_ << std::string(2 * indent_, ' ') << s << "\n"; }
  void open(const std::string& header) {
    line(header + " {");
    ++indent_;
  }
  void close() {
    --indent_;
    line("}");
  }
  void close_open(const std::string& header) {
    --indent_;
    line("} " + header + " {");
    ++indent_;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
  int indent_ = 0;
};

class Generator {
 public:
  Generator(std::mt19937_64& rng, const Family& fam, const SynthOptions& opts)
      : rng_(rng), fam_(fam), opts_(opts) {}

  std::string run(Label label, std::string& pattern) {
    const std::string fname = pick(rng_, kFunctionNames) + "_" + std::to_string(below(rng_, 1000));
    params_ = {pick(rng_, kParamNames)};
    do {
      params_.resize(1);
      params_.push_back(pick(rng_, kParamNames));
    } while (params_[1] == params_[0]);
    ints_ = params_;
    ptr_ = pick(rng_, kPointerNames);
    type_ = pick(rng_, fam_.pointer_types);

    w_.open("int " + fname + "(int " + params_[0] + ", int " + params_[1] + ")");
    declare_int();
    distractors(below(rng_, opts_.max_distractors + 1), 0, true);
    pattern = emit_pattern(label);
    distractors(below(rng_, opts_.max_distractors + 1), 0, true);
    w_.line("return " + (chance(rng_, 0.5) ? std::string("0") : pick(rng_, ints_)) + ";");
    w_.close();
    return w_.str();
  }

 private:
  std::string constant() { return std::to_string(1 + below(rng_, 16)); }

  std::string fresh_int_name() {
    for (int tries = 0; tries < 50; ++tries) {
      std::string name = pick(rng_, kIntNames);
      if (std::find(ints_.begin(), ints_.end(), name) == ints_.end()) return name;
    }
    return "v" + std::to_string(ints_.size());
  }

  void declare_int() {
    const std::string name = fresh_int_name();
    if (chance(rng_, 0.5)) {
      w_.line("int " + name + " = " + pick(rng_, params_) + " * " + constant() + ";");
    } else {
      w_.line("int " + name + " = " + pick(rng_, fam_.helpers) + "(" + pick(rng_, params_) + ");");
    }
    ints_.push_back(name);
  }

  std::string condition() {
    return pick(rng_, ints_) + " " + pick(rng_, fam_.compare_ops) + " " + constant();
  }

  void simple_distractor() {
    const std::string target = pick(rng_, ints_);
    switch (below(rng_, 4)) {
      case 0:
        w_.line(target + " = " + pick(rng_, ints_) + " + " + constant() + ";");
        break;
      case 1:
        w_.line(target + " = " + pick(rng_, fam_.helpers) + "(" + pick(rng_, ints_) + ");");
        break;
      case 2:
        w_.line(target + " = " + pick(rng_, ints_) + " - " + pick(rng_, ints_) + ";");
        break;
      default:
        w_.line("log_value(" + pick(rng_, ints_) + ");");
        break;
    }
  }

  // Filler that never touches the tracked pointer. Nested control flow only
  // when `allow_compound` and the depth budget permits.
  void distractors(std::size_t count, std::size_t depth, bool allow_compound) {
    for (std::size_t i = 0; i < count; ++i) {
      if (!chance(rng_, fam_.distractor_rate + 0.3)) continue;
      const bool compound = allow_compound && depth < opts_.max_depth && chance(rng_, 0.3);
      if (!compound) {
        simple_distractor();
      } else if (chance(rng_, 0.5)) {
        w_.open("if (" + condition() + ")");
        simple_distractor();
        w_.close();
      } else {
        const std::string v = pick(rng_, ints_);
        w_.open("while (" + v + " < " + constant() + ")");
        w_.line(v + " = " + v + " + 1;");
        w_.close();
      }
    }
  }

  std::string allocation() {
    const std::string api = pick(rng_, fam_.allocators);
    const std::string n = pick(rng_, ints_);
    if (api == "calloc") return "calloc(" + n + ", " + constant() + ")";
    if (api == "realloc") return "realloc(" + ptr_ + ", " + n + " + " + constant() + ")";
    if (api == "strdup") return "strdup(\"" + std::string(1, static_cast<char>('a' + below(rng_, 26))) + "\")";
    if (chance(rng_, 0.5)) return api + "(" + n + " * " + constant() + ")";
    return api + "(" + constant() + ")";
  }

  void assign_alloc() { w_.line(ptr_ + " = " + allocation() + ";"); }
  void assign_null() { w_.line(ptr_ + " = NULL;"); }

  void declare_null() {
    if (chance(rng_, 0.6)) {
      w_.line(type_ + " " + ptr_ + " = NULL;");
    } else {
      w_.line(type_ + " " + ptr_ + ";");
      if (chance(rng_, 0.5)) simple_distractor();
      assign_null();
    }
  }

  void declare_alloc() { w_.line(type_ + " " + ptr_ + " = " + allocation() + ";"); }

  void maybe_mid() {
    if (chance(rng_, 0.3)) simple_distractor();
  }

  void dereference() {
    switch (below(rng_, 3)) {
      case 0:
        w_.line(ptr_ + "[" + pick(rng_, ints_) + " - 1];");
        break;
      case 1:
        w_.line("*" + ptr_ + " = " + constant() + ";");
        break;
      default:
        w_.line(ptr_ + "[" + constant() + "] = " + constant() + ";");
        break;
    }
  }

  std::string emit_pattern(Label label) {
    using Pattern = std::pair<const char*, std::function<void()>>;
    const bool branches = opts_.max_depth >= 1;
    const bool nested = opts_.max_depth >= 2;
    std::vector<Pattern> menu;
    if (label == Label::Vulnerable) {
      menu.emplace_back("null-then-deref", [&] {
        declare_null();
        maybe_mid();
        maybe_mid();
        dereference();
      });
      if (branches) {
        menu.emplace_back("conditional-alloc", [&] {
          declare_null();
          maybe_mid();
          w_.open("if (" + condition() + ")");
          assign_alloc();
          w_.close();
          dereference();
        });
        menu.emplace_back("loop-alloc", [&] {
          declare_null();
          const std::string v = pick(rng_, ints_);
          w_.open("while (" + v + " < " + constant() + ")");
          assign_alloc();
          w_.line(v + " = " + v + " + 1;");
          w_.close();
          dereference();
        });
        menu.emplace_back("alloc-in-then-only", [&] {
          declare_null();
          w_.open("if (" + condition() + ")");
          assign_alloc();
          w_.close_open("else");
          simple_distractor();
          w_.close();
          dereference();
        });
        menu.emplace_back("conditional-null", [&] {
          declare_alloc();
          maybe_mid();
          w_.open("if (" + condition() + ")");
          assign_null();
          w_.close();
          dereference();
        });
      }
      if (nested) {
        menu.emplace_back("nested-alloc", [&] {
          declare_null();
          w_.open("if (" + condition() + ")");
          w_.open("if (" + condition() + ")");
          assign_alloc();
          w_.close();
          w_.close();
          dereference();
        });
      }
    } else {
      menu.emplace_back("null-then-alloc", [&] {
        declare_null();
        maybe_mid();
        assign_alloc();
        dereference();
      });
      menu.emplace_back("alloc-only", [&] {
        declare_alloc();
        maybe_mid();
        dereference();
      });
      if (branches) {
        menu.emplace_back("alloc-both-branches", [&] {
          declare_null();
          w_.open("if (" + condition() + ")");
          assign_alloc();
          w_.close_open("else");
          assign_alloc();
          w_.close();
          dereference();
        });
        menu.emplace_back("branch-then-alloc", [&] {
          declare_null();
          w_.open("if (" + condition() + ")");
          simple_distractor();
          w_.close();
          assign_alloc();
          dereference();
        });
        menu.emplace_back("conditional-realloc", [&] {
          declare_alloc();
          w_.open("if (" + condition() + ")");
          assign_alloc();
          w_.close();
          dereference();
        });
        menu.emplace_back("loop-then-alloc", [&] {
          declare_null();
          const std::string v = pick(rng_, ints_);
          w_.open("while (" + v + " < " + constant() + ")");
          w_.line(v + " = " + v + " + 1;");
          w_.close();
          assign_alloc();
          dereference();
        });
        menu.emplace_back("null-reset-in-branch", [&] {
          declare_alloc();
          w_.open("if (" + condition() + ")");
          assign_null();
          assign_alloc();
          w_.close();
          dereference();
        });
      }
    }
    const auto& chosen = menu[below(rng_, menu.size())];
    chosen.second();
    return chosen.first;
  }

  std::mt19937_64& rng_;
  const Family& fam_;
  const SynthOptions& opts_;
  Writer w_;
  std::vector<std::string> params_;
  std::vector<std::string> ints_;
  std::string ptr_;
  std::string type_;
};

}  // namespace

const std::vector<std::string>& synth_projects() {
  static const std::vector<std::string> kTags = [] {
    std::vector<std::string> tags;
    for (const auto& f : families()) tags.push_back(f.tag);
    return tags;
  }();
  return kTags;
}

std::vector<Example> synth_generate(const SynthOptions& options) {
  if (options.n == 0) throw ValidationError("synthetic corpus size must be at least 1");
  if (!(options.vulnerable_fraction >= 0.0 && options.vulnerable_fraction <= 1.0)) {
    throw ValidationError("vulnerable fraction must lie in [0, 1]");
  }
  std::mt19937_64 rng(options.seed);
  const auto n_vuln = static_cast<std::size_t>(std::llround(static_cast<double>(options.n) * options.vulnerable_fraction));
  std::vector<Label> labels(options.n, Label::Safe);
  for (std::size_t i = 0; i < n_vuln; ++i) labels[i] = Label::Vulnerable;
  detail::shuffle(labels, rng);

  std::vector<Example> out;
  out.reserve(options.n);
  for (std::size_t i = 0; i < options.n; ++i) {
    const Family& fam = families()[below(rng, families().size())];
    Generator gen(rng, fam, options);
    std::string pattern;
    Example ex;
    ex.source = gen.run(labels[i], pattern);
    char id[32];
    std::snprintf(id, sizeof id, "ex%05zu", i);
    ex.id = id;
    ex.project = fam.tag;
    ex.label = labels[i];
    ex.cfg = parse_function(ex.source);
    const Label oracle = null_reaches_deref(ex.cfg) ? Label::Vulnerable : Label::Safe;
    if (oracle != ex.label) {
      throw Error("synthetic template '" + pattern + "' produced a " + std::string(to_string(oracle)) +
                  " program for a " + std::string(to_string(ex.label)) + " slot:\n" + ex.source);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace deepdfa
