#include <filesystem>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "deepdfa/cfg_json.hpp"
#include "deepdfa/dataflow.hpp"
#include "deepdfa/dataset.hpp"
#include "deepdfa/embedding.hpp"
#include "deepdfa/error.hpp"
#include "deepdfa/metrics.hpp"
#include "deepdfa/minic.hpp"
#include "deepdfa/synth.hpp"
#include "deepdfa/train.hpp"

namespace py = pybind11;
using namespace deepdfa;

namespace {

// Documents cross the boundary as JSON text; the Python package decodes them.

std::string parse(const std::string& source, bool deref_defs) {
  return dump_cfg(parse_function(source, ParseOptions{deref_defs}));
}

std::string dataflow(const std::string& cfg_json) {
  const Cfg cfg = load_cfg(cfg_json);
  const GenKill gk = compute_gen_kill(cfg);
  return dataflow_report(cfg, gk, solve(cfg, gk.state)).dump();
}

std::string trace_rounds(const std::string& cfg_json, std::size_t rounds) {
  const Cfg cfg = load_cfg(cfg_json);
  return trace_report(cfg, trace(cfg, compute_gen_kill(cfg).state, rounds)).dump();
}

std::string vocabulary(const std::vector<std::string>& cfg_jsons, std::size_t k) {
  std::vector<Cfg> corpus;
  for (const auto& doc : cfg_jsons) corpus.push_back(load_cfg(doc));
  return vocabulary_to_json(build_vocabulary(corpus, k)).dump();
}

py::array_t<std::uint8_t> encode_cfg(const std::string& cfg_json, const std::string& vocab_json,
                                     const std::string& mask) {
  const FeatureMatrix m = encode(load_cfg(cfg_json), vocabulary_from_json(nlohmann::json::parse(vocab_json)),
                                 FeatureMask::parse(mask));
  py::array_t<std::uint8_t> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

std::string metrics(const std::vector<double>& probabilities, const std::vector<int>& labels, double threshold) {
  return metrics_to_json(compute_metrics(probabilities, labels, threshold)).dump();
}

std::size_t synth(const std::string& dir, std::size_t n, std::uint64_t seed, double vulnerable_fraction) {
  SynthOptions opts;
  opts.n = n;
  opts.seed = seed;
  opts.vulnerable_fraction = vulnerable_fraction;
  const auto data = synth_generate(opts);
  write_dataset(dir, data);
  return data.size();
}

std::string train_on(const std::string& data_dir, const std::string& ckpt, std::uint64_t seed,
                     const std::string& config_json) {
  const ModelConfig config = config_from_json(nlohmann::json::parse(config_json));
  const auto data = read_dataset(data_dir);
  const Split s = split(data, Regime::Mixed, {}, seed);
  const auto test = select(data, s.test);
  const TrainResult r = train(config, select(data, s.train), select(data, s.valid), seed);
  save_checkpoint(ckpt, r.checkpoint);
  nlohmann::ordered_json out;
  out["best_epoch"] = r.checkpoint.best_epoch;
  out["history"] = history_to_json(r.history);
  if (!test.empty()) out["test"] = metrics_to_json(evaluate(r.checkpoint, test));
  return out.dump();
}

std::string evaluate_on(const std::string& ckpt, const std::string& data_dir) {
  return metrics_to_json(evaluate(load_checkpoint(ckpt), read_dataset(data_dir))).dump();
}

double predict_one(const std::string& ckpt, const std::string& cfg_json) {
  return predict(load_checkpoint(ckpt), load_cfg(cfg_json));
}

std::string default_config() { return config_to_json(ModelConfig{}).dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reaching-definitions analysis and dataflow-embedding graph classifier";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<UnsupportedError>(m, "UnsupportedError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("parse", &parse, py::arg("source"), py::arg("deref_defs") = false);
  m.def("dataflow", &dataflow, py::arg("cfg_json"));
  m.def("trace", &trace_rounds, py::arg("cfg_json"), py::arg("rounds"));
  m.def("build_vocabulary", &vocabulary, py::arg("cfg_jsons"), py::arg("k"));
  m.def("encode", &encode_cfg, py::arg("cfg_json"), py::arg("vocab_json"),
        py::arg("mask") = "api,datatype,constant,operator");
  m.def("f1_score", &f1_score, py::arg("precision"), py::arg("recall"));
  m.def("compute_metrics", &metrics, py::arg("probabilities"), py::arg("labels"),
        py::arg("threshold") = kDecisionThreshold);
  m.def("synth", &synth, py::arg("directory"), py::arg("n"), py::arg("seed") = 0,
        py::arg("vulnerable_fraction") = 0.5);
  m.def("default_config", &default_config);
  m.def("train", &train_on, py::arg("data_dir"), py::arg("checkpoint"), py::arg("seed"), py::arg("config_json"),
        py::call_guard<py::gil_scoped_release>());
  m.def("evaluate", &evaluate_on, py::arg("checkpoint"), py::arg("data_dir"));
  m.def("predict", &predict_one, py::arg("checkpoint"), py::arg("cfg_json"));
}
