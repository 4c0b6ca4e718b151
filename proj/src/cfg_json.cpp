#include "deepdfa/cfg_json.hpp"

#include <fstream>
#include <sstream>

#include "deepdfa/error.hpp"

namespace deepdfa {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw ValidationError("schema violation at " + path + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path + "." + key, "missing field");
  return *it;
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) schema_error(path, "expected string");
  return v.get<std::string>();
}

std::optional<std::string> as_optional_string(const json& v, const std::string& path) {
  if (v.is_null()) return std::nullopt;
  return as_string(v, path);
}

std::size_t as_id(const json& v, const std::string& path) {
  if (!v.is_number_integer()) schema_error(path, "expected integer");
  const auto id = v.get<long long>();
  if (id < 0) schema_error(path, "expected non-negative integer");
  return static_cast<std::size_t>(id);
}

std::vector<std::string> as_string_list(const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "expected array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_string(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

json optional_to_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

nlohmann::ordered_json cfg_to_json(const Cfg& cfg) {
  Cfg canon = cfg;
  canon.canonicalize();
  nlohmann::ordered_json doc;
  doc["function"] = canon.function;
  auto nodes = nlohmann::ordered_json::array();
  for (std::size_t id = 0; id < canon.nodes.size(); ++id) {
    const Statement& s = canon.nodes[id];
    nlohmann::ordered_json n;
    n["id"] = id;
    n["kind"] = std::string(to_string(s.kind));
    n["code"] = s.code;
    n["target"] = optional_to_json(s.target);
    n["type"] = optional_to_json(s.type);
    n["callee"] = optional_to_json(s.callee);
    n["constants"] = s.constants;
    n["operators"] = s.operators;
    n["uses"] = s.uses;
    nodes.push_back(std::move(n));
  }
  doc["nodes"] = std::move(nodes);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& [from, to] : canon.edges) edges.push_back({from, to});
  doc["edges"] = std::move(edges);
  doc["entry"] = canon.entry;
  doc["exit"] = canon.exit;
  return doc;
}

Cfg cfg_from_json(const json& doc) {
  if (!doc.is_object()) schema_error("$", "expected object");
  Cfg cfg;
  cfg.function = as_string(field(doc, "function", "$"), "$.function");

  const json& nodes = field(doc, "nodes", "$");
  if (!nodes.is_array()) schema_error("$.nodes", "expected array");
  std::vector<std::optional<Statement>> slots(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "$.nodes[" + std::to_string(i) + "]";
    const json& n = nodes[i];
    if (!n.is_object()) schema_error(path, "expected object");
    const std::size_t id = as_id(field(n, "id", path), path + ".id");
    if (id >= nodes.size()) schema_error(path + ".id", "id " + std::to_string(id) + " outside [0, " + std::to_string(nodes.size()) + ")");
    if (slots[id]) schema_error(path + ".id", "duplicate id " + std::to_string(id));

    Statement s;
    const std::string kind = as_string(field(n, "kind", path), path + ".kind");
    try {
      s.kind = statement_kind_from_string(kind);
    } catch (const ValidationError&) {
      schema_error(path + ".kind", "unknown kind '" + kind + "'");
    }
    s.code = as_string(field(n, "code", path), path + ".code");
    s.target = as_optional_string(field(n, "target", path), path + ".target");
    s.type = as_optional_string(field(n, "type", path), path + ".type");
    s.callee = as_optional_string(field(n, "callee", path), path + ".callee");
    s.constants = as_string_list(field(n, "constants", path), path + ".constants");
    s.operators = as_string_list(field(n, "operators", path), path + ".operators");
    s.uses = as_string_list(field(n, "uses", path), path + ".uses");
    std::sort(s.uses.begin(), s.uses.end());
    s.uses.erase(std::unique(s.uses.begin(), s.uses.end()), s.uses.end());
    slots[id] = std::move(s);
  }
  for (auto& s : slots) cfg.nodes.push_back(std::move(*s));

  const json& edges = field(doc, "edges", "$");
  if (!edges.is_array()) schema_error("$.edges", "expected array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string path = "$.edges[" + std::to_string(i) + "]";
    if (!edges[i].is_array() || edges[i].size() != 2) schema_error(path, "expected [from, to] pair");
    const std::size_t from = as_id(edges[i][0], path + "[0]");
    const std::size_t to = as_id(edges[i][1], path + "[1]");
    if (from >= cfg.nodes.size() || to >= cfg.nodes.size()) {
      throw ValidationError("dangling edge at " + path + ": [" + std::to_string(from) + ", " + std::to_string(to) +
                            "] references a node id outside [0, " + std::to_string(cfg.nodes.size()) + ")");
    }
    cfg.edges.emplace_back(from, to);
  }
  cfg.entry = as_id(field(doc, "entry", "$"), "$.entry");
  cfg.exit = as_id(field(doc, "exit", "$"), "$.exit");
  cfg.canonicalize();
  validate(cfg);
  return cfg;
}

std::string dump_cfg(const Cfg& cfg) { return cfg_to_json(cfg).dump(2) + "\n"; }

Cfg load_cfg(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  return cfg_from_json(doc);
}

Cfg read_cfg_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_cfg(buf.str());
}

void write_cfg_file(const std::filesystem::path& path, const Cfg& cfg) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << dump_cfg(cfg);
}

}  // namespace deepdfa
