#include "deepdfa/embedding.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "deepdfa/error.hpp"

namespace deepdfa {

namespace {

constexpr std::array<std::string_view, kPropertyCount> kPropertyNames{"api", "datatype", "constant", "operator"};

}  // namespace

std::string_view to_string(Property p) { return kPropertyNames[static_cast<std::size_t>(p)]; }

Property property_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kPropertyCount; ++i) {
    if (kPropertyNames[i] == name) return static_cast<Property>(i);
  }
  throw ValidationError("unknown property '" + std::string(name) + "' (expected api, datatype, constant, operator)");
}

const std::optional<std::string>& DefinitionProfile::get(Property p) const {
  switch (p) {
    case Property::Api:
      return api;
    case Property::Datatype:
      return datatype;
    case Property::Constant:
      return constant;
    case Property::Operator:
      break;
  }
  return op;
}

std::map<NodeId, DefinitionProfile> extract_profiles(const Cfg& cfg) {
  std::map<NodeId, DefinitionProfile> out;
  for (NodeId v = 0; v < cfg.size(); ++v) {
    const Statement& s = cfg.nodes[v];
    if (!s.is_definition()) continue;
    DefinitionProfile p;
    p.api = s.callee;
    p.datatype = s.type;
    if (!s.constants.empty()) p.constant = s.constants.front();
    if (!s.operators.empty()) p.op = s.operators.front();
    out.emplace(v, std::move(p));
  }
  return out;
}

std::optional<std::size_t> Vocabulary::rank(Property p, const std::string& value) const {
  const auto& list = values(p);
  auto it = std::find(list.begin(), list.end(), value);
  if (it == list.end()) return std::nullopt;
  return static_cast<std::size_t>(it - list.begin());
}

Vocabulary build_vocabulary(const std::vector<Cfg>& corpus, std::size_t k) {
  if (k == 0) throw ValidationError("vocabulary threshold k must be at least 1");
  std::array<std::map<std::string, std::size_t>, kPropertyCount> counts;
  for (const Cfg& cfg : corpus) {
    for (const auto& [node, profile] : extract_profiles(cfg)) {
      for (Property p : kAllProperties) {
        if (const auto& v = profile.get(p)) ++counts[static_cast<std::size_t>(p)][*v];
      }
    }
  }

  Vocabulary vocab;
  vocab.k = k;
  for (std::size_t i = 0; i < kPropertyCount; ++i) {
    std::vector<std::pair<std::string, std::size_t>> items(counts[i].begin(), counts[i].end());
    // std::map iteration is already value-ascending, so a stable sort on
    // frequency leaves ties in lexicographic order.
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (items.size() > k) items.resize(k);
    for (auto& [value, count] : items) vocab.ranked[i].push_back(value);
  }
  return vocab;
}

double coverage(const Vocabulary& vocab, const std::vector<Cfg>& corpus) {
  std::size_t present = 0;
  std::size_t covered = 0;
  for (const Cfg& cfg : corpus) {
    for (const auto& [node, profile] : extract_profiles(cfg)) {
      for (Property p : kAllProperties) {
        if (const auto& v = profile.get(p)) {
          ++present;
          if (vocab.rank(p, *v)) ++covered;
        }
      }
    }
  }
  return present == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(present);
}

nlohmann::ordered_json vocabulary_to_json(const Vocabulary& vocab) {
  nlohmann::ordered_json doc;
  doc["k"] = vocab.k;
  for (Property p : kAllProperties) doc[std::string(to_string(p))] = vocab.values(p);
  return doc;
}

Vocabulary vocabulary_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("schema violation at $: expected object");
  Vocabulary vocab;
  auto k = doc.find("k");
  if (k == doc.end() || !k->is_number_integer() || k->get<long long>() < 1) {
    throw ValidationError("schema violation at $.k: expected integer >= 1");
  }
  vocab.k = k->get<std::size_t>();
  for (Property p : kAllProperties) {
    const std::string key(to_string(p));
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_array()) throw ValidationError("schema violation at $." + key + ": expected array");
    auto& list = vocab.ranked[static_cast<std::size_t>(p)];
    for (std::size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_string()) {
        throw ValidationError("schema violation at $." + key + "[" + std::to_string(i) + "]: expected string");
      }
      list.push_back((*it)[i].get<std::string>());
    }
    if (list.size() > vocab.k) throw ValidationError("schema violation at $." + key + ": more than k entries");
    std::vector<std::string> sorted = list;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("schema violation at $." + key + ": duplicate entries");
    }
  }
  return vocab;
}

Vocabulary read_vocabulary_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return vocabulary_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_vocabulary_file(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << vocabulary_to_json(vocab).dump(2) << "\n";
}

FeatureMask FeatureMask::parse(std::string_view list) {
  FeatureMask mask;
  mask.on.fill(false);
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    std::string_view item = list.substr(start, comma - start);
    if (!item.empty()) mask.on[static_cast<std::size_t>(property_from_string(item))] = true;
    start = comma + 1;
  }
  if (std::none_of(mask.on.begin(), mask.on.end(), [](bool b) { return b; })) {
    throw ValidationError("feature mask must enable at least one property");
  }
  return mask;
}

std::string FeatureMask::to_string() const {
  std::string out;
  for (Property p : kAllProperties) {
    if (!enabled(p)) continue;
    if (!out.empty()) out += ',';
    out += deepdfa::to_string(p);
  }
  return out;
}

std::size_t slot_for(const Vocabulary& vocab, Property p, const std::optional<std::string>& value) {
  if (!value) return kNoneSlot;
  if (auto r = vocab.rank(p, *value)) return 2 + *r;
  return kUnknownSlot;
}

FeatureMatrix encode(const Cfg& cfg, const Vocabulary& vocab, const FeatureMask& mask) {
  if (std::none_of(mask.on.begin(), mask.on.end(), [](bool b) { return b; })) {
    throw ValidationError("feature mask must enable at least one property");
  }
  FeatureMatrix m;
  m.rows = cfg.size();
  m.cols = feature_width(vocab.k);
  m.data.assign(m.rows * m.cols, 0);
  const std::size_t block = block_width(vocab.k);
  for (const auto& [node, profile] : extract_profiles(cfg)) {
    for (Property p : kAllProperties) {
      if (!mask.enabled(p)) continue;
      const std::size_t col = static_cast<std::size_t>(p) * block + slot_for(vocab, p, profile.get(p));
      m.data[node * m.cols + col] = 1;
    }
  }
  return m;
}

}  // namespace deepdfa
