#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepdfa/cfg.hpp"

namespace deepdfa {

enum class Property : std::size_t { Api = 0, Datatype = 1, Constant = 2, Operator = 3 };

inline constexpr std::size_t kPropertyCount = 4;
inline constexpr std::array<Property, kPropertyCount> kAllProperties{Property::Api, Property::Datatype,
                                                                     Property::Constant, Property::Operator};

std::string_view to_string(Property p);
Property property_from_string(std::string_view name);

/// The four abstract properties of one definition. A field is present iff the
/// definition spells it.
struct DefinitionProfile {
  std::optional<std::string> api;
  std::optional<std::string> datatype;
  std::optional<std::string> constant;
  std::optional<std::string> op;

  const std::optional<std::string>& get(Property p) const;

  friend bool operator==(const DefinitionProfile&, const DefinitionProfile&) = default;
};

/// Profiles keyed by node id, definition nodes only.
std::map<NodeId, DefinitionProfile> extract_profiles(const Cfg& cfg);

/// Per-property top-k tables, each ranked by (frequency desc, value asc).
struct Vocabulary {
  std::size_t k = 0;
  std::array<std::vector<std::string>, kPropertyCount> ranked;

  const std::vector<std::string>& values(Property p) const { return ranked[static_cast<std::size_t>(p)]; }
  /// Rank of `value` under `p`, or nullopt when unranked.
  std::optional<std::size_t> rank(Property p, const std::string& value) const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

/// Counts one occurrence per definition per present property. Throws
/// ValidationError when k == 0.
Vocabulary build_vocabulary(const std::vector<Cfg>& corpus, std::size_t k);

/// Fraction of (definition, present property) pairs whose value is ranked.
/// 1.0 when the corpus has no present properties.
double coverage(const Vocabulary& vocab, const std::vector<Cfg>& corpus);

nlohmann::ordered_json vocabulary_to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const nlohmann::json& doc);
Vocabulary read_vocabulary_file(const std::filesystem::path& path);
void write_vocabulary_file(const std::filesystem::path& path, const Vocabulary& vocab);

/// Which property blocks are populated. At least one must be on.
struct FeatureMask {
  std::array<bool, kPropertyCount> on{true, true, true, true};

  static FeatureMask all() { return {}; }
  /// Comma-separated property names, e.g. "api,datatype".
  static FeatureMask parse(std::string_view list);
  bool enabled(Property p) const { return on[static_cast<std::size_t>(p)]; }
  std::string to_string() const;

  friend bool operator==(const FeatureMask&, const FeatureMask&) = default;
};

/// Row-major 0/1 matrix with one row per CFG node. Each property owns a
/// block of k + 2 columns: slot 0 NONE, slot 1 UNKNOWN, slot 2 + r for the
/// value ranked r.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

inline std::size_t block_width(std::size_t k) { return k + 2; }
inline std::size_t feature_width(std::size_t k) { return kPropertyCount * block_width(k); }

inline constexpr std::size_t kNoneSlot = 0;
inline constexpr std::size_t kUnknownSlot = 1;

/// Block-local slot for one property value under `vocab`.
std::size_t slot_for(const Vocabulary& vocab, Property p, const std::optional<std::string>& value);

FeatureMatrix encode(const Cfg& cfg, const Vocabulary& vocab, const FeatureMask& mask = FeatureMask::all());

}  // namespace deepdfa
