#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "deepdfa/cfg.hpp"

namespace deepdfa {

/// CFG interchange document in canonical form: nodes by id, edges sorted,
/// keys in schema order.
nlohmann::ordered_json cfg_to_json(const Cfg& cfg);

/// Throws ValidationError with a field path such as `nodes[3].kind` on any
/// schema violation, and on dangling edges or other structural breakage.
Cfg cfg_from_json(const nlohmann::json& doc);

/// Canonical text: two-space indentation, trailing newline.
std::string dump_cfg(const Cfg& cfg);
Cfg load_cfg(std::string_view document);

Cfg read_cfg_file(const std::filesystem::path& path);
void write_cfg_file(const std::filesystem::path& path, const Cfg& cfg);

}  // namespace deepdfa
