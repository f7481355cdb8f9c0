#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace surfnet {

/// Names accepted by run_stage, in pipeline order.
const std::vector<std::string>& stage_names();

/// Runs one pipeline stage. `config` carries the stage options (see the
/// README for the keys each stage reads); "out" is the workspace directory
/// and "seed" feeds every random choice. Returns the JSON summary:
/// {stage, status, skipped, hash, outputs, metrics}.
///
/// A stage whose configuration and input file contents hash to the value
/// recorded by its last successful run, and whose outputs still exist, is
/// not re-run; the recorded summary comes back with skipped = true. Set
/// "force": true to re-run anyway.
nlohmann::json run_stage(const std::string& stage, const nlohmann::json& config);

/// 64-bit FNV-1a, continuing from `seed`.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace surfnet
