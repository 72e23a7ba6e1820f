#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dv::pipeline {

/// Stage kinds in their canonical order.
inline constexpr const char* kStageKinds[] = {"phantom", "preprocess", "suppress", "segment", "evaluate", "report"};

struct Diagnostic {
  std::string code;  // schema | unknown_kind | duplicate | unresolved_reference | range
  std::string stage;
  std::string message;

  nlohmann::json to_json() const { return {{"code", code}, {"stage", stage}, {"message", message}}; }
};

/// Empty result means the config is runnable. Never throws.
std::vector<Diagnostic> validate(const nlohmann::json& config);

nlohmann::json load_config(const std::filesystem::path& path);

/// Executes the stages in order and returns the manifest (also written to
/// <workspace>/manifest.json). Relative workspace and file inputs resolve
/// against `base_dir`. Throws Config on an invalid config, Locked when another
/// run holds the workspace, and Stage when a stage fails (after writing the
/// partial manifest).
nlohmann::json run(const nlohmann::json& config, const std::filesystem::path& base_dir = std::filesystem::current_path());

/// Cache directory: $DYNAVESSEL_CACHE or <workspace>/.cache.
std::filesystem::path cache_dir(const std::filesystem::path& workspace);

}  // namespace dv::pipeline
