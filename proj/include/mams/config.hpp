#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "mams/study.hpp"

namespace mams {

// Configuration problems map to exit code 2 in the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StudyConfigFile {
  StudySpec spec;
  std::string out_dir;  // empty: resolved from CLI flag / env var
};

StudyConfigFile parse_study_config(const std::string& json_text);
StudyConfigFile load_study_config(const std::string& path);

// Full config with every default materialized, in the same schema the
// parser accepts. Reloading this string reproduces the spec exactly.
// Execution-only knobs (workers, out_dir) are excluded: results do not
// depend on them.
std::string resolved_config_json(const StudyConfigFile& cfg);

std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t x);

}  // namespace mams
