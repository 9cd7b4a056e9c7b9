#pragma once

#include <string>

#include "guardforge/jsonl.hpp"

namespace guardforge {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one pipeline stage ("synth", "mine", "pairs", "eval", "stats",
/// "losscheck", "subsample") with JSON options and returns a JSON summary.
/// Stages that write an output file also write "<out>.manifest.json"
/// recording the options snapshot, input/output SHA-256 hashes, seeds,
/// endpoint parameters, token totals, and wall time. Failures throw Error.
json run_stage(const std::string& stage, const json& options);

} // namespace guardforge
