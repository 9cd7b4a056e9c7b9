#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "guardforge/core.hpp"

namespace guardforge {

using json = nlohmann::ordered_json;

/// Reads a JSONL file; blank lines are skipped. Throws Io on unreadable
/// files and SchemaMismatch on lines that are not valid JSON objects.
std::vector<json> read_jsonl(const std::string& path);

/// Serializes one object per line, LF-terminated, atomically replacing path.
void write_jsonl(const std::string& path, const std::vector<json>& records);

/// Sample <-> the pipeline's JSONL schema
/// {id, prompt, response?, gold:{prompt_harm?, response_harm?, refusal?},
///  source, adversarial}.
json sample_to_json(const Sample& sample);
Sample sample_from_json(const json& record);

json labels_to_json(const LabelMap& labels);
LabelMap labels_from_json(const json& gold);

} // namespace guardforge
