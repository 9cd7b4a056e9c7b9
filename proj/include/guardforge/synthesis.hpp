#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "guardforge/client.hpp"
#include "guardforge/core.hpp"
#include "guardforge/jsonl.hpp"
#include "guardforge/parser.hpp"

namespace guardforge {

/// A sample with its model-written reasoning steps. validated means the
/// steps form a well-structured trace whose rendered answer block re-parses
/// to the sample's gold labels.
struct SynthesizedRecord {
    Sample sample;
    std::vector<std::string> steps;
    std::string synthesizer_model;
    bool validated = false;
};

struct CorpusStats {
    std::int64_t n_samples = 0;
    std::int64_t n_steps = 0;
    double mean_steps = 0.0;
    double mean_len_per_step = 0.0;
};

/// Published statistics of the full released reasoning training corpus, kept
/// as the target numbers for anyone re-running stats over it.
inline constexpr std::int64_t kReferenceCorpusSamples = 127544;
inline constexpr std::int64_t kReferenceCorpusSteps = 460659;
inline constexpr double kReferenceCorpusMeanSteps = 3.61;
inline constexpr double kReferenceCorpusMeanLenPerStep = 133.97;

/// Fills the synthesis template with the sample's prompt, response ("None"
/// when the sample has no response), and gold answer block. The template
/// carries the step-by-step instructions and quality reminders as plain
/// text; placeholders are {prompt}, {response}, {gold_answers}.
std::vector<ChatMessage> build_synthesis_prompt(const Sample& sample, const std::string& tpl);

struct TraceValidation {
    bool valid = true;
    /// Each entry names the violated check ("structure" or "consistency")
    /// followed by detail.
    std::vector<std::string> violations;
};

/// Checks (a) the steps form a valid trace, (b) the record's gold labels
/// survive a render/parse round trip, (c) no step is blank. Never throws;
/// failures are listed in the result.
TraceValidation validate_trace(const SynthesizedRecord& rec,
                               const ParserConfig& pc = ParserConfig::defaults());

/// Exact counts over a corpus; mean_len_per_step is characters per step.
/// Throws EmptyCorpus.
CorpusStats corpus_stats(const std::vector<SynthesizedRecord>& records);

enum class SeedFormat { Jsonl, Csv };

/// How one seed dataset's columns map onto the normalized schema. label_fields
/// maps each annotated task to its column; value_map rewrites raw cell values
/// (for example "1" to "harmful") before label canonicalization. An empty or
/// missing cell leaves that task unannotated.
struct FieldMap {
    std::string source;
    std::string prompt_field;
    std::string response_field;
    std::map<TaskKind, std::string> label_fields;
    std::map<std::string, std::string> value_map;
    bool adversarial = false;
};

FieldMap field_map_from_json(const json& j);

/// Normalizes a heterogeneous seed file into Samples. Ids are
/// "<source>-<zero-padded row index>" so re-ingestion is stable.
std::vector<Sample> ingest_seed(const std::string& path, SeedFormat format, const FieldMap& fm);

struct SynthConfig {
    std::string template_text;
    double temperature = 0.0;
    double top_p = 0.95;
    std::uint64_t seed = 0;
    /// Invalid traces are re-requested this many times, then dropped.
    int max_invalid_retries = 2;
};

struct SynthOutcome {
    std::vector<SynthesizedRecord> records;
    /// One entry per sample dropped after exhausting retries.
    std::vector<std::string> dropped;
    int requests_made = 0;
};

/// Runs synthesis over the seeds, skipping ids already present in
/// `existing` (resume). Requests run concurrently up to the client's
/// max_inflight; the result is sorted by sample id.
SynthOutcome run_synthesis(const std::vector<Sample>& seeds, const ChatClient& client,
                           const SynthConfig& cfg,
                           const std::vector<SynthesizedRecord>& existing = {});

json synthesized_to_json(const SynthesizedRecord& rec);
SynthesizedRecord synthesized_from_json(const json& j);

} // namespace guardforge
