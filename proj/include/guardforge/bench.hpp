#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guardforge/client.hpp"
#include "guardforge/metrics.hpp"
#include "guardforge/synthesis.hpp"

namespace guardforge {

/// One benchmark slice: a dataset evaluated on one task. The same dataset
/// can appear under several tasks with different row counts (rows lacking a
/// task's label are filtered out at load).
struct BenchmarkSpec {
    std::string name;
    TaskKind task = TaskKind::PromptHarm;
    int expected_n = 0;
    bool adversarial = false;
};

/// The 13 benchmark slices across the 3 tasks, in canonical report order.
const std::vector<BenchmarkSpec>& benchmark_registry();

/// Every registry slice with the given name (a dataset may serve several
/// tasks). Empty when the name is unknown.
std::vector<BenchmarkSpec> registry_find(const std::string& name);

struct BenchmarkData {
    BenchmarkSpec spec;
    std::vector<Sample> samples;
    /// loaded - expected_n, recorded when nonzero; a mismatch warns, it does
    /// not fail the run.
    std::optional<std::int64_t> count_delta;
};

/// Ingests a benchmark file through the field map, keeps rows annotated for
/// the slice's task, and stamps the slice's adversarial flag.
BenchmarkData load_benchmark(const BenchmarkSpec& spec, const std::string& path,
                             SeedFormat format, const FieldMap& fm);

struct EvalConfig {
    std::string instruction;
    double temperature = 0.0;
    double top_p = 1.0;
    std::uint64_t seed = 0;
    /// Score a refusal to moderate as the task's positive class (on by
    /// default; off scores it negative). Either way the rejection is tallied.
    bool rejection_as_positive = true;
    /// Directory for the prediction cache; empty disables caching. Cached
    /// predictions are keyed by (model, instruction hash, sample id), so
    /// re-scoring with corrected labels never re-queries the model.
    std::string cache_dir;
};

struct ScoredPrediction {
    Label pred = Label::Absent;
    bool rejection = false;
    bool parse_failure = false;
};

/// Scoring policy: verdicts answer with their label for the task (a missing
/// label counts as a parse failure and scores negative); rejections score
/// per the rejection_as_positive flag; parse failures score negative.
ScoredPrediction score_outcome(const ParseOutcome& outcome, TaskKind task,
                               bool rejection_as_positive);

/// Corrected gold labels keyed by (sample id, task), applied at scoring time.
using LabelOverlay = std::map<std::pair<std::string, TaskKind>, Label>;

/// Loads a JSONL overlay of {id, task, label} records.
LabelOverlay load_label_overlay(const std::string& path);

struct EvalOutcome {
    MetricsReport report;
    int requests_made = 0;
    int cache_hits = 0;
    std::vector<std::string> warnings;
};

/// Evaluates every benchmark slice: one completion per sample (cache
/// permitting), parse, apply policies, accumulate confusion counts, then
/// build the report. AUPRC per slice is computed from label-derived scores
/// (positive prediction = 1, negative = 0) and omitted when a slice has no
/// positive gold. Partial progress checkpoints to the cache after each
/// slice.
EvalOutcome evaluate(const std::vector<BenchmarkData>& benches, const ChatClient& client,
                     const EvalConfig& cfg, const LabelOverlay& overlay = {});

/// Seeded uniform subsample of size min(n, max(floor_n, ceil(fraction*n))),
/// original order preserved.
std::vector<Sample> subsample(const std::vector<Sample>& bench, double fraction, int floor_n,
                              std::uint64_t seed);

} // namespace guardforge
