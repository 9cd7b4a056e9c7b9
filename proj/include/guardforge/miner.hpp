#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "guardforge/client.hpp"
#include "guardforge/core.hpp"
#include "guardforge/jsonl.hpp"
#include "guardforge/parser.hpp"

namespace guardforge {

/// One of the k sampled outputs for a sample, parsed and judged. Rejections
/// and parse failures always judge incorrect.
struct SampledOutput {
    RawModelOutput raw;
    ParseOutcome outcome;
    bool correct = false;
    std::string producer_model;
};

/// An ambiguous sample: its sampled outputs contain at least one correct and
/// one incorrect verdict. alpha is the preference weight computed from the
/// correct/incorrect split.
struct HardSampleRecord {
    Sample sample;
    std::vector<SampledOutput> outputs;
    int k_corr = 0;
    int k_incorr = 0;
    double alpha = 1.0;
};

struct MinerConfig {
    int k = 8;
    double temperature = 1.0;
    double top_p = 0.95;
    double gamma = 0.2;
    /// Tasks to judge jointly; empty means every task the sample annotates.
    std::set<TaskKind> tasks;
    std::uint64_t seed = 0;
    /// Collapse exact-duplicate texts within a sample before counting.
    bool dedup_outputs = false;
    std::string instruction_template;

    void validate() const;
};

/// Draws k outputs for the sample, one request per output with seed
/// derive_seed(cfg.seed, sample.id, i), parses each, and judges correctness
/// against the sample's gold over the configured tasks.
std::vector<SampledOutput> sample_k(const Sample& sample, const ChatClient& client,
                                    const MinerConfig& cfg);

/// True iff the outputs mix at least one correct and one incorrect verdict.
/// Throws EmptyInput.
bool classify_ambiguous(const std::vector<SampledOutput>& outputs);

/// Weight 1 + gamma*(k_incorr - k_corr)/(k - 2) for k = k_corr + k_incorr
/// greater than 2, and exactly 1 at k = 2. The divisor is the largest
/// magnitude the count difference can reach on an ambiguous sample, so the
/// extremes land on 1 +- gamma. Throws InvalidCounts unless both counts are
/// at least 1.
double alpha_weight(int k_corr, int k_incorr, double gamma);

struct MineOutcome {
    std::vector<HardSampleRecord> records;
    std::int64_t samples_scanned = 0;
    int requests_made = 0;
};

/// Mines the ambiguous subset of `data`, id-sorted. Samples run concurrently
/// up to the client's max_inflight; each sample's k draws are sequential so
/// output order is deterministic.
MineOutcome mine_hard_samples(const std::vector<Sample>& data, const ChatClient& client,
                              const MinerConfig& cfg);

/// Unions per-model pools by sample id. Outputs concatenate in pool order
/// and exact duplicates by (producer_model, seed, text) collapse, so merging
/// a pool with itself is a no-op. Counts and alpha are recomputed over the
/// union with k equal to the union size. Pool entries must already be
/// ambiguous. Result sorted by id.
std::vector<HardSampleRecord> ensemble_merge(
    const std::vector<std::pair<std::string, std::vector<HardSampleRecord>>>& pools,
    double gamma, bool dedup_outputs = false);

/// Ensemble training subsets: each of `members` subsets keeps `anchor` and
/// adds `extra` distinct other sources drawn uniformly per member.
std::vector<std::vector<std::string>> subset_plan(const std::vector<std::string>& sources,
                                                  const std::string& anchor, int extra,
                                                  int members, std::uint64_t seed);

json hard_to_json(const HardSampleRecord& rec);
HardSampleRecord hard_from_json(const json& j);

} // namespace guardforge
