#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "guardforge/core.hpp"
#include "guardforge/jsonl.hpp"

namespace guardforge {

/// Confusion counts for one benchmark/task, with tallies for outputs that
/// never became a verdict. Merging is fieldwise addition, so per-sample
/// accumulation can run in parallel and fold associatively.
struct Confusion {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t tn = 0;
    int64_t fn = 0;
    int64_t parse_failures = 0;
    int64_t rejections = 0;

    int64_t total() const { return tp + fp + tn + fn; }
    Confusion& operator+=(const Confusion& other);
};

/// Increments exactly one of tp/fp/tn/fn using the task's positive class.
/// Throws AbsentGold when gold is Absent.
void accumulate(Confusion& conf, Label gold, Label pred, TaskKind task);

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Standard precision/recall/F1; any zero denominator yields 0.
PrecisionRecallF1 f1_score(const Confusion& conf);

/// Sample-weighted mean of F1 values: sum(n*f1)/sum(n). Throws EmptyInput on
/// an empty list and InvalidArgument on non-positive weights.
double weighted_average(const std::vector<std::pair<int64_t, double>>& scores);

struct ScoredItem {
    double score = 0.0;
    bool positive = false;
};

/// Area under the precision-recall curve: items sorted by score descending,
/// ties entering together, precision summed over recall increments. Throws
/// NoPositives when no item is positive.
double auprc(std::vector<ScoredItem> items);

struct BenchmarkScore {
    std::string benchmark;
    TaskKind task = TaskKind::PromptHarm;
    int64_t n = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> auprc;
    Confusion confusion;
};

struct TaskAverage {
    TaskKind task = TaskKind::PromptHarm;
    int64_t n = 0;
    double weighted_f1 = 0.0;
};

struct MetricsReport {
    std::vector<BenchmarkScore> scores; // registry order
    std::vector<TaskAverage> per_task;
    double weighted_average = 0.0; // over all included benchmarks
    int64_t total_parse_failures = 0;
    int64_t total_rejections = 0;
};

struct BenchmarkResult {
    std::string benchmark;
    TaskKind task = TaskKind::PromptHarm;
    Confusion confusion;
    std::optional<double> auprc;
};

/// Deterministic report over per-benchmark results, kept in input (registry)
/// order. Throws EmptyInput when results is empty.
MetricsReport build_report(const std::vector<BenchmarkResult>& results);

json report_to_json(const MetricsReport& report);

/// Aligned text table, one section per task, F1 given in percent with two
/// decimals. Internal values stay full-precision; rounding happens only here.
std::string report_to_table(const MetricsReport& report);

} // namespace guardforge
