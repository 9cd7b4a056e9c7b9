#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "guardforge/error.hpp"

namespace guardforge {

/// The three guardrail tasks. Each task is a binary classification with a
/// fixed positive class: harmful for the two harm tasks, refusal for the
/// refusal-detection task.
enum class TaskKind {
    PromptHarm,
    ResponseHarm,
    Refusal,
};

inline constexpr std::array<TaskKind, 3> kAllTasks = {
    TaskKind::PromptHarm, TaskKind::ResponseHarm, TaskKind::Refusal};

/// Binary label per task, plus Absent for tasks a sample does not annotate.
/// Absent never compares equal to a concrete label for correctness purposes.
enum class Label {
    Absent,
    Harmful,
    Unharmful,
    Refusal,
    Compliance,
};

const char* task_name(TaskKind task);
const char* label_name(Label label);

/// Parses a task name as used in file schemas ("prompt_harm", "response_harm",
/// "refusal").
std::optional<TaskKind> task_from_name(std::string_view name);

Label positive_label(TaskKind task);
Label negative_label(TaskKind task);

/// True if the label belongs to the task's label set (Absent is valid for any
/// task).
bool label_valid_for(Label label, TaskKind task);

/// Maps raw model/dataset text onto the task's label set, ignoring case and
/// surrounding whitespace/punctuation. Unmappable text throws
/// UnrecognizedLabel; there is no silent default.
Label canonicalize_label(std::string_view raw, TaskKind task);

using LabelMap = std::map<TaskKind, Label>;

/// One moderation instance: the user prompt, the target model's optional
/// response, and gold labels for whichever tasks the source annotates.
struct Sample {
    std::string id;
    std::string prompt;
    std::string response; // empty when the sample has no model response
    LabelMap gold;
    std::string source;
    bool adversarial = false;

    bool has_response() const { return !response.empty(); }
    Label gold_for(TaskKind task) const;

    /// Tasks with a non-Absent gold label.
    std::set<TaskKind> annotated_tasks() const;
};

/// Ordered reasoning steps. Step indices are implicit: position i holds step
/// i+1. Texts are single-line and nonempty after trimming.
class ReasoningTrace {
public:
    ReasoningTrace() = default;

    /// Validates and trims step texts; throws InvalidArgument on blank or
    /// multi-line steps.
    static ReasoningTrace make(std::vector<std::string> steps);

    const std::vector<std::string>& steps() const { return steps_; }
    size_t size() const { return steps_.size(); }
    bool empty() const { return steps_.empty(); }

    bool operator==(const ReasoningTrace&) const = default;

private:
    std::vector<std::string> steps_;
};

/// A parsed model output: reasoning steps plus up to three task labels, at
/// least one of which is concrete.
struct Verdict {
    ReasoningTrace trace;
    LabelMap labels;

    Label label_for(TaskKind task) const;

    bool operator==(const Verdict&) const = default;
};

/// Builds a Verdict, checking that at least one label is concrete and every
/// label is valid for its task.
Verdict make_verdict(ReasoningTrace trace, LabelMap labels);

/// True iff the predicted labels equal gold on every requested task. A
/// missing (Absent) prediction counts as incorrect, so the judgment is total
/// over malformed outputs. Throws MissingGold if a requested task has no gold
/// label.
bool judge_correctness(const Verdict& pred, const LabelMap& gold,
                       const std::set<TaskKind>& tasks);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

} // namespace guardforge
