#pragma once

#include <optional>
#include <string>
#include <vector>

#include "guardforge/core.hpp"

namespace guardforge {

enum class FinishReason {
    Stop,
    Length,
    ContentFilter,
    Error,
};

const char* finish_reason_name(FinishReason reason);
FinishReason finish_reason_from_name(std::string_view name);

/// One raw completion from a model endpoint, before any parsing.
struct RawModelOutput {
    std::string text;
    FinishReason finish_reason = FinishReason::Stop;
    std::string model_id;
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<uint64_t> seed;
};

enum class OutcomeKind {
    Verdict,
    Rejection,
    ParseFailure,
};

/// Result of parsing a raw output: a Verdict, a refusal to moderate
/// (Rejection), or a ParseFailure carrying the first offending line.
struct ParseOutcome {
    OutcomeKind kind = OutcomeKind::ParseFailure;
    std::optional<Verdict> verdict;
    std::string failure_reason;

    static ParseOutcome from_verdict(Verdict v);
    static ParseOutcome rejection();
    static ParseOutcome failure(std::string reason);

    bool is_verdict() const { return kind == OutcomeKind::Verdict; }
    bool is_rejection() const { return kind == OutcomeKind::Rejection; }
    bool is_failure() const { return kind == OutcomeKind::ParseFailure; }
};

/// Rendering layout plus the per-task answer keys. The canonical format puts
/// "Step i:" lines first, then an answer block with one "Request:" /
/// "Completion:" / "Response:" line per concrete label (prompt harm,
/// refusal, response harm respectively). The layout is swappable so outputs
/// of released models with a different wrapping can still be produced and
/// parsed.
struct OutputTemplate {
    std::string layout = "{steps}\n\nAnswers:\n{answers}\n";
    std::string prompt_harm_key = "Request";
    std::string refusal_key = "Completion";
    std::string response_harm_key = "Response";

    /// Loads a plain-text layout with {steps} / {answers} placeholders.
    static OutputTemplate load_layout(const std::string& path);
};

struct ParserConfig {
    OutputTemplate tpl;
    /// Lowercase phrases whose presence (absent any answer block) marks a
    /// refusal to moderate. The built-in list mirrors
    /// assets/rejection_phrases.txt; pass a file to override it.
    std::vector<std::string> rejection_phrases;

    static ParserConfig defaults();
    static std::vector<std::string> load_phrases(const std::string& path);
};

/// Answer block alone: one "<key>: <label>" line per concrete label, in
/// prompt harm, refusal, response harm order.
std::string render_answer_block(const LabelMap& labels, const OutputTemplate& tpl = {});

/// Deterministic canonical serialization of a verdict. parse_output of the
/// result recovers the same labels and step texts.
std::string render_output(const Verdict& verdict, const OutputTemplate& tpl = {});

/// Total over arbitrary bytes: never throws, always returns one outcome.
/// Tolerates extra prose, markdown decoration, and reordered answer lines;
/// when the same task is answered twice the last line wins. A text with a
/// well-formed answer block is never classified as a Rejection.
ParseOutcome parse_output(const RawModelOutput& raw,
                          const ParserConfig& cfg = ParserConfig::defaults());

/// Scoring rule for refused moderation requests: the task's positive class.
/// Throws NotARejection when the outcome is anything else.
Label apply_rejection_policy(const ParseOutcome& outcome, TaskKind task);

} // namespace guardforge
