#include "guardforge/parser.hpp"

#include <array>
#include <cctype>
#include <sstream>

#include "guardforge/util.hpp"

namespace guardforge {

namespace {

const std::vector<std::string>& builtin_rejection_phrases() {
    static const std::vector<std::string> phrases = {
        "i can't assist with that",
        "i cannot assist with that",
        "i can't help with that",
        "i cannot help with that",
        "i'm sorry, but i can't",
        "i am sorry, but i cannot",
        "i'm unable to help with",
        "i will not provide",
        "i must decline",
        "as an ai, i cannot",
    };
    return phrases;
}

bool is_decoration(char c) {
    return c == ' ' || c == '\t' || c == '#' || c == '*' || c == '-' || c == '>' ||
           c == '`' || c == '"' || c == '\'';
}

std::string_view strip_decoration(std::string_view line) {
    size_t i = 0;
    while (i < line.size() && is_decoration(line[i])) ++i;
    return line.substr(i);
}

bool istarts_with(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    for (size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

// "Step <n> <sep> <text>" with tolerant separators. Returns the step text,
// or nullopt when the line is not a step line. Blank step text comes back as
// an empty string so the caller can skip it.
std::optional<std::string> match_step_line(std::string_view stripped) {
    if (!istarts_with(stripped, "step")) return std::nullopt;
    size_t i = 4;
    while (i < stripped.size() && stripped[i] == ' ') ++i;
    size_t digits = 0;
    while (i < stripped.size() && std::isdigit(static_cast<unsigned char>(stripped[i]))) {
        ++i;
        ++digits;
    }
    if (digits == 0) return std::nullopt;
    while (i < stripped.size() && stripped[i] == ' ') ++i;
    if (i >= stripped.size() ||
        (stripped[i] != ':' && stripped[i] != '.' && stripped[i] != ')')) {
        return std::nullopt;
    }
    ++i;
    return trim(stripped.substr(i));
}

// "<key> : <value>" where key must be followed only by emphasis characters
// before the colon ("Responses:" must not match "Response").
std::optional<std::string> match_answer_line(std::string_view stripped,
                                             std::string_view key) {
    if (!istarts_with(stripped, key)) return std::nullopt;
    size_t i = key.size();
    while (i < stripped.size() &&
           (stripped[i] == ' ' || stripped[i] == '*' || stripped[i] == '`')) {
        ++i;
    }
    if (i >= stripped.size() || stripped[i] != ':') return std::nullopt;
    ++i;
    return trim(stripped.substr(i));
}

} // namespace

const char* finish_reason_name(FinishReason reason) {
    switch (reason) {
        case FinishReason::Stop: return "stop";
        case FinishReason::Length: return "length";
        case FinishReason::ContentFilter: return "content_filter";
        case FinishReason::Error: return "error";
    }
    return "error";
}

FinishReason finish_reason_from_name(std::string_view name) {
    if (name == "stop") return FinishReason::Stop;
    if (name == "length") return FinishReason::Length;
    if (name == "content_filter") return FinishReason::ContentFilter;
    return FinishReason::Error;
}

ParseOutcome ParseOutcome::from_verdict(Verdict v) {
    ParseOutcome outcome;
    outcome.kind = OutcomeKind::Verdict;
    outcome.verdict = std::move(v);
    return outcome;
}

ParseOutcome ParseOutcome::rejection() {
    ParseOutcome outcome;
    outcome.kind = OutcomeKind::Rejection;
    return outcome;
}

ParseOutcome ParseOutcome::failure(std::string reason) {
    ParseOutcome outcome;
    outcome.kind = OutcomeKind::ParseFailure;
    outcome.failure_reason = std::move(reason);
    return outcome;
}

OutputTemplate OutputTemplate::load_layout(const std::string& path) {
    OutputTemplate tpl;
    tpl.layout = read_file(path);
    if (tpl.layout.find("{steps}") == std::string::npos ||
        tpl.layout.find("{answers}") == std::string::npos) {
        throw Error(ErrorKind::InvalidArgument,
                    path + " must contain {steps} and {answers} placeholders");
    }
    return tpl;
}

ParserConfig ParserConfig::defaults() {
    ParserConfig cfg;
    cfg.rejection_phrases = builtin_rejection_phrases();
    return cfg;
}

std::vector<std::string> ParserConfig::load_phrases(const std::string& path) {
    std::vector<std::string> phrases;
    for (const auto& line : split_lines(read_file(path))) {
        std::string phrase = to_lower(trim(line));
        if (!phrase.empty() && phrase.front() != '#') phrases.push_back(phrase);
    }
    return phrases;
}

std::string render_answer_block(const LabelMap& labels, const OutputTemplate& tpl) {
    std::ostringstream answers;
    bool first = true;
    auto emit = [&](TaskKind task, const std::string& key) {
        auto it = labels.find(task);
        if (it == labels.end() || it->second == Label::Absent) return;
        if (!first) answers << '\n';
        answers << key << ": " << label_name(it->second);
        first = false;
    };
    emit(TaskKind::PromptHarm, tpl.prompt_harm_key);
    emit(TaskKind::Refusal, tpl.refusal_key);
    emit(TaskKind::ResponseHarm, tpl.response_harm_key);
    return answers.str();
}

std::string render_output(const Verdict& verdict, const OutputTemplate& tpl) {
    std::ostringstream steps;
    const auto& texts = verdict.trace.steps();
    for (size_t i = 0; i < texts.size(); ++i) {
        if (i > 0) steps << '\n';
        steps << "Step " << (i + 1) << ": " << texts[i];
    }

    const std::string answer_block = render_answer_block(verdict.labels, tpl);

    std::string out = tpl.layout;
    auto replace = [&](const std::string& placeholder, const std::string& value) {
        size_t pos = out.find(placeholder);
        if (pos == std::string::npos) {
            throw Error(ErrorKind::InvalidArgument,
                        "output template lacks " + placeholder);
        }
        out.replace(pos, placeholder.size(), value);
    };
    replace("{steps}", steps.str());
    replace("{answers}", answer_block);
    return out;
}

ParseOutcome parse_output(const RawModelOutput& raw, const ParserConfig& cfg) {
    std::vector<std::string> steps;
    LabelMap labels;
    std::string first_bad_line;

    const std::array<std::pair<TaskKind, const std::string*>, 3> keys = {{
        {TaskKind::PromptHarm, &cfg.tpl.prompt_harm_key},
        {TaskKind::Refusal, &cfg.tpl.refusal_key},
        {TaskKind::ResponseHarm, &cfg.tpl.response_harm_key},
    }};

    for (const auto& line : split_lines(raw.text)) {
        std::string_view stripped = strip_decoration(line);
        if (stripped.empty()) continue;

        if (auto step_text = match_step_line(stripped)) {
            if (!step_text->empty()) steps.push_back(std::move(*step_text));
            continue;
        }

        for (const auto& [task, key] : keys) {
            auto value = match_answer_line(stripped, *key);
            if (!value) continue;
            try {
                labels[task] = canonicalize_label(*value, task);
            } catch (const Error&) {
                if (first_bad_line.empty()) first_bad_line = trim(line);
            }
            break;
        }
    }

    if (!labels.empty()) {
        // A recovered answer block always wins, even over content_filter.
        return ParseOutcome::from_verdict(
            Verdict{ReasoningTrace::make(std::move(steps)), std::move(labels)});
    }
    if (raw.finish_reason == FinishReason::ContentFilter) {
        return ParseOutcome::rejection();
    }
    if (!first_bad_line.empty()) {
        return ParseOutcome::failure("unparseable answer line: " + first_bad_line);
    }
    std::string lowered = to_lower(raw.text);
    for (const auto& phrase : cfg.rejection_phrases) {
        if (!phrase.empty() && lowered.find(phrase) != std::string::npos) {
            return ParseOutcome::rejection();
        }
    }
    return ParseOutcome::failure("no answer block found");
}

Label apply_rejection_policy(const ParseOutcome& outcome, TaskKind task) {
    if (!outcome.is_rejection()) {
        throw Error(ErrorKind::NotARejection, "outcome is not a rejection");
    }
    return positive_label(task);
}

} // namespace guardforge
