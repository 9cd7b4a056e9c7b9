#include "guardforge/core.hpp"

#include <algorithm>
#include <cctype>

namespace guardforge {

const char* task_name(TaskKind task) {
    switch (task) {
        case TaskKind::PromptHarm: return "prompt_harm";
        case TaskKind::ResponseHarm: return "response_harm";
        case TaskKind::Refusal: return "refusal";
    }
    return "unknown";
}

const char* label_name(Label label) {
    switch (label) {
        case Label::Absent: return "absent";
        case Label::Harmful: return "harmful";
        case Label::Unharmful: return "unharmful";
        case Label::Refusal: return "refusal";
        case Label::Compliance: return "compliance";
    }
    return "unknown";
}

std::optional<TaskKind> task_from_name(std::string_view name) {
    for (TaskKind task : kAllTasks) {
        if (name == task_name(task)) return task;
    }
    return std::nullopt;
}

Label positive_label(TaskKind task) {
    return task == TaskKind::Refusal ? Label::Refusal : Label::Harmful;
}

Label negative_label(TaskKind task) {
    return task == TaskKind::Refusal ? Label::Compliance : Label::Unharmful;
}

bool label_valid_for(Label label, TaskKind task) {
    if (label == Label::Absent) return true;
    return label == positive_label(task) || label == negative_label(task);
}

std::string trim(std::string_view s) {
    size_t begin = 0;
    size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

Label canonicalize_label(std::string_view raw, TaskKind task) {
    std::string word = to_lower(trim(raw));
    // Drop trailing sentence punctuation and markdown emphasis.
    while (!word.empty()) {
        char c = word.back();
        if (c == '.' || c == ',' || c == ';' || c == '!' || c == '*' || c == '`') {
            word.pop_back();
        } else {
            break;
        }
    }
    while (!word.empty() && (word.front() == '*' || word.front() == '`')) {
        word.erase(word.begin());
    }
    word = trim(word);

    Label pos = positive_label(task);
    Label neg = negative_label(task);
    if (word == label_name(pos)) return pos;
    if (word == label_name(neg)) return neg;
    throw Error(ErrorKind::UnrecognizedLabel,
                "'" + std::string(raw) + "' is not a " + task_name(task) + " label");
}

Label Sample::gold_for(TaskKind task) const {
    auto it = gold.find(task);
    return it == gold.end() ? Label::Absent : it->second;
}

std::set<TaskKind> Sample::annotated_tasks() const {
    std::set<TaskKind> tasks;
    for (const auto& [task, label] : gold) {
        if (label != Label::Absent) tasks.insert(task);
    }
    return tasks;
}

ReasoningTrace ReasoningTrace::make(std::vector<std::string> steps) {
    ReasoningTrace trace;
    trace.steps_.reserve(steps.size());
    for (size_t i = 0; i < steps.size(); ++i) {
        std::string text = trim(steps[i]);
        if (text.empty()) {
            throw Error(ErrorKind::InvalidArgument,
                        "step " + std::to_string(i + 1) + " is blank");
        }
        if (text.find('\n') != std::string::npos || text.find('\r') != std::string::npos) {
            throw Error(ErrorKind::InvalidArgument,
                        "step " + std::to_string(i + 1) + " spans multiple lines");
        }
        trace.steps_.push_back(std::move(text));
    }
    return trace;
}

Label Verdict::label_for(TaskKind task) const {
    auto it = labels.find(task);
    return it == labels.end() ? Label::Absent : it->second;
}

Verdict make_verdict(ReasoningTrace trace, LabelMap labels) {
    bool any_concrete = false;
    for (const auto& [task, label] : labels) {
        if (!label_valid_for(label, task)) {
            throw Error(ErrorKind::InvalidArgument,
                        std::string(label_name(label)) + " is not valid for task " +
                            task_name(task));
        }
        if (label != Label::Absent) any_concrete = true;
    }
    if (!any_concrete) {
        throw Error(ErrorKind::InvalidArgument, "verdict has no concrete label");
    }
    return Verdict{std::move(trace), std::move(labels)};
}

bool judge_correctness(const Verdict& pred, const LabelMap& gold,
                       const std::set<TaskKind>& tasks) {
    for (TaskKind task : tasks) {
        auto it = gold.find(task);
        if (it == gold.end() || it->second == Label::Absent) {
            throw Error(ErrorKind::MissingGold,
                        std::string("no gold label for task ") + task_name(task));
        }
        Label predicted = pred.label_for(task);
        if (predicted == Label::Absent || predicted != it->second) return false;
    }
    return true;
}

} // namespace guardforge
