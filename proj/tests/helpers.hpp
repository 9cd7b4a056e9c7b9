#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "guardforge/core.hpp"
#include "guardforge/parser.hpp"

namespace testutil {

inline std::string fixture_path(const std::string& name) {
    return std::string(GUARDFORGE_FIXTURE_DIR) + "/" + name;
}

inline std::string asset_path(const std::string& name) {
    return std::string(GUARDFORGE_ASSET_DIR) + "/" + name;
}

/// Fresh directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("guardforge_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

/// Random verdict with 1..6 steps and 1..3 task labels; label values drawn
/// uniformly over the task's two classes.
inline guardforge::Verdict random_verdict(std::mt19937_64& eng) {
    using namespace guardforge;
    static const std::vector<std::string> words = {
        "the", "request", "asks", "about", "a",     "benign",  "topic",  "harmful",
        "and", "the",     "reply", "adds", "detail", "without", "refusal", "clearly",
    };
    std::vector<std::string> steps;
    const int n_steps = 1 + static_cast<int>(eng() % 6);
    for (int i = 0; i < n_steps; ++i) {
        std::string text;
        const int n_words = 3 + static_cast<int>(eng() % 10);
        for (int w = 0; w < n_words; ++w) {
            if (w > 0) text += ' ';
            text += words[eng() % words.size()];
        }
        text += '.';
        steps.push_back(std::move(text));
    }

    LabelMap labels;
    while (labels.empty()) {
        for (TaskKind task : kAllTasks) {
            switch (eng() % 3) {
            case 0: labels[task] = positive_label(task); break;
            case 1: labels[task] = negative_label(task); break;
            default: break;
            }
        }
    }
    return make_verdict(ReasoningTrace::make(std::move(steps)), std::move(labels));
}

/// Canonical output text answering every annotated task of `gold` correctly.
inline std::string correct_output_for(const guardforge::LabelMap& gold) {
    using namespace guardforge;
    Verdict v;
    v.trace = ReasoningTrace::make({"Judging the interaction against policy."});
    v.labels = gold;
    return render_output(v);
}

/// Canonical output text answering `flip` wrongly and everything else right.
inline std::string wrong_output_for(const guardforge::LabelMap& gold,
                                    guardforge::TaskKind flip) {
    using namespace guardforge;
    LabelMap labels = gold;
    const Label g = labels.at(flip);
    labels[flip] = g == positive_label(flip) ? negative_label(flip) : positive_label(flip);
    Verdict v;
    v.trace = ReasoningTrace::make({"Judging the interaction against policy."});
    v.labels = labels;
    return render_output(v);
}

} // namespace testutil
