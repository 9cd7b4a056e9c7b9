#include "guardforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace guardforge {

Confusion& Confusion::operator+=(const Confusion& other) {
    tp += other.tp;
    fp += other.fp;
    tn += other.tn;
    fn += other.fn;
    parse_failures += other.parse_failures;
    rejections += other.rejections;
    return *this;
}

void accumulate(Confusion& conf, Label gold, Label pred, TaskKind task) {
    if (gold == Label::Absent) {
        throw Error(ErrorKind::AbsentGold,
                    std::string("gold label absent for task ") + task_name(task));
    }
    Label pos = positive_label(task);
    bool gold_pos = gold == pos;
    bool pred_pos = pred == pos;
    if (gold_pos && pred_pos) ++conf.tp;
    else if (!gold_pos && pred_pos) ++conf.fp;
    else if (gold_pos && !pred_pos) ++conf.fn;
    else ++conf.tn;
}

PrecisionRecallF1 f1_score(const Confusion& conf) {
    PrecisionRecallF1 out;
    const double tp = static_cast<double>(conf.tp);
    if (conf.tp + conf.fp > 0) out.precision = tp / static_cast<double>(conf.tp + conf.fp);
    if (conf.tp + conf.fn > 0) out.recall = tp / static_cast<double>(conf.tp + conf.fn);
    // Single division over the raw counts: algebraically 2PR/(P+R), but with
    // no compounding from the two quotients above.
    const std::int64_t f1_denom = 2 * conf.tp + conf.fp + conf.fn;
    if (f1_denom > 0) out.f1 = 2.0 * tp / static_cast<double>(f1_denom);
    return out;
}

double weighted_average(const std::vector<std::pair<int64_t, double>>& scores) {
    if (scores.empty()) {
        throw Error(ErrorKind::EmptyInput, "no scores to average");
    }
    double num = 0.0;
    double den = 0.0;
    for (const auto& [n, f1] : scores) {
        if (n <= 0) {
            throw Error(ErrorKind::InvalidArgument, "benchmark size must be positive");
        }
        num += static_cast<double>(n) * f1;
        den += static_cast<double>(n);
    }
    return num / den;
}

double auprc(std::vector<ScoredItem> items) {
    int64_t total_pos = 0;
    for (const auto& item : items) {
        if (item.positive) ++total_pos;
    }
    if (total_pos == 0) {
        throw Error(ErrorKind::NoPositives, "auprc needs at least one positive item");
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const ScoredItem& a, const ScoredItem& b) { return a.score > b.score; });

    double area = 0.0;
    int64_t tp = 0;
    int64_t fp = 0;
    double prev_recall = 0.0;
    size_t i = 0;
    while (i < items.size()) {
        // All items tied at this score enter together.
        size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) {
            if (items[j].positive) ++tp;
            else ++fp;
            ++j;
        }
        double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

MetricsReport build_report(const std::vector<BenchmarkResult>& results) {
    if (results.empty()) {
        throw Error(ErrorKind::EmptyInput, "no benchmark results");
    }
    MetricsReport report;
    std::map<TaskKind, std::vector<std::pair<int64_t, double>>> per_task;
    std::vector<std::pair<int64_t, double>> all;

    for (const auto& result : results) {
        BenchmarkScore score;
        score.benchmark = result.benchmark;
        score.task = result.task;
        score.confusion = result.confusion;
        score.n = result.confusion.total();
        auto prf = f1_score(result.confusion);
        score.precision = prf.precision;
        score.recall = prf.recall;
        score.f1 = prf.f1;
        score.auprc = result.auprc;
        report.total_parse_failures += result.confusion.parse_failures;
        report.total_rejections += result.confusion.rejections;
        if (score.n > 0) {
            per_task[score.task].emplace_back(score.n, score.f1);
            all.emplace_back(score.n, score.f1);
        }
        report.scores.push_back(std::move(score));
    }

    for (TaskKind task : kAllTasks) {
        auto it = per_task.find(task);
        if (it == per_task.end()) continue;
        TaskAverage avg;
        avg.task = task;
        for (const auto& [n, _] : it->second) avg.n += n;
        avg.weighted_f1 = weighted_average(it->second);
        report.per_task.push_back(avg);
    }
    report.weighted_average = all.empty() ? 0.0 : weighted_average(all);
    return report;
}

json report_to_json(const MetricsReport& report) {
    json out = json::object();
    out["scores"] = json::array();
    for (const auto& score : report.scores) {
        json entry = json::object();
        entry["benchmark"] = score.benchmark;
        entry["task"] = task_name(score.task);
        entry["n"] = score.n;
        entry["precision"] = score.precision;
        entry["recall"] = score.recall;
        entry["f1"] = score.f1;
        if (score.auprc) entry["auprc"] = *score.auprc;
        entry["tp"] = score.confusion.tp;
        entry["fp"] = score.confusion.fp;
        entry["tn"] = score.confusion.tn;
        entry["fn"] = score.confusion.fn;
        entry["parse_failures"] = score.confusion.parse_failures;
        entry["rejections"] = score.confusion.rejections;
        out["scores"].push_back(std::move(entry));
    }
    out["per_task"] = json::object();
    for (const auto& avg : report.per_task) {
        out["per_task"][task_name(avg.task)] = {
            {"n", avg.n},
            {"weighted_f1", avg.weighted_f1},
        };
    }
    out["weighted_average"] = report.weighted_average;
    out["total_parse_failures"] = report.total_parse_failures;
    out["total_rejections"] = report.total_rejections;
    return out;
}

std::string report_to_table(const MetricsReport& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    auto pct = [](double v) { return v * 100.0; };

    for (TaskKind task : kAllTasks) {
        bool any = false;
        for (const auto& score : report.scores) {
            if (score.task == task) {
                any = true;
                break;
            }
        }
        if (!any) continue;
        out << task_name(task) << '\n';
        out << "  " << std::left << std::setw(28) << "benchmark" << std::right
            << std::setw(8) << "n" << std::setw(10) << "prec" << std::setw(10) << "recall"
            << std::setw(10) << "f1" << std::setw(10) << "auprc" << '\n';
        for (const auto& score : report.scores) {
            if (score.task != task) continue;
            out << "  " << std::left << std::setw(28) << score.benchmark << std::right
                << std::setw(8) << score.n << std::setw(10) << pct(score.precision)
                << std::setw(10) << pct(score.recall) << std::setw(10) << pct(score.f1);
            if (score.auprc) {
                out << std::setw(10) << pct(*score.auprc);
            } else {
                out << std::setw(10) << "-";
            }
            out << '\n';
        }
        for (const auto& avg : report.per_task) {
            if (avg.task != task) continue;
            out << "  " << std::left << std::setw(28) << "weighted average" << std::right
                << std::setw(8) << avg.n << std::setw(10) << "" << std::setw(10) << ""
                << std::setw(10) << pct(avg.weighted_f1) << std::setw(10) << "" << '\n';
        }
        out << '\n';
    }
    out << "overall weighted f1: " << pct(report.weighted_average) << '\n';
    out << "rejections: " << report.total_rejections
        << "  parse failures: " << report.total_parse_failures << '\n';
    return out.str();
}

} // namespace guardforge
