#include "guardforge/miner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>

#include "guardforge/prompt.hpp"
#include "guardforge/util.hpp"

namespace guardforge {

namespace {

std::set<TaskKind> judged_tasks(const Sample& sample, const MinerConfig& cfg) {
    std::set<TaskKind> annotated = sample.annotated_tasks();
    if (cfg.tasks.empty()) return annotated;
    std::set<TaskKind> tasks;
    for (TaskKind t : cfg.tasks) {
        if (annotated.count(t)) tasks.insert(t);
    }
    return tasks;
}

std::uint64_t output_identity(const SampledOutput& o) {
    std::string key = o.producer_model;
    key += '\0';
    key += std::to_string(o.raw.seed.value_or(0));
    key += '\0';
    key += o.raw.text;
    return fnv1a64(key);
}

void count_split(const std::vector<SampledOutput>& outputs, bool dedup_texts, int& k_corr,
                 int& k_incorr) {
    k_corr = 0;
    k_incorr = 0;
    std::set<std::uint64_t> seen_texts;
    for (const auto& o : outputs) {
        if (dedup_texts && !seen_texts.insert(fnv1a64(o.raw.text)).second) continue;
        (o.correct ? k_corr : k_incorr) += 1;
    }
}

} // namespace

void MinerConfig::validate() const {
    if (k < 2) throw Error(ErrorKind::InvalidArgument, "k must be >= 2");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorKind::InvalidArgument, "temperature must be finite and >= 0");
    }
    if (!(top_p > 0.0 && top_p <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "top_p must be in (0, 1]");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "gamma must be in (0, 1)");
    }
    if (trim(instruction_template).empty()) {
        throw Error(ErrorKind::InvalidArgument, "instruction template is empty");
    }
}

std::vector<SampledOutput> sample_k(const Sample& sample, const ChatClient& client,
                                    const MinerConfig& cfg) {
    cfg.validate();
    const std::set<TaskKind> tasks = judged_tasks(sample, cfg);
    if (tasks.empty()) {
        throw Error(ErrorKind::MissingGold,
                    sample.id + " has no gold labels for the configured tasks");
    }
    const auto messages = build_instruction_messages(sample, cfg.instruction_template);

    std::vector<SampledOutput> outputs;
    outputs.reserve(static_cast<std::size_t>(cfg.k));
    for (int i = 0; i < cfg.k; ++i) {
        CompletionRequest req;
        req.messages = messages;
        req.temperature = cfg.temperature;
        req.top_p = cfg.top_p;
        req.n = 1;
        req.seed = derive_seed(cfg.seed, sample.id, static_cast<std::uint64_t>(i));
        req.sample_tag = sample.id;
        ChatResult res = client.chat_complete(req);

        SampledOutput out;
        out.raw.text = res.choices[0].text;
        out.raw.finish_reason = res.choices[0].finish_reason;
        out.raw.model_id = res.model;
        out.raw.temperature = cfg.temperature;
        out.raw.top_p = cfg.top_p;
        out.raw.seed = req.seed;
        out.producer_model = res.model.empty() ? client.config().model : res.model;
        out.outcome = parse_output(out.raw);
        out.correct = out.outcome.is_verdict() &&
                      judge_correctness(*out.outcome.verdict, sample.gold, tasks);
        outputs.push_back(std::move(out));
    }
    return outputs;
}

bool classify_ambiguous(const std::vector<SampledOutput>& outputs) {
    if (outputs.empty()) {
        throw Error(ErrorKind::EmptyInput, "classify_ambiguous over empty outputs");
    }
    bool any_correct = false;
    bool any_incorrect = false;
    for (const auto& o : outputs) {
        (o.correct ? any_correct : any_incorrect) = true;
    }
    return any_correct && any_incorrect;
}

double alpha_weight(int k_corr, int k_incorr, double gamma) {
    if (k_corr < 1 || k_incorr < 1) {
        throw Error(ErrorKind::InvalidCounts,
                    "alpha requires at least one correct and one incorrect output (got " +
                        std::to_string(k_corr) + "/" + std::to_string(k_incorr) + ")");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "gamma must be in (0, 1)");
    }
    const int k = k_corr + k_incorr;
    if (k == 2) return 1.0;
    // Quotient first: the extreme splits give exactly +-1, so alpha lands on
    // 1 +- gamma with no rounding drift.
    return 1.0 + gamma * (static_cast<double>(k_incorr - k_corr) / static_cast<double>(k - 2));
}

MineOutcome mine_hard_samples(const std::vector<Sample>& data, const ChatClient& client,
                              const MinerConfig& cfg) {
    cfg.validate();
    std::vector<std::optional<HardSampleRecord>> slots(data.size());
    std::atomic<int> requests{0};

    parallel_for(data.size(), static_cast<std::size_t>(client.config().max_inflight),
                 [&](std::size_t i) {
                     const Sample& s = data[i];
                     std::vector<SampledOutput> outputs = sample_k(s, client, cfg);
                     requests.fetch_add(cfg.k);
                     int k_corr = 0, k_incorr = 0;
                     count_split(outputs, cfg.dedup_outputs, k_corr, k_incorr);
                     if (k_corr < 1 || k_incorr < 1) return;
                     HardSampleRecord rec;
                     rec.sample = s;
                     rec.outputs = std::move(outputs);
                     rec.k_corr = k_corr;
                     rec.k_incorr = k_incorr;
                     rec.alpha = alpha_weight(k_corr, k_incorr, cfg.gamma);
                     slots[i] = std::move(rec);
                 });

    MineOutcome out;
    out.samples_scanned = static_cast<std::int64_t>(data.size());
    out.requests_made = requests.load();
    for (auto& slot : slots) {
        if (slot) out.records.push_back(std::move(*slot));
    }
    std::sort(out.records.begin(), out.records.end(),
              [](const HardSampleRecord& a, const HardSampleRecord& b) {
                  return a.sample.id < b.sample.id;
              });
    return out;
}

std::vector<HardSampleRecord> ensemble_merge(
    const std::vector<std::pair<std::string, std::vector<HardSampleRecord>>>& pools,
    double gamma, bool dedup_outputs) {
    std::map<std::string, HardSampleRecord> merged;
    std::map<std::string, std::set<std::uint64_t>> seen;

    for (const auto& [model_id, pool] : pools) {
        for (const auto& rec : pool) {
            if (rec.k_corr < 1 || rec.k_incorr < 1) {
                throw Error(ErrorKind::InvalidCounts,
                            "pool record " + rec.sample.id + " is not ambiguous");
            }
            auto [it, inserted] = merged.try_emplace(rec.sample.id);
            if (inserted) it->second.sample = rec.sample;
            auto& identities = seen[rec.sample.id];
            for (const auto& o : rec.outputs) {
                SampledOutput copy = o;
                if (copy.producer_model.empty()) copy.producer_model = model_id;
                if (!identities.insert(output_identity(copy)).second) continue;
                it->second.outputs.push_back(std::move(copy));
            }
        }
    }

    std::vector<HardSampleRecord> out;
    out.reserve(merged.size());
    for (auto& [id, rec] : merged) {
        count_split(rec.outputs, dedup_outputs, rec.k_corr, rec.k_incorr);
        rec.alpha = alpha_weight(rec.k_corr, rec.k_incorr, gamma);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<std::vector<std::string>> subset_plan(const std::vector<std::string>& sources,
                                                  const std::string& anchor, int extra,
                                                  int members, std::uint64_t seed) {
    if (members < 1) throw Error(ErrorKind::InvalidArgument, "members must be >= 1");
    if (extra < 0) throw Error(ErrorKind::InvalidArgument, "extra must be >= 0");
    std::vector<std::string> others;
    bool saw_anchor = false;
    for (const auto& s : sources) {
        if (s == anchor) {
            saw_anchor = true;
        } else {
            others.push_back(s);
        }
    }
    if (!saw_anchor) {
        throw Error(ErrorKind::InvalidArgument, "anchor '" + anchor + "' not in sources");
    }
    if (static_cast<std::size_t>(extra) > others.size()) {
        throw Error(ErrorKind::InvalidArgument, "not enough non-anchor sources");
    }
    std::sort(others.begin(), others.end());

    std::vector<std::vector<std::string>> plan;
    for (int m = 0; m < members; ++m) {
        std::vector<std::string> pool = others;
        std::mt19937_64 eng(derive_seed(seed, "subset", static_cast<std::uint64_t>(m)));
        std::vector<std::string> subset = {anchor};
        for (int pick = 0; pick < extra; ++pick) {
            const std::size_t idx = eng() % pool.size();
            subset.push_back(pool[idx]);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
        }
        std::sort(subset.begin() + 1, subset.end());
        plan.push_back(std::move(subset));
    }
    return plan;
}

json hard_to_json(const HardSampleRecord& rec) {
    json j = sample_to_json(rec.sample);
    json outputs = json::array();
    for (const auto& o : rec.outputs) {
        json oj;
        oj["text"] = o.raw.text;
        oj["correct"] = o.correct;
        oj["producer_model"] = o.producer_model;
        oj["seed"] = o.raw.seed.value_or(0);
        outputs.push_back(std::move(oj));
    }
    j["outputs"] = std::move(outputs);
    j["k_corr"] = rec.k_corr;
    j["k_incorr"] = rec.k_incorr;
    j["alpha"] = rec.alpha;
    return j;
}

HardSampleRecord hard_from_json(const json& j) {
    HardSampleRecord rec;
    rec.sample = sample_from_json(j);
    try {
        for (const auto& oj : j.at("outputs")) {
            SampledOutput o;
            o.raw.text = oj.at("text").get<std::string>();
            o.raw.seed = oj.value("seed", std::uint64_t{0});
            o.correct = oj.at("correct").get<bool>();
            o.producer_model = oj.value("producer_model", "");
            o.outcome = parse_output(o.raw);
            rec.outputs.push_back(std::move(o));
        }
        rec.k_corr = j.at("k_corr").get<int>();
        rec.k_incorr = j.at("k_incorr").get<int>();
        rec.alpha = j.at("alpha").get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch,
                    std::string("bad hard-sample record: ") + e.what());
    }
    return rec;
}

} // namespace guardforge
