#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "guardforge/bench.hpp"
#include "guardforge/util.hpp"
#include "helpers.hpp"

using namespace guardforge;

namespace {

Sample prompt_sample(const std::string& id, Label gold) {
    Sample s;
    s.id = id;
    s.prompt = "prompt for " + id;
    s.gold = {{TaskKind::PromptHarm, gold}};
    return s;
}

EndpointConfig config_for(const MockBackend& mock) {
    EndpointConfig cfg;
    cfg.base_url = mock.base_url();
    cfg.model = "eval-model";
    cfg.api_key_env.clear();
    return cfg;
}

BenchmarkData tiny_bench(const std::string& name, std::vector<Sample> samples) {
    BenchmarkData data;
    data.spec.name = name;
    data.spec.task = TaskKind::PromptHarm;
    data.spec.expected_n = static_cast<int>(samples.size());
    data.samples = std::move(samples);
    return data;
}

std::string verdict_text(Label prompt_harm) {
    Verdict v;
    v.trace = ReasoningTrace::make({"Look."});
    v.labels = {{TaskKind::PromptHarm, prompt_harm}};
    return render_output(v);
}

} // namespace

TEST(Registry, ThirteenSlicesInReportOrder) {
    const auto& reg = benchmark_registry();
    ASSERT_EQ(reg.size(), 13u);

    const std::vector<std::tuple<std::string, TaskKind, int, bool>> want = {
        {"ToxicChat", TaskKind::PromptHarm, 2853, true},
        {"OpenAIModeration", TaskKind::PromptHarm, 1680, false},
        {"AegisSafetyTest", TaskKind::PromptHarm, 359, false},
        {"SimpleSafetyTests", TaskKind::PromptHarm, 100, false},
        {"HarmBenchPrompt", TaskKind::PromptHarm, 239, false},
        {"WildGuardTest", TaskKind::PromptHarm, 1756, true},
        {"HarmBenchResponse", TaskKind::ResponseHarm, 602, true},
        {"SafeRLHF", TaskKind::ResponseHarm, 2000, false},
        {"BeaverTails", TaskKind::ResponseHarm, 3021, false},
        {"XSTestResponseHarmful", TaskKind::ResponseHarm, 446, false},
        {"WildGuardTest", TaskKind::ResponseHarm, 1768, true},
        {"XSTestResponseRefusal", TaskKind::Refusal, 499, false},
        {"WildGuardTest", TaskKind::Refusal, 1777, true},
    };
    for (size_t i = 0; i < want.size(); ++i) {
        EXPECT_EQ(reg[i].name, std::get<0>(want[i])) << i;
        EXPECT_EQ(reg[i].task, std::get<1>(want[i])) << i;
        EXPECT_EQ(reg[i].expected_n, std::get<2>(want[i])) << i;
        EXPECT_EQ(reg[i].adversarial, std::get<3>(want[i])) << i;
    }

    // Per-task totals match the published benchmark sizes.
    std::map<TaskKind, int> totals;
    for (const auto& spec : reg) totals[spec.task] += spec.expected_n;
    EXPECT_EQ(totals[TaskKind::PromptHarm], 6987);
    EXPECT_EQ(totals[TaskKind::ResponseHarm], 7837);
    EXPECT_EQ(totals[TaskKind::Refusal], 2276);
}

TEST(Registry, FindByName) {
    const auto wild = registry_find("WildGuardTest");
    ASSERT_EQ(wild.size(), 3u);
    EXPECT_EQ(wild[0].task, TaskKind::PromptHarm);
    EXPECT_EQ(wild[1].task, TaskKind::ResponseHarm);
    EXPECT_EQ(wild[2].task, TaskKind::Refusal);
    EXPECT_TRUE(registry_find("NoSuchBench").empty());
}

TEST(LoadBenchmark, FiltersToTaskAndRecordsDelta) {
    FieldMap fm;
    fm.source = "WildGuardTest";
    fm.prompt_field = "prompt";
    fm.response_field = "response";
    fm.label_fields = {{TaskKind::PromptHarm, "prompt_harm_label"},
                       {TaskKind::Refusal, "response_refusal_label"},
                       {TaskKind::ResponseHarm, "response_harm_label"}};

    BenchmarkSpec spec;
    spec.name = "WildGuardTest";
    spec.task = TaskKind::ResponseHarm;
    spec.expected_n = 5; // fixture has 5 rows with a response_harm label
    spec.adversarial = true;
    const auto data = load_benchmark(spec, testutil::fixture_path("seed_wildguard.jsonl"),
                                     SeedFormat::Jsonl, fm);
    // Row 4 is prompt-only, so it drops out of the response task.
    EXPECT_EQ(data.samples.size(), 5u);
    EXPECT_FALSE(data.count_delta.has_value());
    for (const auto& s : data.samples) {
        EXPECT_NE(s.gold_for(TaskKind::ResponseHarm), Label::Absent);
        EXPECT_TRUE(s.adversarial);
    }

    BenchmarkSpec wrong = spec;
    wrong.expected_n = 9;
    const auto short_data = load_benchmark(wrong, testutil::fixture_path("seed_wildguard.jsonl"),
                                           SeedFormat::Jsonl, fm);
    ASSERT_TRUE(short_data.count_delta.has_value());
    EXPECT_EQ(*short_data.count_delta, -4);
}

TEST(ScoreOutcome, PolicyMatrix) {
    Verdict v;
    v.trace = ReasoningTrace::make({"s"});
    v.labels = {{TaskKind::PromptHarm, Label::Harmful}};
    const ParseOutcome verdict = ParseOutcome::from_verdict(v);
    const ParseOutcome rejection = ParseOutcome::rejection();
    const ParseOutcome failure = ParseOutcome::failure("bad");

    auto scored = score_outcome(verdict, TaskKind::PromptHarm, true);
    EXPECT_EQ(scored.pred, Label::Harmful);
    EXPECT_FALSE(scored.rejection);
    EXPECT_FALSE(scored.parse_failure);

    // Verdict lacking the scored task: parse failure, negative class.
    scored = score_outcome(verdict, TaskKind::Refusal, true);
    EXPECT_TRUE(scored.parse_failure);
    EXPECT_EQ(scored.pred, Label::Compliance);

    scored = score_outcome(rejection, TaskKind::PromptHarm, true);
    EXPECT_TRUE(scored.rejection);
    EXPECT_EQ(scored.pred, Label::Harmful);
    scored = score_outcome(rejection, TaskKind::PromptHarm, false);
    EXPECT_EQ(scored.pred, Label::Unharmful);
    scored = score_outcome(rejection, TaskKind::Refusal, true);
    EXPECT_EQ(scored.pred, Label::Refusal);

    scored = score_outcome(failure, TaskKind::ResponseHarm, true);
    EXPECT_TRUE(scored.parse_failure);
    EXPECT_EQ(scored.pred, Label::Unharmful);
}

// Closed form: a model that always refuses to moderate predicts positive on
// everything under rejection-as-positive, so recall 1 and precision = base
// rate.
TEST(Evaluate, AlwaysRejectingModelClosedForm) {
    MockBackend mock;
    std::vector<Sample> samples;
    for (int i = 0; i < 10; ++i) {
        const std::string id = "reject-" + std::to_string(i);
        samples.push_back(prompt_sample(id, i < 5 ? Label::Harmful : Label::Unharmful));
        mock.add_script(id, {{"I can't assist with that."}});
    }
    ChatClient client(config_for(mock));
    EvalConfig cfg;
    cfg.instruction = "Classify.";
    const EvalOutcome outcome = evaluate({tiny_bench("RejectBench", samples)}, client, cfg);

    ASSERT_EQ(outcome.report.scores.size(), 1u);
    const BenchmarkScore& score = outcome.report.scores[0];
    EXPECT_DOUBLE_EQ(score.recall, 1.0);
    EXPECT_DOUBLE_EQ(score.precision, 0.5);
    EXPECT_NEAR(score.f1, 2.0 / 3.0, 1e-12);
    EXPECT_EQ(score.confusion.rejections, 10);
    EXPECT_EQ(score.confusion.tp, 5);
    EXPECT_EQ(score.confusion.fp, 5);
    EXPECT_EQ(outcome.requests_made, 10);

    // Same model with rejection-as-positive off: everything negative.
    EvalConfig neg = cfg;
    neg.rejection_as_positive = false;
    MockBackend mock2;
    for (int i = 0; i < 10; ++i) {
        mock2.add_script("reject-" + std::to_string(i), {{"I can't assist with that."}});
    }
    ChatClient client2(config_for(mock2));
    const EvalOutcome outcome2 = evaluate({tiny_bench("RejectBench", samples)}, client2, neg);
    EXPECT_DOUBLE_EQ(outcome2.report.scores[0].recall, 0.0);
    EXPECT_EQ(outcome2.report.scores[0].confusion.tn, 5);
    EXPECT_EQ(outcome2.report.scores[0].confusion.fn, 5);
}

TEST(Evaluate, ConfusionAuprcAndWarnings) {
    MockBackend mock;
    std::vector<Sample> samples;
    // 2 harmful both predicted harmful; 2 unharmful, one mispredicted.
    samples.push_back(prompt_sample("e-0", Label::Harmful));
    mock.add_script("e-0", {{verdict_text(Label::Harmful)}});
    samples.push_back(prompt_sample("e-1", Label::Harmful));
    mock.add_script("e-1", {{verdict_text(Label::Harmful)}});
    samples.push_back(prompt_sample("e-2", Label::Unharmful));
    mock.add_script("e-2", {{verdict_text(Label::Harmful)}});
    samples.push_back(prompt_sample("e-3", Label::Unharmful));
    mock.add_script("e-3", {{verdict_text(Label::Unharmful)}});

    BenchmarkData bench = tiny_bench("TinyBench", samples);
    bench.count_delta = -2; // pretend the file came up short
    ChatClient client(config_for(mock));
    EvalConfig cfg;
    cfg.instruction = "Classify.";
    const EvalOutcome outcome = evaluate({bench}, client, cfg);

    const BenchmarkScore& score = outcome.report.scores[0];
    EXPECT_EQ(score.confusion.tp, 2);
    EXPECT_EQ(score.confusion.fp, 1);
    EXPECT_EQ(score.confusion.tn, 1);
    EXPECT_EQ(score.confusion.fn, 0);
    ASSERT_TRUE(score.auprc.has_value());
    // Binary scores, ties in one group: oracle by hand. Threshold 1: 2 tp,
    // 1 fp -> precision 2/3 at recall 1; threshold 0 adds no recall.
    EXPECT_NEAR(*score.auprc, 2.0 / 3.0, 1e-12);
    ASSERT_FALSE(outcome.warnings.empty());
    EXPECT_NE(outcome.warnings[0].find("TinyBench"), std::string::npos);
}

TEST(Evaluate, LabelOverlayCorrectsGoldAtScoringTime) {
    MockBackend mock;
    std::vector<Sample> samples = {prompt_sample("o-0", Label::Harmful)};
    mock.add_script("o-0", {{verdict_text(Label::Unharmful)}});
    ChatClient client(config_for(mock));
    EvalConfig cfg;
    cfg.instruction = "Classify.";

    LabelOverlay overlay;
    overlay[{"o-0", TaskKind::PromptHarm}] = Label::Unharmful;
    const EvalOutcome outcome = evaluate({tiny_bench("OverlayBench", samples)}, client, cfg,
                                         overlay);
    // Without the overlay this would be a false negative; corrected gold
    // makes it a true negative.
    EXPECT_EQ(outcome.report.scores[0].confusion.tn, 1);
    EXPECT_EQ(outcome.report.scores[0].confusion.fn, 0);
}

TEST(LabelOverlayFile, ParsesAndValidates) {
    testutil::TempDir dir("overlay");
    {
        std::ofstream out(dir.file("labels.jsonl"));
        out << R"({"id": "x-1", "task": "prompt_harm", "label": "harmful"})" << "\n";
        out << R"({"id": "x-2", "task": "refusal", "label": "compliance"})" << "\n";
    }
    const LabelOverlay overlay = load_label_overlay(dir.file("labels.jsonl"));
    ASSERT_EQ(overlay.size(), 2u);
    EXPECT_EQ(overlay.at({"x-1", TaskKind::PromptHarm}), Label::Harmful);
    EXPECT_EQ(overlay.at({"x-2", TaskKind::Refusal}), Label::Compliance);

    {
        std::ofstream out(dir.file("bad.jsonl"));
        out << R"({"id": "x-1", "task": "prompt_harm", "label": "refusal"})" << "\n";
    }
    EXPECT_THROW(load_label_overlay(dir.file("bad.jsonl")), Error);
}

TEST(Cache, SecondRunHitsWithoutRequests) {
    testutil::TempDir dir("cache");
    MockBackend mock;
    std::vector<Sample> samples;
    for (int i = 0; i < 4; ++i) {
        const std::string id = "c-" + std::to_string(i);
        samples.push_back(prompt_sample(id, i % 2 == 0 ? Label::Harmful : Label::Unharmful));
        mock.add_script(id, {{verdict_text(i % 2 == 0 ? Label::Harmful : Label::Unharmful)}});
    }
    ChatClient client(config_for(mock));
    EvalConfig cfg;
    cfg.instruction = "Classify.";
    cfg.cache_dir = dir.str();

    const EvalOutcome first = evaluate({tiny_bench("CacheBench", samples)}, client, cfg);
    EXPECT_EQ(first.requests_made, 4);
    EXPECT_EQ(first.cache_hits, 0);

    const EvalOutcome second = evaluate({tiny_bench("CacheBench", samples)}, client, cfg);
    EXPECT_EQ(second.requests_made, 0);
    EXPECT_EQ(second.cache_hits, 4);
    EXPECT_EQ(mock.request_count(), 4);
    EXPECT_EQ(report_to_json(first.report).dump(), report_to_json(second.report).dump());

    // Cache file name: first 16 hex chars of sha256(model \n instruction).
    const std::string key = sha256_hex("eval-model\nClassify.").substr(0, 16);
    EXPECT_TRUE(std::filesystem::exists(dir.str() + "/" + key + ".jsonl"));

    // A different instruction misses the cache.
    EvalConfig other = cfg;
    other.instruction = "Different.";
    // Scripts cycle, so fresh requests still answer.
    const EvalOutcome third = evaluate({tiny_bench("CacheBench", samples)}, client, other);
    EXPECT_EQ(third.requests_made, 4);
}

TEST(Subsample, CeilRuleFloorAndDeterminism) {
    std::vector<Sample> big;
    big.reserve(2853);
    for (int i = 0; i < 2853; ++i) big.push_back(prompt_sample("b-" + std::to_string(i),
                                                               Label::Unharmful));
    const auto picked = subsample(big, 0.05, 100, 7);
    EXPECT_EQ(picked.size(), 143u); // ceil(0.05 * 2853)

    // Deterministic per seed, different across seeds.
    const auto again = subsample(big, 0.05, 100, 7);
    ASSERT_EQ(again.size(), picked.size());
    for (size_t i = 0; i < picked.size(); ++i) EXPECT_EQ(picked[i].id, again[i].id);
    const auto other = subsample(big, 0.05, 100, 8);
    bool any_diff = false;
    for (size_t i = 0; i < picked.size(); ++i) any_diff |= picked[i].id != other[i].id;
    EXPECT_TRUE(any_diff);

    // Original order preserved.
    auto index_of = [](const Sample& s) {
        return std::stoi(s.id.substr(2));
    };
    for (size_t i = 1; i < picked.size(); ++i) {
        EXPECT_LT(index_of(picked[i - 1]), index_of(picked[i]));
    }

    // Floor dominates small fractions; n caps everything.
    std::vector<Sample> mid(big.begin(), big.begin() + 120);
    EXPECT_EQ(subsample(mid, 0.05, 100, 1).size(), 100u);
    std::vector<Sample> tiny(big.begin(), big.begin() + 30);
    EXPECT_EQ(subsample(tiny, 0.05, 100, 1).size(), 30u);
}
