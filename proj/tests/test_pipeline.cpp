#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "guardforge/bench.hpp"
#include "guardforge/losscheck.hpp"
#include "guardforge/pipeline.hpp"
#include "guardforge/synthesis.hpp"
#include "guardforge/util.hpp"
#include "helpers.hpp"

using namespace guardforge;
using testutil::fixture_path;

namespace {

Sample seed_sample(int i) {
    Sample s;
    s.id = "pipe-" + std::to_string(i);
    s.prompt = "prompt " + std::to_string(i);
    s.response = "response " + std::to_string(i);
    s.gold = {{TaskKind::PromptHarm, i % 2 == 0 ? Label::Harmful : Label::Unharmful},
              {TaskKind::Refusal, Label::Compliance},
              {TaskKind::ResponseHarm, Label::Unharmful}};
    return s;
}

void write_samples(const std::string& path, int n) {
    std::ofstream out(path);
    for (int i = 0; i < n; ++i) out << sample_to_json(seed_sample(i)).dump() << "\n";
}

json endpoint_json(const MockBackend& mock, const std::string& model) {
    return json{{"base_url", mock.base_url()}, {"model", model}, {"api_key_env", ""}};
}

} // namespace

TEST(RunStage, StatsMatchesOracleFile) {
    json options;
    options["in"] = fixture_path("mini_corpus.jsonl");
    const json summary = run_stage("stats", options);

    std::ifstream oracle_in(fixture_path("mini_corpus_stats.json"));
    const json oracle = json::parse(oracle_in);
    EXPECT_EQ(summary["n_samples"], oracle["n_samples"]);
    EXPECT_EQ(summary["n_steps"], oracle["n_steps"]);
    EXPECT_DOUBLE_EQ(summary["mean_steps"].get<double>(), oracle["mean_steps"].get<double>());
    EXPECT_DOUBLE_EQ(summary["mean_len_per_step"].get<double>(),
                     oracle["mean_len_per_step"].get<double>());
}

TEST(RunStage, UnknownStageAndBadOptions) {
    try {
        run_stage("warp", json::object());
        FAIL() << "expected InvalidArgument";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
    try {
        run_stage("stats", json::object()); // missing "in"
        FAIL() << "expected InvalidArgument";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
    EXPECT_THROW(run_stage("stats", json::array()), Error);
    try {
        run_stage("stats", json{{"in", "/nonexistent/nope.jsonl"}});
        FAIL() << "expected Io";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Io);
    }
}

TEST(RunStage, LosscheckRowsGradientsAndMixing) {
    testutil::TempDir dir("losscheck");
    const std::string path = dir.file("pairs.jsonl");
    {
        std::ofstream out(path);
        out << R"({"lp_pos_policy": -10.0, "lp_pos_ref": -12.0, "lp_neg_policy": -9.0,)"
            << R"( "lp_neg_ref": -8.5, "alpha": 1.2, "beta": 0.1})" << "\n";
        out << R"({"lp_pos_policy": -4.0, "lp_pos_ref": -4.0, "lp_neg_policy": -6.0,)"
            << R"( "lp_neg_ref": -6.0, "chosen_token_logprobs": [-0.5, -0.25]})" << "\n";
    }
    json options;
    options["pairs"] = path;
    const json summary = run_stage("losscheck", options);

    ASSERT_EQ(summary["rows"].size(), 2u);
    EXPECT_TRUE(summary["all_fd_ok"].get<bool>());

    // Row 1: margin = 0.1*((-10 - -12) - (-9 - -8.5)) = 0.25.
    PairLogProbs p1;
    p1.lp_pos_policy = -10.0;
    p1.lp_pos_ref = -12.0;
    p1.lp_neg_policy = -9.0;
    p1.lp_neg_ref = -8.5;
    p1.alpha = 1.2;
    p1.beta = 0.1;
    EXPECT_DOUBLE_EQ(summary["rows"][0]["loss"].get<double>(), hs_dpo_loss(p1));
    EXPECT_FALSE(summary["rows"][0].contains("mixed_loss"));

    // Row 2: A = B so dpo = ln 2; sft adds lambda * 0.75 with default 2.
    const double dpo2 = std::log(2.0);
    EXPECT_NEAR(summary["rows"][1]["sft_nll"].get<double>(), 0.75, 1e-15);
    EXPECT_NEAR(summary["rows"][1]["mixed_loss"].get<double>(), dpo2 + 2.0 * 0.75, 1e-12);
    const double want_mean =
        (hs_dpo_loss(p1) + dpo2 + 2.0 * 0.75) / 2.0;
    EXPECT_NEAR(summary["batch_mean"].get<double>(), want_mean, 1e-12);

    // length_normalize without lengths is a validation error.
    options["length_normalize"] = true;
    EXPECT_THROW(run_stage("losscheck", options), Error);
}

TEST(RunStage, SubsampleWritesManifestAndIsDeterministic) {
    testutil::TempDir dir("subsample");
    const std::string in_path = dir.file("bench.jsonl");
    write_samples(in_path, 400);

    json options;
    options["in"] = in_path;
    options["out"] = dir.file("picked.jsonl");
    options["fraction"] = 0.05;
    options["floor"] = 100;
    options["seed"] = 9;
    const json summary = run_stage("subsample", options);
    EXPECT_EQ(summary["in_count"], 400);
    EXPECT_EQ(summary["out_count"], 100); // floor dominates 5% of 400

    const std::string manifest_path = dir.file("picked.jsonl") + ".manifest.json";
    ASSERT_TRUE(std::filesystem::exists(manifest_path));
    const json manifest = json::parse(read_file(manifest_path));
    EXPECT_EQ(manifest["command"], "subsample");
    EXPECT_EQ(manifest["config"]["fraction"].get<double>(), 0.05);
    EXPECT_EQ(manifest["inputs"][in_path], sha256_file(in_path));
    EXPECT_EQ(manifest["outputs"][dir.file("picked.jsonl")],
              sha256_file(dir.file("picked.jsonl")));
    EXPECT_TRUE(manifest.contains("wall_time_ms"));

    // Re-run into a second file: byte-identical pick.
    options["out"] = dir.file("picked2.jsonl");
    run_stage("subsample", options);
    EXPECT_EQ(read_file(dir.file("picked.jsonl")), read_file(dir.file("picked2.jsonl")));
}

TEST(RunStage, SynthMineChainHashesLinkUp) {
    testutil::TempDir dir("chain");
    const std::string seeds_path = dir.file("seeds.jsonl");
    const int n = 6;
    write_samples(seeds_path, n);

    MockBackend mock;
    for (int i = 0; i < n; ++i) {
        const Sample s = seed_sample(i);
        // Synth script: a valid reasoned output for the sample's gold.
        // Mine consumes the same script cyclically; make sample 0 ambiguous
        // under k=2 by alternating correct/incorrect.
        if (i == 0) {
            mock.add_script(s.id, {{testutil::correct_output_for(s.gold)},
                                   {testutil::wrong_output_for(s.gold, TaskKind::PromptHarm)}});
        } else {
            mock.add_script(s.id, {{testutil::correct_output_for(s.gold)}});
        }
    }

    // Stage 1: synth.
    json synth_opts;
    synth_opts["in"] = seeds_path;
    synth_opts["out"] = dir.file("synth.jsonl");
    synth_opts["template_text"] = "{prompt}\n{response}\n{gold_answers}";
    synth_opts["endpoint"] = endpoint_json(mock, "synth-model");
    const json synth_summary = run_stage("synth", synth_opts);
    EXPECT_EQ(synth_summary["records"], n);
    EXPECT_EQ(synth_summary["dropped"], 0);

    // Resume: nothing left to do, zero new requests.
    const int before = mock.request_count();
    const json resumed = run_stage("synth", synth_opts);
    EXPECT_EQ(resumed["records"], n);
    EXPECT_EQ(resumed["requests"], 0);
    EXPECT_EQ(mock.request_count(), before);

    // Stage 2: mine over the original seed samples.
    json mine_opts;
    mine_opts["data"] = seeds_path;
    mine_opts["out"] = dir.file("hard.jsonl");
    mine_opts["instruction_text"] = "Judge the exchange.";
    mine_opts["k"] = 2;
    mine_opts["gamma"] = 0.4;
    mine_opts["endpoint"] = endpoint_json(mock, "miner-model");
    const json mine_summary = run_stage("mine", mine_opts);
    EXPECT_EQ(mine_summary["samples_scanned"], n);
    EXPECT_EQ(mine_summary["hard_samples"], 1); // only pipe-0 alternates
    EXPECT_EQ(mine_summary["requests"], 2 * n);

    // Stage 3: pairs from the mined hard samples.
    json pairs_opts;
    pairs_opts["hard"] = dir.file("hard.jsonl");
    pairs_opts["out_dpo"] = dir.file("dpo.json");
    pairs_opts["instruction_text"] = "Judge the exchange.";
    pairs_opts["out_sft"] = dir.file("sft.json");
    pairs_opts["synth"] = dir.file("synth.jsonl");
    pairs_opts["sft_bundle"] = "hard";
    const json pairs_summary = run_stage("pairs", pairs_opts);
    EXPECT_EQ(pairs_summary["pairs"], 1);
    EXPECT_EQ(pairs_summary["sft_records"], 1); // bundle restricted to hard ids

    // Manifest chain: each stage's recorded output hash equals the next
    // stage's recorded input hash.
    const json synth_manifest = json::parse(read_file(dir.file("synth.jsonl") + ".manifest.json"));
    const json mine_manifest = json::parse(read_file(dir.file("hard.jsonl") + ".manifest.json"));
    const json pairs_manifest = json::parse(read_file(dir.file("dpo.json") + ".manifest.json"));
    EXPECT_EQ(synth_manifest["inputs"][seeds_path], mine_manifest["inputs"][seeds_path]);
    EXPECT_EQ(mine_manifest["outputs"][dir.file("hard.jsonl")],
              pairs_manifest["inputs"][dir.file("hard.jsonl")]);
    EXPECT_EQ(synth_manifest["outputs"][dir.file("synth.jsonl")],
              pairs_manifest["inputs"][dir.file("synth.jsonl")]);
    EXPECT_EQ(mine_manifest["k"], 2);
    EXPECT_EQ(synth_manifest["endpoint"]["model"], "synth-model");
    // Keys never leak into manifests.
    EXPECT_FALSE(synth_manifest["endpoint"].contains("api_key"));
    // The resume rewrote the synth manifest, and that run made no requests.
    EXPECT_EQ(synth_manifest["token_totals"]["total_tokens"].get<std::int64_t>(), 0);
    EXPECT_GT(mine_manifest["token_totals"]["total_tokens"].get<std::int64_t>(), 0);
}

TEST(RunStage, EvalWithBenchmarksConfigAndCache) {
    testutil::TempDir dir("evalstage");
    // Benchmark file: 4 prompt-harm rows under a WildGuard-style field map.
    const std::string bench_path = dir.file("tiny.jsonl");
    {
        std::ofstream out(bench_path);
        out << R"({"prompt": "bad thing", "prompt_harm_label": "harmful"})" << "\n";
        out << R"({"prompt": "another bad", "prompt_harm_label": "harmful"})" << "\n";
        out << R"({"prompt": "fine thing", "prompt_harm_label": "unharmful"})" << "\n";
        out << R"({"prompt": "also fine", "prompt_harm_label": "unharmful"})" << "\n";
    }
    // Config names must exist in the registry; SimpleSafetyTests is the
    // smallest prompt-harm slice.
    const std::string cfg_path = dir.file("benchmarks.json");
    {
        json bc;
        bc["data_dir"] = dir.str();
        bc["benchmarks"] = json::array();
        json b;
        b["name"] = "SimpleSafetyTests";
        b["path"] = "tiny.jsonl";
        b["format"] = "jsonl";
        b["field_map"] = {{"source", "SimpleSafetyTests"},
                          {"prompt_field", "prompt"},
                          {"label_fields", {{"prompt_harm", "prompt_harm_label"}}}};
        bc["benchmarks"].push_back(std::move(b));
        std::ofstream out(cfg_path);
        out << bc.dump(2) << "\n";
    }

    MockBackend mock;
    // Ids are assigned by ingestion: SimpleSafetyTests-000000 ...
    Verdict v;
    v.trace = ReasoningTrace::make({"Look."});
    v.labels = {{TaskKind::PromptHarm, Label::Harmful}};
    const std::string harmful_text = render_output(v);
    v.labels = {{TaskKind::PromptHarm, Label::Unharmful}};
    const std::string unharmful_text = render_output(v);
    mock.add_script("SimpleSafetyTests-000000", {{harmful_text}});
    mock.add_script("SimpleSafetyTests-000001", {{harmful_text}});
    mock.add_script("SimpleSafetyTests-000002", {{unharmful_text}});
    mock.add_script("SimpleSafetyTests-000003", {{harmful_text}}); // one false positive

    json options;
    options["benchmarks_config"] = cfg_path;
    options["instruction_text"] = "Classify the prompt.";
    options["cache_dir"] = dir.file("cache");
    options["out"] = dir.file("report.json");
    options["endpoint"] = endpoint_json(mock, "eval-model");
    const json summary = run_stage("eval", options);

    EXPECT_EQ(summary["requests"], 4);
    EXPECT_EQ(summary["cache_hits"], 0);
    // The short file triggers a count-mismatch warning, not a failure.
    EXPECT_FALSE(summary["warnings"].empty());
    const json& report = summary["report"];
    ASSERT_EQ(report["scores"].size(), 1u);
    EXPECT_EQ(report["scores"][0]["benchmark"], "SimpleSafetyTests");
    EXPECT_EQ(report["scores"][0]["tp"], 2);
    EXPECT_EQ(report["scores"][0]["fp"], 1);
    EXPECT_DOUBLE_EQ(report["scores"][0]["recall"].get<double>(), 1.0);
    EXPECT_TRUE(summary.contains("table"));
    ASSERT_TRUE(std::filesystem::exists(dir.file("report.json")));

    // Second run: all cache hits, identical report.
    const json second = run_stage("eval", options);
    EXPECT_EQ(second["requests"], 0);
    EXPECT_EQ(second["cache_hits"], 4);
    EXPECT_EQ(second["report"].dump(), report.dump());
    EXPECT_EQ(mock.request_count(), 4);
}
