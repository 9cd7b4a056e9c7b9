#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "guardforge/bench.hpp"
#include "guardforge/pairs.hpp"
#include "guardforge/synthesis.hpp"
#include "guardforge/util.hpp"
#include "helpers.hpp"

using namespace guardforge;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs the built binary through the shell, capturing both streams.
CliResult run_cli(const std::string& args) {
    testutil::TempDir dir("cli_io");
    const std::string out_path = dir.file("out");
    const std::string err_path = dir.file("err");
    const std::string cmd =
        std::string(GUARDFORGE_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int rc = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    return result;
}

Sample seed_sample(int i) {
    Sample s;
    s.id = "cli-" + std::to_string(i);
    s.prompt = "prompt " + std::to_string(i);
    s.response = "response " + std::to_string(i);
    s.gold = {{TaskKind::PromptHarm, Label::Harmful},
              {TaskKind::Refusal, Label::Refusal},
              {TaskKind::ResponseHarm, Label::Unharmful}};
    return s;
}

} // namespace

TEST(Cli, VersionAndUsageErrors) {
    const auto version = run_cli("--version");
    EXPECT_EQ(version.exit_code, 0);
    EXPECT_NE(version.out.find("0.1.0"), std::string::npos);

    EXPECT_EQ(run_cli("--no-such-flag").exit_code, 1);
    EXPECT_EQ(run_cli("").exit_code, 1);            // subcommand required
    EXPECT_EQ(run_cli("stats").exit_code, 1);       // --in required
    const auto unknown = run_cli("frobnicate");
    EXPECT_EQ(unknown.exit_code, 1);
    EXPECT_FALSE(unknown.err.empty());
}

TEST(Cli, StatsPrintsSummaryJson) {
    const auto res = run_cli("stats --in " + testutil::fixture_path("mini_corpus.jsonl"));
    ASSERT_EQ(res.exit_code, 0) << res.err;
    const json summary = json::parse(res.out);
    EXPECT_EQ(summary["n_samples"], 200);

    std::ifstream oracle_in(testutil::fixture_path("mini_corpus_stats.json"));
    const json oracle = json::parse(oracle_in);
    EXPECT_EQ(summary["n_steps"], oracle["n_steps"]);
    EXPECT_DOUBLE_EQ(summary["mean_steps"].get<double>(), oracle["mean_steps"].get<double>());
}

TEST(Cli, StatsMissingFileIsIoExit) {
    const auto res = run_cli("stats --in /nonexistent/never.jsonl");
    EXPECT_EQ(res.exit_code, 2);
    EXPECT_NE(res.err.find("guardforge stats:"), std::string::npos);
}

TEST(Cli, LosscheckExitReflectsGradientCheck) {
    testutil::TempDir dir("cli_loss");
    const std::string path = dir.file("pairs.jsonl");
    {
        std::ofstream out(path);
        out << R"({"lp_pos_policy": -4.0, "lp_pos_ref": -5.0, "lp_neg_policy": -3.0,)"
            << R"( "lp_neg_ref": -3.5, "alpha": 1.1})" << "\n";
    }
    const auto res = run_cli("losscheck --pairs " + path);
    ASSERT_EQ(res.exit_code, 0) << res.err;
    const json summary = json::parse(res.out);
    EXPECT_TRUE(summary["all_fd_ok"].get<bool>());
    EXPECT_EQ(summary["rows"].size(), 1u);

    // Schema violations exit 1.
    const std::string bad = dir.file("bad.jsonl");
    {
        std::ofstream out(bad);
        out << R"({"lp_pos_policy": -4.0})" << "\n";
    }
    EXPECT_EQ(run_cli("losscheck --pairs " + bad).exit_code, 1);
}

TEST(Cli, SubsampleWritesOutputAndManifest) {
    testutil::TempDir dir("cli_sub");
    const std::string in_path = dir.file("bench.jsonl");
    {
        std::ofstream out(in_path);
        for (int i = 0; i < 250; ++i) out << sample_to_json(seed_sample(i)).dump() << "\n";
    }
    const std::string out_path = dir.file("picked.jsonl");
    const auto res = run_cli("subsample --in " + in_path + " --out " + out_path +
                             " --fraction 0.2 --floor 10 --seed 3");
    ASSERT_EQ(res.exit_code, 0) << res.err;
    const json summary = json::parse(res.out);
    EXPECT_EQ(summary["out_count"], 50); // ceil(0.2 * 250)
    EXPECT_EQ(read_jsonl(out_path).size(), 50u);
    const json manifest = json::parse(read_file(out_path + ".manifest.json"));
    EXPECT_EQ(manifest["command"], "subsample");
    EXPECT_EQ(manifest["config"]["seed"], 3);
}

TEST(Cli, EndpointFailureExitsTwo) {
    testutil::TempDir dir("cli_ep");
    const std::string in_path = dir.file("seeds.jsonl");
    {
        std::ofstream out(in_path);
        out << sample_to_json(seed_sample(0)).dump() << "\n";
    }
    // Nothing listens on this port; retries exhausted quickly.
    const auto res = run_cli("synth --seed " + in_path + " --out " + dir.file("synth.jsonl") +
                             " --template " + testutil::asset_path("templates/synthesis_prompt.txt") +
                             " --endpoint http://127.0.0.1:9/v1 --max-retries 0" +
                             " --timeout-ms 500");
    EXPECT_EQ(res.exit_code, 2);
    EXPECT_NE(res.err.find("guardforge synth:"), std::string::npos);
}

TEST(Cli, SynthMinePairsEndToEnd) {
    testutil::TempDir dir("cli_e2e");
    MockBackend mock;
    const int n = 4;
    {
        std::ofstream out(dir.file("seeds.jsonl"));
        for (int i = 0; i < n; ++i) {
            const Sample s = seed_sample(i);
            out << sample_to_json(s).dump() << "\n";
            if (i == 0) {
                mock.add_script(s.id,
                                {{testutil::correct_output_for(s.gold)},
                                 {testutil::wrong_output_for(s.gold, TaskKind::Refusal)}});
            } else {
                mock.add_script(s.id, {{testutil::correct_output_for(s.gold)}});
            }
        }
    }
    {
        std::ofstream out(dir.file("instruction.txt"));
        out << "Judge the exchange.\n";
    }
    const std::string endpoint = " --endpoint " + mock.base_url();

    const auto synth = run_cli("synth --seed " + dir.file("seeds.jsonl") + " --out " +
                               dir.file("synth.jsonl") + " --template " +
                               testutil::asset_path("templates/synthesis_prompt.txt") +
                               endpoint + " --model synth-model");
    ASSERT_EQ(synth.exit_code, 0) << synth.err;
    EXPECT_EQ(json::parse(synth.out)["records"], n);

    const auto mine = run_cli("mine --data " + dir.file("seeds.jsonl") + " --out " +
                              dir.file("hard.jsonl") + " --instruction " +
                              dir.file("instruction.txt") + " --k 2 --gamma 0.4" + endpoint +
                              " --model miner-model");
    ASSERT_EQ(mine.exit_code, 0) << mine.err;
    EXPECT_EQ(json::parse(mine.out)["hard_samples"], 1);

    const auto pairs = run_cli("pairs --hard " + dir.file("hard.jsonl") + " --out-dpo " +
                               dir.file("dpo.json") + " --instruction " +
                               dir.file("instruction.txt") + " --seed 5");
    ASSERT_EQ(pairs.exit_code, 0) << pairs.err;
    EXPECT_EQ(json::parse(pairs.out)["pairs"], 1);

    // Manifests chain: mine's output hash is pairs' input hash.
    const json mine_manifest = json::parse(read_file(dir.file("hard.jsonl") + ".manifest.json"));
    const json pairs_manifest = json::parse(read_file(dir.file("dpo.json") + ".manifest.json"));
    EXPECT_EQ(mine_manifest["outputs"][dir.file("hard.jsonl")],
              pairs_manifest["inputs"][dir.file("hard.jsonl")]);

    // The exported pairs parse back and reference the hard sample.
    const auto exported = read_preference_file(dir.file("dpo.json"));
    ASSERT_EQ(exported.size(), 1u);
    EXPECT_EQ(exported[0].instruction, "Judge the exchange.");

    // --quiet silences the summary.
    const auto quiet = run_cli("--quiet pairs --hard " + dir.file("hard.jsonl") + " --out-dpo " +
                               dir.file("dpo2.json") + " --instruction " +
                               dir.file("instruction.txt") + " --seed 5");
    ASSERT_EQ(quiet.exit_code, 0) << quiet.err;
    EXPECT_TRUE(quiet.out.empty());
    // Same seed, same bytes.
    EXPECT_EQ(read_file(dir.file("dpo.json")), read_file(dir.file("dpo2.json")));
}

TEST(Cli, EvalTableReport) {
    testutil::TempDir dir("cli_eval");
    MockBackend mock;
    {
        std::ofstream out(dir.file("tiny.jsonl"));
        out << R"({"prompt": "a", "prompt_harm_label": "harmful"})" << "\n";
        out << R"({"prompt": "b", "prompt_harm_label": "unharmful"})" << "\n";
    }
    {
        json bc;
        bc["data_dir"] = dir.str();
        json b;
        b["name"] = "SimpleSafetyTests";
        b["path"] = "tiny.jsonl";
        b["field_map"] = {{"source", "SST"},
                          {"prompt_field", "prompt"},
                          {"label_fields", {{"prompt_harm", "prompt_harm_label"}}}};
        bc["benchmarks"] = json::array({b});
        std::ofstream out(dir.file("benchmarks.json"));
        out << bc.dump(2) << "\n";
    }
    {
        std::ofstream out(dir.file("instruction.txt"));
        out << "Classify the prompt.\n";
    }
    Verdict v;
    v.trace = ReasoningTrace::make({"Look."});
    v.labels = {{TaskKind::PromptHarm, Label::Harmful}};
    mock.add_script("SST-000000", {{render_output(v)}});
    v.labels = {{TaskKind::PromptHarm, Label::Unharmful}};
    mock.add_script("SST-000001", {{render_output(v)}});

    const auto res = run_cli("eval --benchmarks " + dir.file("benchmarks.json") +
                             " --template " + dir.file("instruction.txt") + " --report table" +
                             " --endpoint " + mock.base_url() + " --model eval-model");
    ASSERT_EQ(res.exit_code, 0) << res.err;
    EXPECT_NE(res.out.find("SimpleSafetyTests"), std::string::npos);
    EXPECT_NE(res.out.find("100.00"), std::string::npos); // perfect F1 on 2 rows
    // Count mismatch (2 rows vs registry 100) warns on stderr.
    EXPECT_NE(res.err.find("warning"), std::string::npos);

    const auto as_json = run_cli("eval --benchmarks " + dir.file("benchmarks.json") +
                                 " --template " + dir.file("instruction.txt") +
                                 " --endpoint " + mock.base_url() + " --model eval-model");
    ASSERT_EQ(as_json.exit_code, 0) << as_json.err;
    const json report = json::parse(as_json.out);
    EXPECT_EQ(report["scores"][0]["benchmark"], "SimpleSafetyTests");
    EXPECT_EQ(report["scores"][0]["tp"], 1);
}

TEST(Cli, ConfigFileAndEnvPrecedence) {
    testutil::TempDir dir("cli_cfg");
    const std::string in_path = dir.file("bench.jsonl");
    {
        std::ofstream out(in_path);
        for (int i = 0; i < 40; ++i) out << sample_to_json(seed_sample(i)).dump() << "\n";
    }
    // Config file sets seed 1; the flag overrides with 2.
    const std::string cfg_path = dir.file("gf.ini");
    {
        std::ofstream out(cfg_path);
        out << "[subsample]\n";
        out << "fraction=0.5\n";
        out << "seed=1\n";
    }
    const auto flag_wins =
        run_cli("--config " + cfg_path + " subsample --in " + in_path + " --out " +
                dir.file("a.jsonl") + " --floor 1 --seed 2");
    ASSERT_EQ(flag_wins.exit_code, 0) << flag_wins.err;
    const json manifest_a = json::parse(read_file(dir.file("a.jsonl") + ".manifest.json"));
    EXPECT_EQ(manifest_a["config"]["seed"], 2);
    EXPECT_EQ(manifest_a["config"]["fraction"], 0.5); // from the file
    EXPECT_EQ(json::parse(flag_wins.out)["out_count"], 20);

    const auto file_only = run_cli("--config " + cfg_path + " subsample --in " + in_path +
                                   " --out " + dir.file("b.jsonl") + " --floor 1");
    ASSERT_EQ(file_only.exit_code, 0) << file_only.err;
    const json manifest_b = json::parse(read_file(dir.file("b.jsonl") + ".manifest.json"));
    EXPECT_EQ(manifest_b["config"]["seed"], 1);
}
