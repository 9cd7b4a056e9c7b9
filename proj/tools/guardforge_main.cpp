// Command line front end. Everything substantive happens behind the C API;
// this file only turns flags into a stage options object, runs the stage,
// and prints the summary. Option precedence is config file < environment <
// flags (CLI11 resolves that ordering natively).

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "guardforge.h"

namespace {

using json = nlohmann::ordered_json;

int exit_code_of(gf_status st) {
    switch (st) {
    case GF_OK:
        return 0;
    case GF_ERR_INVALID_ARGUMENT:
    case GF_ERR_VALIDATION:
        return 1;
    default:
        return 2;
    }
}

// Records one CLI option together with the options-object key it feeds.
// Only options the user actually set (flag, env var, or config file) are
// copied into the stage options, so library defaults stay in charge.
class Binder {
public:
    explicit Binder(CLI::App* cmd) : cmd_(cmd) {}

    template <typename T>
    CLI::Option* opt(const std::string& flag, const std::string& key, T& var,
                     const std::string& desc) {
        auto* o = cmd_->add_option(flag, var, desc);
        actions_.emplace_back(o, [&var, key](json& j) { j[key] = var; });
        return o;
    }

    CLI::Option* flag(const std::string& name, const std::string& key, bool value, bool& var,
                      const std::string& desc) {
        auto* o = cmd_->add_flag(name, var, desc);
        actions_.emplace_back(o, [key, value](json& j) { j[key] = value; });
        return o;
    }

    json build() const {
        json j = json::object();
        for (const auto& [o, apply] : actions_) {
            if (o->count() > 0) apply(j);
        }
        return j;
    }

    CLI::App* cmd() const { return cmd_; }

private:
    CLI::App* cmd_;
    std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> actions_;
};

// Endpoint connection flags shared by the stages that talk to a model.
struct EndpointOpts {
    std::string url;
    std::string model;
    std::string api_key_env;
    int timeout_ms = 0;
    int max_retries = 0;
    int max_inflight = 0;
    int retry_backoff_ms = 0;
    CLI::Option* o_url = nullptr;
    CLI::Option* o_model = nullptr;
    CLI::Option* o_key = nullptr;
    CLI::Option* o_timeout = nullptr;
    CLI::Option* o_retries = nullptr;
    CLI::Option* o_inflight = nullptr;
    CLI::Option* o_backoff = nullptr;

    void add_to(CLI::App* cmd, bool required, bool with_url_model = true) {
        if (with_url_model) {
            o_url = cmd->add_option("--endpoint", url, "Chat completion endpoint base URL")
                        ->envname("GUARDFORGE_ENDPOINT");
            if (required) o_url->required();
            o_model = cmd->add_option("--model", model, "Model name sent on the wire")
                          ->envname("GUARDFORGE_MODEL");
        }
        o_key = cmd->add_option("--api-key-env", api_key_env,
                                "Environment variable holding the API key");
        o_timeout = cmd->add_option("--timeout-ms", timeout_ms, "Per-request timeout");
        o_retries = cmd->add_option("--max-retries", max_retries, "Retries on 429/5xx");
        o_inflight = cmd->add_option("--max-inflight", max_inflight, "Concurrent requests");
        o_backoff = cmd->add_option("--retry-backoff-ms", retry_backoff_ms,
                                    "Base backoff between retries");
    }

    // Endpoint object for one URL; shared connection knobs apply to each.
    json to_json(const std::string& base_url, const std::string& model_name) const {
        json e;
        e["base_url"] = base_url;
        if (!model_name.empty()) e["model"] = model_name;
        if (o_key->count() > 0) e["api_key_env"] = api_key_env;
        if (o_timeout->count() > 0) e["timeout_ms"] = timeout_ms;
        if (o_retries->count() > 0) e["max_retries"] = max_retries;
        if (o_inflight->count() > 0) e["max_inflight"] = max_inflight;
        if (o_backoff->count() > 0) e["retry_backoff_ms"] = retry_backoff_ms;
        return e;
    }

    void apply(json& options) const {
        if (o_url->count() > 0) {
            options["endpoint"] = to_json(url, o_model->count() > 0 ? model : "");
        }
    }
};

int run(const std::string& stage, const json& options, bool quiet, bool verbose,
        const std::string& report_kind) {
    if (verbose) {
        std::fprintf(stderr, "guardforge %s options: %s\n", stage.c_str(),
                     options.dump().c_str());
    }

    gf_pipeline* p = gf_pipeline_new();
    if (p == nullptr) {
        std::fprintf(stderr, "guardforge: out of memory\n");
        return 2;
    }
    char* summary_str = nullptr;
    const std::string options_str = options.dump();
    gf_status st = gf_pipeline_run(p, stage.c_str(), options_str.c_str(), &summary_str);
    if (st != GF_OK) {
        std::fprintf(stderr, "guardforge %s: %s\n", stage.c_str(), gf_pipeline_last_error(p));
        gf_pipeline_free(p);
        return exit_code_of(st);
    }

    json summary = json::parse(summary_str);
    gf_string_free(summary_str);
    gf_pipeline_free(p);

    int code = 0;
    if (stage == "eval") {
        if (report_kind == "table") {
            std::fputs(summary["table"].get<std::string>().c_str(), stdout);
        } else {
            std::fputs((summary["report"].dump(2) + "\n").c_str(), stdout);
        }
        for (const auto& w : summary["warnings"]) {
            std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
        }
    } else if (stage == "losscheck") {
        std::fputs((summary.dump(2) + "\n").c_str(), stdout);
        if (!summary["all_fd_ok"].get<bool>()) {
            std::fprintf(stderr, "guardforge losscheck: finite-difference check failed\n");
            code = 1;
        }
    } else if (stage == "stats" || !quiet) {
        std::fputs((summary.dump(2) + "\n").c_str(), stdout);
    }
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"guardforge: reasoning-trace data pipeline for guardrail models"};
    app.set_version_flag("--version", std::string(gf_version()));
    app.set_config("--config", "", "Config file (INI; one [section] per subcommand)");
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    bool quiet = false;
    bool verbose = false;
    app.add_flag("--quiet", quiet, "Suppress summary output of mutating stages");
    app.add_flag("--verbose", verbose, "Log resolved options to stderr");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate reasoning traces for seed samples");
    Binder synth_b(synth);
    std::string synth_seed;
    synth->add_option("--seed", synth_seed, "Seed dataset (JSONL or CSV)")->required();
    std::string synth_out, synth_template, synth_format, synth_field_map;
    std::uint64_t synth_rng_seed = 0;
    double synth_temp = 0.0, synth_top_p = 0.95;
    int synth_retries = 0;
    bool synth_no_resume = false;
    synth_b.opt("--out", "out", synth_out, "Output JSONL path")->required();
    synth_b.opt("--template", "template_path", synth_template, "Synthesis prompt template file")
        ->required();
    synth_b.opt("--format", "format", synth_format, "Seed file format: jsonl or csv");
    synth_b.opt("--field-map", "field_map_path", synth_field_map,
                "Field map JSON for foreign seed schemas");
    synth_b.opt("--rng-seed", "rng_seed", synth_rng_seed, "Base seed for sampling requests")
        ->envname("GUARDFORGE_RNG_SEED");
    synth_b.opt("--temperature", "temperature", synth_temp, "Sampling temperature");
    synth_b.opt("--top-p", "top_p", synth_top_p, "Nucleus sampling mass");
    synth_b.opt("--max-invalid-retries", "max_invalid_retries", synth_retries,
                "Regeneration attempts before dropping a sample");
    synth_b.flag("--no-resume", "resume", false, synth_no_resume,
                 "Regenerate everything, ignoring records already in --out");
    EndpointOpts synth_ep;
    synth_ep.add_to(synth, true);

    // mine
    auto* mine = app.add_subcommand("mine", "Sample k outputs per record and keep hard ones");
    Binder mine_b(mine);
    std::vector<std::string> mine_urls;
    std::vector<std::string> mine_models;
    mine->add_option("--endpoint", mine_urls,
                     "Reasoning model endpoint; repeat for an ensemble (first is the policy "
                     "model itself)")
        ->required()
        ->envname("GUARDFORGE_ENDPOINT");
    mine->add_option("--model", mine_models,
                     "Wire model name; one value, or one per --endpoint")
        ->envname("GUARDFORGE_MODEL");
    std::string mine_data, mine_out, mine_instruction;
    int mine_k = 0;
    double mine_gamma = 0.0, mine_temp = 0.0, mine_top_p = 0.0;
    std::uint64_t mine_seed = 0;
    bool mine_dedup = false;
    std::vector<std::string> mine_tasks;
    mine_b.opt("--data", "data", mine_data, "Synthesized JSONL to mine")->required();
    mine_b.opt("--out", "out", mine_out, "Hard-sample JSONL path")->required();
    mine_b.opt("--instruction", "instruction_path", mine_instruction,
               "Moderation instruction file")
        ->required();
    mine_b.opt("--k", "k", mine_k, "Outputs sampled per record");
    mine_b.opt("--gamma", "gamma", mine_gamma, "Weight scale for the alpha term");
    mine_b.opt("--temperature", "temperature", mine_temp, "Sampling temperature");
    mine_b.opt("--top-p", "top_p", mine_top_p, "Nucleus sampling mass");
    mine_b.opt("--seed", "seed", mine_seed, "Base RNG seed")->envname("GUARDFORGE_RNG_SEED");
    mine_b.opt("--task", "tasks", mine_tasks,
               "Task to judge correctness on (repeatable; default: sample's annotations)");
    mine_b.flag("--dedup-outputs", "dedup_outputs", true, mine_dedup,
                "Drop byte-identical outputs when merging ensemble pools");
    EndpointOpts mine_ep;
    mine_ep.add_to(mine, false, false);

    // pairs
    auto* pairs = app.add_subcommand("pairs", "Emit trainer-ready preference and SFT files");
    Binder pairs_b(pairs);
    std::string pairs_hard, pairs_dpo, pairs_sft, pairs_synth, pairs_instruction, pairs_bundle;
    std::uint64_t pairs_seed = 0;
    int pairs_per_sample = 0;
    pairs_b.opt("--hard", "hard", pairs_hard, "Hard-sample JSONL from mine")->required();
    pairs_b.opt("--out-dpo", "out_dpo", pairs_dpo, "Preference pair JSON path")->required();
    pairs_b.opt("--instruction", "instruction_path", pairs_instruction,
                "Moderation instruction file")
        ->required();
    pairs_b.opt("--out-sft", "out_sft", pairs_sft, "Instruction-tuning JSON path (optional)");
    pairs_b.opt("--synth", "synth", pairs_synth,
                "Synthesized JSONL backing --out-sft records");
    pairs_b.opt("--sft-bundle", "sft_bundle", pairs_bundle,
                "SFT scope: 'hard' (mined ids only) or 'full'");
    pairs_b.opt("--seed", "seed", pairs_seed, "RNG seed for pair selection")
        ->envname("GUARDFORGE_RNG_SEED");
    pairs_b.opt("--pairs-per-sample", "pairs_per_sample", pairs_per_sample,
                "Pairs drawn per hard sample");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a model on the guardrail benchmarks");
    Binder eval_b(eval);
    std::string eval_bench, eval_benchmarks, eval_template, eval_cache, eval_labels, eval_out;
    std::string eval_report = "json";
    std::uint64_t eval_seed = 0;
    double eval_temp = 0.0, eval_top_p = 0.0;
    eval_b.opt("--bench", "bench", eval_bench, "Benchmark name, or 'all'");
    eval_b.opt("--benchmarks", "benchmarks_config", eval_benchmarks,
               "Benchmarks config JSON (paths, formats, field maps)")
        ->required();
    eval_b.opt("--template", "instruction_path", eval_template, "Moderation instruction file")
        ->required();
    eval_b.opt("--cache", "cache_dir", eval_cache, "Prediction cache directory")
        ->envname("GUARDFORGE_CACHE_DIR");
    eval_b.opt("--labels", "labels", eval_labels, "Label overlay JSONL ({id, task, label})");
    eval_b.opt("--out", "out", eval_out, "Write the JSON report here as well");
    eval_b.opt("--seed", "seed", eval_seed, "Seed sent with sampling requests")
        ->envname("GUARDFORGE_RNG_SEED");
    eval_b.opt("--temperature", "temperature", eval_temp, "Sampling temperature");
    eval_b.opt("--top-p", "top_p", eval_top_p, "Nucleus sampling mass");
    eval->add_option("--report", eval_report, "Report format: json or table")
        ->check(CLI::IsMember({"json", "table"}));
    EndpointOpts eval_ep;
    eval_ep.add_to(eval, true);

    // stats
    auto* stats = app.add_subcommand("stats", "Corpus statistics of a synthesized JSONL");
    Binder stats_b(stats);
    std::string stats_in;
    stats_b.opt("--in", "in", stats_in, "Synthesized JSONL")->required();

    // losscheck
    auto* losscheck =
        app.add_subcommand("losscheck", "Verify losses and gradients on logged log-probs");
    Binder loss_b(losscheck);
    std::string loss_pairs;
    double loss_lambda = 0.0;
    bool loss_norm = false;
    loss_b.opt("--pairs", "pairs", loss_pairs, "JSONL with lp_* log-prob fields")->required();
    loss_b.opt("--lambda-sft", "lambda_sft", loss_lambda, "SFT mixing weight");
    loss_b.flag("--length-normalize", "length_normalize", true, loss_norm,
                "Divide each side's log-probs by its pos_len/neg_len");

    // subsample
    auto* subsample = app.add_subcommand("subsample", "Deterministic subset of a JSONL corpus");
    Binder sub_b(subsample);
    std::string sub_in, sub_out;
    double sub_fraction = 0.0;
    int sub_floor = 0;
    std::uint64_t sub_seed = 0;
    sub_b.opt("--in", "in", sub_in, "Input sample JSONL")->required();
    sub_b.opt("--out", "out", sub_out, "Output sample JSONL")->required();
    sub_b.opt("--fraction", "fraction", sub_fraction, "Fraction of the corpus to keep");
    sub_b.opt("--floor", "floor", sub_floor, "Minimum number of samples kept");
    sub_b.opt("--seed", "seed", sub_seed, "Selection RNG seed")->envname("GUARDFORGE_RNG_SEED");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (app.got_subcommand(synth)) {
        json options = synth_b.build();
        options["in"] = synth_seed;
        synth_ep.apply(options);
        return run("synth", options, quiet, verbose, "");
    }
    if (app.got_subcommand(mine)) {
        if (mine_models.size() > 1 && mine_models.size() != mine_urls.size()) {
            std::fprintf(stderr,
                         "guardforge mine: pass one --model, or one per --endpoint (%zu "
                         "endpoints, %zu models)\n",
                         mine_urls.size(), mine_models.size());
            return 1;
        }
        json options = mine_b.build();
        json endpoints = json::array();
        for (std::size_t i = 0; i < mine_urls.size(); ++i) {
            std::string model;
            if (mine_models.size() == 1) model = mine_models[0];
            else if (i < mine_models.size()) model = mine_models[i];
            endpoints.push_back(mine_ep.to_json(mine_urls[i], model));
        }
        options["endpoints"] = std::move(endpoints);
        return run("mine", options, quiet, verbose, "");
    }
    if (app.got_subcommand(pairs)) {
        return run("pairs", pairs_b.build(), quiet, verbose, "");
    }
    if (app.got_subcommand(eval)) {
        json options = eval_b.build();
        eval_ep.apply(options);
        return run("eval", options, quiet, verbose, eval_report);
    }
    if (app.got_subcommand(stats)) {
        return run("stats", stats_b.build(), quiet, verbose, "");
    }
    if (app.got_subcommand(losscheck)) {
        return run("losscheck", loss_b.build(), quiet, verbose, "");
    }
    if (app.got_subcommand(subsample)) {
        return run("subsample", sub_b.build(), quiet, verbose, "");
    }
    return 1;
}
