#include "guardforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>

#include "guardforge/bench.hpp"
#include "guardforge/client.hpp"
#include "guardforge/losscheck.hpp"
#include "guardforge/miner.hpp"
#include "guardforge/pairs.hpp"
#include "guardforge/synthesis.hpp"
#include "guardforge/util.hpp"

namespace guardforge {

namespace {

using Clock = std::chrono::steady_clock;

EndpointConfig endpoint_from_json(const json& j) {
    EndpointConfig cfg;
    try {
        cfg.base_url = j.at("base_url").get<std::string>();
        cfg.model = j.value("model", cfg.model);
        cfg.api_key_env = j.value("api_key_env", cfg.api_key_env);
        cfg.timeout_ms = j.value("timeout_ms", cfg.timeout_ms);
        cfg.max_retries = j.value("max_retries", cfg.max_retries);
        cfg.max_inflight = j.value("max_inflight", cfg.max_inflight);
        cfg.retry_backoff_ms = j.value("retry_backoff_ms", cfg.retry_backoff_ms);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("bad endpoint config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json endpoint_to_json(const EndpointConfig& cfg) {
    json j;
    j["base_url"] = cfg.base_url;
    j["model"] = cfg.model;
    j["api_key_env"] = cfg.api_key_env;
    j["timeout_ms"] = cfg.timeout_ms;
    j["max_retries"] = cfg.max_retries;
    j["max_inflight"] = cfg.max_inflight;
    j["retry_backoff_ms"] = cfg.retry_backoff_ms;
    return j;
}

json usage_to_json(const Usage& u) {
    json j;
    j["prompt_tokens"] = u.prompt_tokens;
    j["completion_tokens"] = u.completion_tokens;
    j["total_tokens"] = u.total_tokens;
    return j;
}

std::string required_string(const json& options, const std::string& key) {
    if (!options.contains(key) || !options[key].is_string() ||
        options[key].get<std::string>().empty()) {
        throw Error(ErrorKind::InvalidArgument, "option '" + key + "' is required");
    }
    return options[key].get<std::string>();
}

// Template text comes either inline ("<key>_text") or from a file
// ("<key>_path").
std::string load_text_option(const json& options, const std::string& stem) {
    const std::string text_key = stem + "_text";
    const std::string path_key = stem + "_path";
    if (options.contains(text_key)) return options[text_key].get<std::string>();
    if (options.contains(path_key)) return read_file(options[path_key].get<std::string>());
    throw Error(ErrorKind::InvalidArgument,
                "option '" + text_key + "' or '" + path_key + "' is required");
}

SeedFormat format_from_string(const std::string& s) {
    if (s == "jsonl") return SeedFormat::Jsonl;
    if (s == "csv") return SeedFormat::Csv;
    throw Error(ErrorKind::InvalidArgument, "unknown format '" + s + "' (jsonl or csv)");
}

std::vector<Sample> load_samples_file(const std::string& path) {
    std::vector<Sample> out;
    for (const auto& j : read_jsonl(path)) out.push_back(sample_from_json(j));
    return out;
}

std::vector<SynthesizedRecord> load_synth_file(const std::string& path) {
    std::vector<SynthesizedRecord> out;
    for (const auto& j : read_jsonl(path)) out.push_back(synthesized_from_json(j));
    return out;
}

std::vector<HardSampleRecord> load_hard_file(const std::string& path) {
    std::vector<HardSampleRecord> out;
    for (const auto& j : read_jsonl(path)) out.push_back(hard_from_json(j));
    return out;
}

// The manifest makes any stage re-drivable: the options snapshot plus input
// hashes pin what ran, output hashes pin what it produced.
struct ManifestBuilder {
    json manifest;
    Clock::time_point started = Clock::now();

    ManifestBuilder(const std::string& stage, const json& options) {
        manifest["command"] = stage;
        manifest["version"] = kVersion;
        manifest["config"] = options;
        manifest["inputs"] = json::object();
        manifest["outputs"] = json::object();
    }

    void add_input(const std::string& path) {
        if (!path.empty()) manifest["inputs"][path] = sha256_file(path);
    }
    void add_output(const std::string& path) {
        if (!path.empty()) manifest["outputs"][path] = sha256_file(path);
    }

    void write_next_to(const std::string& out_path) {
        manifest["wall_time_ms"] =
            std::chrono::duration<double, std::milli>(Clock::now() - started).count();
        write_file_atomic(out_path + ".manifest.json", manifest.dump(2) + "\n");
    }
};

std::vector<Sample> load_seed_input(const json& options, ManifestBuilder& mb) {
    const std::string path = required_string(options, "in");
    mb.add_input(path);
    if (options.contains("field_map") || options.contains("field_map_path")) {
        json fmj = options.contains("field_map")
                       ? options["field_map"]
                       : json::parse(read_file(options["field_map_path"].get<std::string>()));
        const FieldMap fm = field_map_from_json(fmj);
        const SeedFormat format = format_from_string(options.value("format", "jsonl"));
        return ingest_seed(path, format, fm);
    }
    return load_samples_file(path);
}

json stage_synth(const json& options) {
    ManifestBuilder mb("synth", options);
    const std::string out_path = required_string(options, "out");

    SynthConfig cfg;
    cfg.template_text = load_text_option(options, "template");
    cfg.temperature = options.value("temperature", 0.0);
    cfg.top_p = options.value("top_p", 0.95);
    cfg.seed = options.value("rng_seed", std::uint64_t{0});
    cfg.max_invalid_retries = options.value("max_invalid_retries", 2);

    const std::vector<Sample> seeds = load_seed_input(options, mb);

    std::vector<SynthesizedRecord> existing;
    if (options.value("resume", true) && std::filesystem::exists(out_path)) {
        existing = load_synth_file(out_path);
    }

    ChatClient client(endpoint_from_json(options.at("endpoint")));
    SynthOutcome outcome = run_synthesis(seeds, client, cfg, existing);

    std::vector<json> records;
    records.reserve(outcome.records.size());
    for (const auto& rec : outcome.records) records.push_back(synthesized_to_json(rec));
    write_jsonl(out_path, records);

    mb.add_output(out_path);
    mb.manifest["seeds"] = json{{"rng_seed", cfg.seed}};
    mb.manifest["endpoint"] = endpoint_to_json(client.config());
    mb.manifest["token_totals"] = usage_to_json(client.total_usage());
    mb.manifest["requests"] = outcome.requests_made;
    mb.manifest["dropped"] = outcome.dropped;
    mb.write_next_to(out_path);

    json summary;
    summary["records"] = outcome.records.size();
    summary["dropped"] = outcome.dropped.size();
    summary["requests"] = outcome.requests_made;
    summary["out"] = out_path;
    summary["manifest"] = out_path + ".manifest.json";
    return summary;
}

json stage_mine(const json& options) {
    ManifestBuilder mb("mine", options);
    const std::string out_path = required_string(options, "out");
    const std::string data_path = required_string(options, "data");
    mb.add_input(data_path);

    MinerConfig cfg;
    cfg.k = options.value("k", 8);
    cfg.temperature = options.value("temperature", 1.0);
    cfg.top_p = options.value("top_p", 0.95);
    cfg.gamma = options.value("gamma", 0.2);
    cfg.seed = options.value("seed", std::uint64_t{0});
    cfg.dedup_outputs = options.value("dedup_outputs", false);
    cfg.instruction_template = load_text_option(options, "instruction");
    if (options.contains("tasks")) {
        for (const auto& name : options["tasks"]) {
            auto task = task_from_name(name.get<std::string>());
            if (!task) {
                throw Error(ErrorKind::InvalidArgument,
                            "unknown task '" + name.get<std::string>() + "'");
            }
            cfg.tasks.insert(*task);
        }
    }

    std::vector<json> endpoint_jsons;
    if (options.contains("endpoints")) {
        for (const auto& e : options["endpoints"]) endpoint_jsons.push_back(e);
    } else if (options.contains("endpoint")) {
        endpoint_jsons.push_back(options["endpoint"]);
    }
    if (endpoint_jsons.empty()) {
        throw Error(ErrorKind::InvalidArgument, "option 'endpoint' or 'endpoints' is required");
    }

    const std::vector<Sample> data = load_samples_file(data_path);

    std::vector<std::pair<std::string, std::vector<HardSampleRecord>>> pools;
    json endpoints_manifest = json::array();
    Usage totals;
    int requests = 0;
    for (const auto& ej : endpoint_jsons) {
        ChatClient client(endpoint_from_json(ej));
        MineOutcome mined = mine_hard_samples(data, client, cfg);
        requests += mined.requests_made;
        totals += client.total_usage();
        endpoints_manifest.push_back(endpoint_to_json(client.config()));
        pools.emplace_back(client.config().model, std::move(mined.records));
    }
    std::vector<HardSampleRecord> records =
        ensemble_merge(pools, cfg.gamma, cfg.dedup_outputs);

    std::vector<json> lines;
    lines.reserve(records.size());
    for (const auto& rec : records) lines.push_back(hard_to_json(rec));
    write_jsonl(out_path, lines);

    mb.add_output(out_path);
    mb.manifest["seeds"] = json{{"seed", cfg.seed}};
    mb.manifest["endpoints"] = std::move(endpoints_manifest);
    mb.manifest["token_totals"] = usage_to_json(totals);
    mb.manifest["requests"] = requests;
    mb.manifest["k"] = cfg.k;
    mb.manifest["gamma"] = cfg.gamma;
    mb.write_next_to(out_path);

    json summary;
    summary["samples_scanned"] = data.size();
    summary["hard_samples"] = records.size();
    summary["requests"] = requests;
    summary["out"] = out_path;
    summary["manifest"] = out_path + ".manifest.json";
    return summary;
}

json stage_pairs(const json& options) {
    ManifestBuilder mb("pairs", options);
    const std::string hard_path = required_string(options, "hard");
    const std::string out_dpo = required_string(options, "out_dpo");
    mb.add_input(hard_path);

    const std::string instruction = load_text_option(options, "instruction");
    const auto seed = options.value("seed", std::uint64_t{0});
    const int per_sample = options.value("pairs_per_sample", 1);

    const std::vector<HardSampleRecord> hard = load_hard_file(hard_path);
    const std::vector<PreferencePair> pairs =
        build_all_pairs(hard, instruction, seed, per_sample);
    export_preference_file(pairs, hard, out_dpo);
    mb.add_output(out_dpo);

    json summary;
    summary["pairs"] = pairs.size();
    summary["out_dpo"] = out_dpo;

    if (options.contains("out_sft")) {
        const std::string out_sft = options["out_sft"].get<std::string>();
        const std::string synth_path = required_string(options, "synth");
        mb.add_input(synth_path);
        std::vector<SynthesizedRecord> synth = load_synth_file(synth_path);
        const std::string bundle = options.value("sft_bundle", "hard");
        if (bundle == "hard") {
            std::set<std::string> hard_ids;
            for (const auto& rec : hard) hard_ids.insert(rec.sample.id);
            std::vector<SynthesizedRecord> kept;
            for (auto& rec : synth) {
                if (hard_ids.count(rec.sample.id)) kept.push_back(std::move(rec));
            }
            synth = std::move(kept);
        } else if (bundle != "full") {
            throw Error(ErrorKind::InvalidArgument,
                        "sft_bundle must be 'hard' or 'full', got '" + bundle + "'");
        }
        const std::vector<SftRecord> sft = emit_sft(synth, instruction);
        export_instruction_file(sft, out_sft);
        mb.add_output(out_sft);
        summary["sft_records"] = sft.size();
        summary["out_sft"] = out_sft;
    }

    mb.manifest["seeds"] = json{{"seed", seed}, {"pairs_per_sample", per_sample}};
    mb.write_next_to(out_dpo);
    summary["manifest"] = out_dpo + ".manifest.json";
    return summary;
}

json stage_eval(const json& options_in) {
    ManifestBuilder mb("eval", options_in);

    // A benchmarks config file holds the per-dataset field maps and paths
    // (relative to its data_dir) so the CLI only names it.
    json options = options_in;
    if (options.contains("benchmarks_config")) {
        const std::string cfg_path = options["benchmarks_config"].get<std::string>();
        mb.add_input(cfg_path);
        json bc;
        try {
            bc = json::parse(read_file(cfg_path));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::SchemaMismatch, cfg_path + ": " + e.what());
        }
        const std::string data_dir = bc.value("data_dir", "");
        json arr = json::array();
        for (auto b : bc.at("benchmarks")) {
            if (!data_dir.empty() && b.contains("path")) {
                const auto p = b["path"].get<std::string>();
                if (!p.empty() && p.front() != '/') b["path"] = data_dir + "/" + p;
            }
            arr.push_back(std::move(b));
        }
        options["benchmarks"] = std::move(arr);
    }

    EvalConfig cfg;
    cfg.instruction = load_text_option(options, "instruction");
    cfg.temperature = options.value("temperature", 0.0);
    cfg.top_p = options.value("top_p", 1.0);
    cfg.seed = options.value("seed", std::uint64_t{0});
    cfg.rejection_as_positive = options.value("rejection_as_positive", true);
    cfg.cache_dir = options.value("cache_dir", "");

    if (!options.contains("benchmarks") || !options["benchmarks"].is_array() ||
        options["benchmarks"].empty()) {
        throw Error(ErrorKind::InvalidArgument, "option 'benchmarks' is required");
    }
    const std::string filter = options.value("bench", "all");

    std::vector<BenchmarkData> benches;
    for (const auto& bj : options["benchmarks"]) {
        const std::string name = bj.at("name").get<std::string>();
        if (filter != "all" && filter != name) continue;
        std::vector<BenchmarkSpec> slices = registry_find(name);
        if (slices.empty()) {
            throw Error(ErrorKind::InvalidArgument, "unknown benchmark '" + name + "'");
        }
        if (bj.contains("task")) {
            auto task = task_from_name(bj["task"].get<std::string>());
            if (!task) {
                throw Error(ErrorKind::InvalidArgument,
                            "unknown task '" + bj["task"].get<std::string>() + "'");
            }
            std::erase_if(slices, [&](const BenchmarkSpec& s) { return s.task != *task; });
            if (slices.empty()) {
                throw Error(ErrorKind::InvalidArgument,
                            name + " has no slice for task " + bj["task"].get<std::string>());
            }
        }
        const std::string path = bj.at("path").get<std::string>();
        mb.add_input(path);
        const SeedFormat format = format_from_string(bj.value("format", "jsonl"));
        const FieldMap fm = field_map_from_json(bj.at("field_map"));
        for (const auto& spec : slices) {
            benches.push_back(load_benchmark(spec, path, format, fm));
        }
    }
    if (benches.empty()) {
        throw Error(ErrorKind::InvalidArgument,
                    "benchmark filter '" + filter + "' matched nothing");
    }

    // Report rows follow registry order regardless of config order.
    std::map<std::pair<std::string, TaskKind>, std::size_t> order;
    const auto& registry = benchmark_registry();
    for (std::size_t i = 0; i < registry.size(); ++i) {
        order[{registry[i].name, registry[i].task}] = i;
    }
    std::stable_sort(benches.begin(), benches.end(),
                     [&](const BenchmarkData& a, const BenchmarkData& b) {
                         return order.at({a.spec.name, a.spec.task}) <
                                order.at({b.spec.name, b.spec.task});
                     });

    LabelOverlay overlay;
    if (options.contains("labels")) {
        const std::string overlay_path = options["labels"].get<std::string>();
        mb.add_input(overlay_path);
        overlay = load_label_overlay(overlay_path);
    }

    ChatClient client(endpoint_from_json(options.at("endpoint")));
    EvalOutcome outcome = evaluate(benches, client, cfg, overlay);

    json summary;
    summary["report"] = report_to_json(outcome.report);
    summary["table"] = report_to_table(outcome.report);
    summary["requests"] = outcome.requests_made;
    summary["cache_hits"] = outcome.cache_hits;
    summary["warnings"] = outcome.warnings;

    if (options.contains("out")) {
        const std::string out_path = options["out"].get<std::string>();
        write_file_atomic(out_path, report_to_json(outcome.report).dump(2) + "\n");
        mb.add_output(out_path);
        mb.manifest["seeds"] = json{{"seed", cfg.seed}};
        mb.manifest["endpoint"] = endpoint_to_json(client.config());
        mb.manifest["token_totals"] = usage_to_json(client.total_usage());
        mb.manifest["requests"] = outcome.requests_made;
        mb.manifest["warnings"] = outcome.warnings;
        mb.write_next_to(out_path);
        summary["out"] = out_path;
        summary["manifest"] = out_path + ".manifest.json";
    }
    return summary;
}

json stage_stats(const json& options) {
    const std::string in_path = required_string(options, "in");
    const std::vector<SynthesizedRecord> records = load_synth_file(in_path);
    const CorpusStats stats = corpus_stats(records);

    json summary;
    summary["n_samples"] = stats.n_samples;
    summary["n_steps"] = stats.n_steps;
    summary["mean_steps"] = stats.mean_steps;
    summary["mean_len_per_step"] = stats.mean_len_per_step;
    return summary;
}

json stage_losscheck(const json& options) {
    const std::string in_path = required_string(options, "pairs");
    const double lambda_sft = options.value("lambda_sft", kDefaultLambdaSft);
    const bool length_normalize = options.value("length_normalize", false);

    const auto rows = read_jsonl(in_path);
    if (rows.empty()) {
        throw Error(ErrorKind::EmptyInput, in_path + " has no rows");
    }

    json out_rows = json::array();
    std::vector<double> losses;
    bool all_fd_ok = true;
    std::size_t line = 0;
    for (const auto& j : rows) {
        ++line;
        const std::string where = in_path + ":" + std::to_string(line);
        PairLogProbs p;
        try {
            p.lp_pos_policy = j.at("lp_pos_policy").get<double>();
            p.lp_pos_ref = j.at("lp_pos_ref").get<double>();
            p.lp_neg_policy = j.at("lp_neg_policy").get<double>();
            p.lp_neg_ref = j.at("lp_neg_ref").get<double>();
            p.alpha = j.value("alpha", 1.0);
            p.beta = j.value("beta", kDefaultBeta);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::SchemaMismatch, where + ": " + e.what());
        }
        if (length_normalize) {
            // Optional deviation from the plain objective: divide each side's
            // log-probabilities by its stated sequence length.
            const auto pos_len = j.value("pos_len", 0);
            const auto neg_len = j.value("neg_len", 0);
            if (pos_len <= 0 || neg_len <= 0) {
                throw Error(ErrorKind::InvalidArgument,
                            where + ": length_normalize needs positive pos_len and neg_len");
            }
            p.lp_pos_policy /= pos_len;
            p.lp_pos_ref /= pos_len;
            p.lp_neg_policy /= neg_len;
            p.lp_neg_ref /= neg_len;
        }

        const double loss = hs_dpo_loss(p);
        const PairGrads grads = hs_dpo_grads(p);

        // Central finite differences over both policy log-probabilities.
        const double h = 1e-5;
        auto fd = [&](double PairLogProbs::*field) {
            PairLogProbs hi = p, lo = p;
            hi.*field += h;
            lo.*field -= h;
            return (hs_dpo_loss(hi) - hs_dpo_loss(lo)) / (2 * h);
        };
        const double fd_pos = fd(&PairLogProbs::lp_pos_policy);
        const double fd_neg = fd(&PairLogProbs::lp_neg_policy);
        auto rel_err = [](double got, double want) {
            return std::abs(got - want) / std::max(std::abs(want), 1e-12);
        };
        const bool fd_ok = rel_err(fd_pos, grads.d_lp_pos_policy) < 1e-5 &&
                           rel_err(fd_neg, grads.d_lp_neg_policy) < 1e-5;
        all_fd_ok = all_fd_ok && fd_ok;

        json row;
        row["loss"] = loss;
        row["d_lp_pos_policy"] = grads.d_lp_pos_policy;
        row["d_lp_neg_policy"] = grads.d_lp_neg_policy;
        row["fd_ok"] = fd_ok;
        double total = loss;
        if (j.contains("chosen_token_logprobs")) {
            SftLogProbs s;
            s.token_logprobs = j["chosen_token_logprobs"].get<std::vector<double>>();
            row["sft_nll"] = sft_nll(s);
            total = mixed_loss(p, s, lambda_sft);
            row["mixed_loss"] = total;
        }
        losses.push_back(total);
        out_rows.push_back(std::move(row));
    }

    json summary;
    summary["rows"] = std::move(out_rows);
    summary["batch_mean"] = batch_mean(losses);
    summary["all_fd_ok"] = all_fd_ok;
    return summary;
}

json stage_subsample(const json& options) {
    ManifestBuilder mb("subsample", options);
    const std::string in_path = required_string(options, "in");
    const std::string out_path = required_string(options, "out");
    mb.add_input(in_path);

    const double fraction = options.value("fraction", 0.05);
    const int floor_n = options.value("floor", 100);
    const auto seed = options.value("seed", std::uint64_t{0});

    const std::vector<Sample> samples = load_samples_file(in_path);
    const std::vector<Sample> picked = subsample(samples, fraction, floor_n, seed);

    std::vector<json> lines;
    lines.reserve(picked.size());
    for (const auto& s : picked) lines.push_back(sample_to_json(s));
    write_jsonl(out_path, lines);

    mb.add_output(out_path);
    mb.manifest["seeds"] = json{{"seed", seed}};
    mb.write_next_to(out_path);

    json summary;
    summary["in_count"] = samples.size();
    summary["out_count"] = picked.size();
    summary["out"] = out_path;
    summary["manifest"] = out_path + ".manifest.json";
    return summary;
}

} // namespace

json run_stage(const std::string& stage, const json& options) {
    if (!options.is_object()) {
        throw Error(ErrorKind::InvalidArgument, "stage options must be a json object");
    }
    if (stage == "synth") return stage_synth(options);
    if (stage == "mine") return stage_mine(options);
    if (stage == "pairs") return stage_pairs(options);
    if (stage == "eval") return stage_eval(options);
    if (stage == "stats") return stage_stats(options);
    if (stage == "losscheck") return stage_losscheck(options);
    if (stage == "subsample") return stage_subsample(options);
    throw Error(ErrorKind::InvalidArgument, "unknown stage '" + stage + "'");
}

} // namespace guardforge
