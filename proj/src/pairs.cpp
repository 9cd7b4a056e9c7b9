#include "guardforge/pairs.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "guardforge/prompt.hpp"
#include "guardforge/util.hpp"

namespace guardforge {

namespace {

// Judgment at export mirrors the miner default: jointly over every task the
// sample's gold annotates.
bool output_correct(const std::string& text, const Sample& sample) {
    RawModelOutput raw;
    raw.text = text;
    ParseOutcome outcome = parse_output(raw);
    return outcome.is_verdict() &&
           judge_correctness(*outcome.verdict, sample.gold, sample.annotated_tasks());
}

} // namespace

std::vector<SftRecord> emit_sft(const std::vector<SynthesizedRecord>& records,
                                const std::string& instruction) {
    const std::string instr = trim(instruction);
    if (instr.empty()) {
        throw Error(ErrorKind::InvalidArgument, "instruction template is empty");
    }
    std::vector<SftRecord> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        if (!rec.validated) {
            throw Error(ErrorKind::UnvalidatedRecord,
                        rec.sample.id + " is not validated; refusing to emit");
        }
        Verdict v = make_verdict(ReasoningTrace::make(rec.steps), rec.sample.gold);
        SftRecord sft;
        sft.instruction = instr;
        sft.input = render_input(rec.sample);
        sft.output = render_output(v);
        sft.sample_id = rec.sample.id;
        out.push_back(std::move(sft));
    }
    std::sort(out.begin(), out.end(),
              [](const SftRecord& a, const SftRecord& b) { return a.sample_id < b.sample_id; });
    return out;
}

PreferencePair build_pair(const HardSampleRecord& h, const std::string& instruction,
                          std::uint64_t rng_seed, int pair_index) {
    const std::string instr = trim(instruction);
    if (instr.empty()) {
        throw Error(ErrorKind::InvalidArgument, "instruction template is empty");
    }
    std::vector<const SampledOutput*> correct, incorrect;
    for (const auto& o : h.outputs) {
        (o.correct ? correct : incorrect).push_back(&o);
    }
    if (correct.empty() || incorrect.empty()) {
        throw Error(ErrorKind::NotAmbiguous,
                    h.sample.id + " lacks a correct/incorrect mixture");
    }

    std::mt19937_64 eng(
        derive_seed(rng_seed, h.sample.id, static_cast<std::uint64_t>(pair_index)));
    const SampledOutput* chosen = correct[eng() % correct.size()];
    const SampledOutput* rejected = incorrect[eng() % incorrect.size()];

    PreferencePair pair;
    pair.instruction = instr;
    pair.input = render_input(h.sample);
    pair.chosen = chosen->raw.text;
    pair.rejected = rejected->raw.text;
    pair.weight = h.alpha;
    pair.sample_id = h.sample.id;
    pair.chosen_seed = chosen->raw.seed.value_or(0);
    pair.rejected_seed = rejected->raw.seed.value_or(0);
    return pair;
}

std::vector<PreferencePair> build_all_pairs(const std::vector<HardSampleRecord>& records,
                                            const std::string& instruction,
                                            std::uint64_t rng_seed, int pairs_per_sample) {
    if (pairs_per_sample < 1) {
        throw Error(ErrorKind::InvalidArgument, "pairs_per_sample must be >= 1");
    }
    std::vector<PreferencePair> out;
    out.reserve(records.size() * static_cast<std::size_t>(pairs_per_sample));
    for (const auto& rec : records) {
        for (int j = 0; j < pairs_per_sample; ++j) {
            out.push_back(build_pair(rec, instruction, rng_seed, j));
        }
    }
    return out;
}

void export_preference_file(const std::vector<PreferencePair>& pairs,
                            const std::vector<HardSampleRecord>& records,
                            const std::string& path) {
    if (pairs.empty()) {
        throw Error(ErrorKind::EmptyInput, "no preference pairs to export");
    }
    std::map<std::string, const Sample*> by_id;
    for (const auto& rec : records) by_id[rec.sample.id] = &rec.sample;

    for (const auto& p : pairs) {
        auto it = by_id.find(p.sample_id);
        if (it == by_id.end()) {
            throw Error(ErrorKind::ValidationFailed,
                        "pair references unknown sample " + p.sample_id);
        }
        if (!output_correct(p.chosen, *it->second)) {
            throw Error(ErrorKind::ValidationFailed,
                        "chosen output for " + p.sample_id + " is not correct");
        }
        if (output_correct(p.rejected, *it->second)) {
            throw Error(ErrorKind::ValidationFailed,
                        "rejected output for " + p.sample_id + " is not incorrect");
        }
    }

    json arr = json::array();
    for (const auto& p : pairs) {
        json j;
        j["instruction"] = p.instruction;
        j["input"] = p.input;
        j["chosen"] = p.chosen;
        j["rejected"] = p.rejected;
        j["weight"] = p.weight;
        arr.push_back(std::move(j));
    }
    write_file_atomic(path, arr.dump(2) + "\n");
}

void export_instruction_file(const std::vector<SftRecord>& records, const std::string& path) {
    if (records.empty()) {
        throw Error(ErrorKind::EmptyInput, "no sft records to export");
    }
    json arr = json::array();
    for (const auto& r : records) {
        json j;
        j["instruction"] = r.instruction;
        j["input"] = r.input;
        j["output"] = r.output;
        arr.push_back(std::move(j));
    }
    write_file_atomic(path, arr.dump(2) + "\n");
}

std::vector<PreferencePair> read_preference_file(const std::string& path) {
    json arr;
    try {
        arr = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch, path + ": " + e.what());
    }
    if (!arr.is_array()) {
        throw Error(ErrorKind::SchemaMismatch, path + ": expected a json array");
    }
    std::vector<PreferencePair> out;
    try {
        for (const auto& j : arr) {
            PreferencePair p;
            p.instruction = j.at("instruction").get<std::string>();
            p.input = j.at("input").get<std::string>();
            p.chosen = j.at("chosen").get<std::string>();
            p.rejected = j.at("rejected").get<std::string>();
            p.weight = j.at("weight").get<double>();
            out.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch, path + ": " + e.what());
    }
    return out;
}

std::vector<SftRecord> read_instruction_file(const std::string& path) {
    json arr;
    try {
        arr = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch, path + ": " + e.what());
    }
    if (!arr.is_array()) {
        throw Error(ErrorKind::SchemaMismatch, path + ": expected a json array");
    }
    std::vector<SftRecord> out;
    try {
        for (const auto& j : arr) {
            SftRecord r;
            r.instruction = j.at("instruction").get<std::string>();
            r.input = j.at("input").get<std::string>();
            r.output = j.at("output").get<std::string>();
            out.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch, path + ": " + e.what());
    }
    return out;
}

} // namespace guardforge
