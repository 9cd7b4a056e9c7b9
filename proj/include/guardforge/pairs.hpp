#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "guardforge/miner.hpp"
#include "guardforge/synthesis.hpp"

namespace guardforge {

/// One supervised training example: fixed instruction, rendered sample
/// input, and the canonical reasoning-plus-answers output text.
struct SftRecord {
    std::string instruction;
    std::string input;
    std::string output;
    std::string sample_id;
};

/// One preference example. weight carries the sample's alpha so trainers can
/// apply the weighted objective; trainers that drop it fall back to the
/// unweighted preference loss.
struct PreferencePair {
    std::string instruction;
    std::string input;
    std::string chosen;
    std::string rejected;
    double weight = 1.0;
    std::string sample_id;
    std::uint64_t chosen_seed = 0;
    std::uint64_t rejected_seed = 0;
};

/// One SftRecord per record, ordered by id. Throws UnvalidatedRecord if any
/// record has validated == false.
std::vector<SftRecord> emit_sft(const std::vector<SynthesizedRecord>& records,
                                const std::string& instruction);

/// Uniformly picks one correct output as chosen and one incorrect as
/// rejected, with the engine seeded by derive_seed(rng_seed, h.sample.id,
/// pair_index). weight = h.alpha. Throws NotAmbiguous when either side is
/// empty.
PreferencePair build_pair(const HardSampleRecord& h, const std::string& instruction,
                          std::uint64_t rng_seed, int pair_index = 0);

/// pairs_per_sample pairs per record, record order preserved (records are
/// expected id-sorted).
std::vector<PreferencePair> build_all_pairs(const std::vector<HardSampleRecord>& records,
                                            const std::string& instruction,
                                            std::uint64_t rng_seed, int pairs_per_sample = 1);

/// Writes a JSON array of {instruction, input, chosen, rejected, weight}.
/// Before writing, every pair is re-checked by parsing chosen and rejected
/// and judging them against the sample's gold; any violation aborts with
/// ValidationFailed. Throws EmptyInput on no pairs.
void export_preference_file(const std::vector<PreferencePair>& pairs,
                            const std::vector<HardSampleRecord>& records,
                            const std::string& path);

/// Writes a JSON array of {instruction, input, output}. Throws EmptyInput.
void export_instruction_file(const std::vector<SftRecord>& records, const std::string& path);

std::vector<PreferencePair> read_preference_file(const std::string& path);
std::vector<SftRecord> read_instruction_file(const std::string& path);

} // namespace guardforge
