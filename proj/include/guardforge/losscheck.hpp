#pragma once

#include <vector>

#include "guardforge/error.hpp"

namespace guardforge {

/// Sequence log-probabilities (nats) for one preference pair under the
/// policy and the frozen reference model, plus the pair's sample weight and
/// the KL-constraint strength.
struct PairLogProbs {
    double lp_pos_policy = 0.0;
    double lp_pos_ref = 0.0;
    double lp_neg_policy = 0.0;
    double lp_neg_ref = 0.0;
    double alpha = 1.0;
    double beta = 0.01;

    void validate() const;
};

/// Per-token log-probabilities (nats) of the target sequence.
struct SftLogProbs {
    std::vector<double> token_logprobs;

    void validate() const;
};

/// Negative log-likelihood of the target sequence: -sum(token_logprobs).
double sft_nll(const SftLogProbs& s);

/// Preference loss -alpha * log(sigmoid(A - B)) with A and B the beta-scaled
/// policy/reference log-ratios of the chosen and rejected sequences.
/// Evaluated as alpha * softplus(B - A), which stays finite for any margin.
double hs_dpo_loss(const PairLogProbs& p);

struct PairGrads {
    double d_lp_pos_policy = 0.0;
    double d_lp_neg_policy = 0.0;
};

/// Analytic partials of hs_dpo_loss with respect to the two policy
/// log-probabilities: -alpha*beta*sigmoid(B-A) and +alpha*beta*sigmoid(B-A).
PairGrads hs_dpo_grads(const PairLogProbs& p);

/// Preference loss with the SFT term mixed in on the chosen sequence:
/// hs_dpo_loss(p) + lambda_sft * sft_nll(s_chosen).
double mixed_loss(const PairLogProbs& p, const SftLogProbs& s_chosen, double lambda_sft);

/// Arithmetic mean over per-sample losses. Throws EmptyInput on an empty
/// batch.
double batch_mean(const std::vector<double>& losses);

inline constexpr double kDefaultBeta = 0.01;
inline constexpr double kDefaultLambdaSft = 2.0;

} // namespace guardforge
