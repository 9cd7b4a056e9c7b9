#include "guardforge/losscheck.hpp"

#include <cmath>
#include <numeric>

namespace guardforge {

namespace {

bool finite(double x) {
    return std::isfinite(x);
}

// log(1 + exp(t)) without overflow. For large positive t the exp would
// overflow, so the identity softplus(t) = t + softplus(-t) is used there.
double softplus(double t) {
    if (t > 0.0) {
        return t + std::log1p(std::exp(-t));
    }
    return std::log1p(std::exp(t));
}

double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

} // namespace

void PairLogProbs::validate() const {
    if (!finite(lp_pos_policy) || !finite(lp_pos_ref) || !finite(lp_neg_policy) ||
        !finite(lp_neg_ref)) {
        throw Error(ErrorKind::InvalidArgument, "pair log-probabilities must be finite");
    }
    // Weights run from 1-gamma to 1+gamma, so anything positive is in play.
    if (!finite(alpha) || alpha <= 0.0) {
        throw Error(ErrorKind::InvalidArgument, "alpha must be finite and > 0");
    }
    if (!finite(beta) || beta <= 0.0) {
        throw Error(ErrorKind::InvalidArgument, "beta must be finite and > 0");
    }
}

void SftLogProbs::validate() const {
    if (token_logprobs.empty()) {
        throw Error(ErrorKind::EmptyInput, "token_logprobs is empty");
    }
    for (double lp : token_logprobs) {
        if (!finite(lp)) {
            throw Error(ErrorKind::InvalidArgument, "token log-probability must be finite");
        }
        if (lp > 0.0) {
            throw Error(ErrorKind::InvalidArgument, "token log-probability must be <= 0");
        }
    }
}

double sft_nll(const SftLogProbs& s) {
    s.validate();
    // Kahan summation: sequence NLLs add tens of thousands of small terms,
    // and downstream checks compare against an independent compensated sum.
    double sum = 0.0;
    double carry = 0.0;
    for (double lp : s.token_logprobs) {
        const double y = lp - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    return -sum;
}

double hs_dpo_loss(const PairLogProbs& p) {
    p.validate();
    const double a = p.beta * (p.lp_pos_policy - p.lp_pos_ref);
    const double b = p.beta * (p.lp_neg_policy - p.lp_neg_ref);
    return p.alpha * softplus(b - a);
}

PairGrads hs_dpo_grads(const PairLogProbs& p) {
    p.validate();
    const double a = p.beta * (p.lp_pos_policy - p.lp_pos_ref);
    const double b = p.beta * (p.lp_neg_policy - p.lp_neg_ref);
    const double s = sigmoid(b - a);
    PairGrads g;
    g.d_lp_pos_policy = -p.alpha * p.beta * s;
    g.d_lp_neg_policy = p.alpha * p.beta * s;
    return g;
}

double mixed_loss(const PairLogProbs& p, const SftLogProbs& s_chosen, double lambda_sft) {
    if (!finite(lambda_sft) || lambda_sft < 0.0) {
        throw Error(ErrorKind::InvalidArgument, "lambda_sft must be finite and >= 0");
    }
    return hs_dpo_loss(p) + lambda_sft * sft_nll(s_chosen);
}

double batch_mean(const std::vector<double>& losses) {
    if (losses.empty()) {
        throw Error(ErrorKind::EmptyInput, "batch_mean over empty batch");
    }
    const double sum = std::accumulate(losses.begin(), losses.end(), 0.0);
    return sum / static_cast<double>(losses.size());
}

} // namespace guardforge
