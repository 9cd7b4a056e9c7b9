#include "guardforge.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "guardforge/error.hpp"
#include "guardforge/jsonl.hpp"
#include "guardforge/losscheck.hpp"
#include "guardforge/metrics.hpp"
#include "guardforge/miner.hpp"
#include "guardforge/parser.hpp"
#include "guardforge/pipeline.hpp"

using namespace guardforge;

struct gf_pipeline {
    std::string last_error;
};

namespace {

gf_status status_of(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidCounts:
    case ErrorKind::EmptyInput:
    case ErrorKind::NotAmbiguous:
    case ErrorKind::NotARejection:
        return GF_ERR_INVALID_ARGUMENT;
    case ErrorKind::UnrecognizedLabel:
    case ErrorKind::MissingGold:
    case ErrorKind::AbsentGold:
    case ErrorKind::UnvalidatedRecord:
    case ErrorKind::SchemaMismatch:
    case ErrorKind::ValidationFailed:
    case ErrorKind::EmptyCorpus:
    case ErrorKind::NoPositives:
        return GF_ERR_VALIDATION;
    case ErrorKind::Io:
        return GF_ERR_IO;
    case ErrorKind::EndpointUnavailable:
    case ErrorKind::AuthFailure:
    case ErrorKind::Timeout:
    case ErrorKind::UnknownSampleId:
        return GF_ERR_ENDPOINT;
    }
    return GF_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(::operator new(s.size() + 1, std::nothrow));
    if (out == nullptr) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

/// Runs fn, routing exceptions into a status code and, when a handle is
/// given, its last_error buffer.
template <typename Fn>
gf_status guarded(gf_pipeline* p, Fn&& fn) {
    std::string message;
    gf_status st = GF_OK;
    try {
        fn();
    } catch (const Error& e) {
        st = status_of(e.kind());
        message = e.what();
    } catch (const std::bad_alloc&) {
        st = GF_ERR_INTERNAL;
        message = "out of memory";
    } catch (const std::exception& e) {
        st = GF_ERR_INTERNAL;
        message = e.what();
    } catch (...) {
        st = GF_ERR_INTERNAL;
        message = "unknown error";
    }
    if (p != nullptr) p->last_error = message;
    return st;
}

} // namespace

extern "C" {

const char* gf_version(void) { return kVersion; }

gf_pipeline* gf_pipeline_new(void) { return new (std::nothrow) gf_pipeline(); }

void gf_pipeline_free(gf_pipeline* p) { delete p; }

const char* gf_pipeline_last_error(const gf_pipeline* p) {
    if (p == nullptr) return "";
    return p->last_error.c_str();
}

gf_status gf_pipeline_run(gf_pipeline* p, const char* stage, const char* options_json,
                          char** summary_json) {
    if (p == nullptr) return GF_ERR_INVALID_ARGUMENT;
    if (stage == nullptr || options_json == nullptr) {
        p->last_error = "stage and options_json must be non-null";
        return GF_ERR_INVALID_ARGUMENT;
    }
    return guarded(p, [&] {
        json options;
        try {
            options = json::parse(options_json);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::InvalidArgument,
                        std::string("options_json is not valid JSON: ") + e.what());
        }
        json summary = run_stage(stage, options);
        if (summary_json != nullptr) {
            *summary_json = dup_string(summary.dump(2) + "\n");
            if (*summary_json == nullptr) throw std::bad_alloc();
        }
    });
}

void gf_string_free(char* s) { ::operator delete(s, std::nothrow); }

gf_status gf_alpha_weight(int k_corr, int k_incorr, double gamma, double* out_alpha) {
    return guarded(nullptr, [&] {
        double a = alpha_weight(k_corr, k_incorr, gamma);
        if (out_alpha != nullptr) *out_alpha = a;
    });
}

gf_status gf_hs_dpo_loss(double lp_pos_policy, double lp_pos_ref, double lp_neg_policy,
                         double lp_neg_ref, double alpha, double beta, double* out_loss,
                         double* out_d_lp_pos_policy, double* out_d_lp_neg_policy) {
    return guarded(nullptr, [&] {
        PairLogProbs pair;
        pair.lp_pos_policy = lp_pos_policy;
        pair.lp_pos_ref = lp_pos_ref;
        pair.lp_neg_policy = lp_neg_policy;
        pair.lp_neg_ref = lp_neg_ref;
        pair.alpha = alpha;
        pair.beta = beta;
        if (out_loss != nullptr) *out_loss = hs_dpo_loss(pair);
        if (out_d_lp_pos_policy != nullptr || out_d_lp_neg_policy != nullptr) {
            PairGrads g = hs_dpo_grads(pair);
            if (out_d_lp_pos_policy != nullptr) *out_d_lp_pos_policy = g.d_lp_pos_policy;
            if (out_d_lp_neg_policy != nullptr) *out_d_lp_neg_policy = g.d_lp_neg_policy;
        }
    });
}

gf_status gf_sft_nll(const double* token_logprobs, size_t n, double* out_nll) {
    return guarded(nullptr, [&] {
        if (token_logprobs == nullptr && n > 0)
            throw Error(ErrorKind::InvalidArgument, "token_logprobs must be non-null");
        SftLogProbs seq;
        seq.token_logprobs.assign(token_logprobs, token_logprobs + n);
        double v = sft_nll(seq);
        if (out_nll != nullptr) *out_nll = v;
    });
}

gf_status gf_mixed_loss(double lp_pos_policy, double lp_pos_ref, double lp_neg_policy,
                        double lp_neg_ref, double alpha, double beta,
                        const double* chosen_token_logprobs, size_t n_tokens,
                        double lambda_sft, double* out_loss) {
    return guarded(nullptr, [&] {
        if (chosen_token_logprobs == nullptr && n_tokens > 0)
            throw Error(ErrorKind::InvalidArgument, "chosen_token_logprobs must be non-null");
        PairLogProbs pair;
        pair.lp_pos_policy = lp_pos_policy;
        pair.lp_pos_ref = lp_pos_ref;
        pair.lp_neg_policy = lp_neg_policy;
        pair.lp_neg_ref = lp_neg_ref;
        pair.alpha = alpha;
        pair.beta = beta;
        SftLogProbs seq;
        seq.token_logprobs.assign(chosen_token_logprobs, chosen_token_logprobs + n_tokens);
        double v = mixed_loss(pair, seq, lambda_sft);
        if (out_loss != nullptr) *out_loss = v;
    });
}

gf_status gf_f1(int64_t tp, int64_t fp, int64_t tn, int64_t fn, double* out_precision,
                double* out_recall, double* out_f1) {
    return guarded(nullptr, [&] {
        Confusion conf;
        conf.tp = tp;
        conf.fp = fp;
        conf.tn = tn;
        conf.fn = fn;
        PrecisionRecallF1 prf = f1_score(conf);
        if (out_precision != nullptr) *out_precision = prf.precision;
        if (out_recall != nullptr) *out_recall = prf.recall;
        if (out_f1 != nullptr) *out_f1 = prf.f1;
    });
}

gf_status gf_weighted_average(const int64_t* ns, const double* scores, size_t n,
                              double* out_average) {
    return guarded(nullptr, [&] {
        if ((ns == nullptr || scores == nullptr) && n > 0)
            throw Error(ErrorKind::InvalidArgument, "ns and scores must be non-null");
        std::vector<std::pair<int64_t, double>> items;
        items.reserve(n);
        for (size_t i = 0; i < n; ++i) items.emplace_back(ns[i], scores[i]);
        double v = weighted_average(items);
        if (out_average != nullptr) *out_average = v;
    });
}

gf_status gf_auprc(const double* scores, const int* positives, size_t n, double* out_auprc) {
    return guarded(nullptr, [&] {
        if ((scores == nullptr || positives == nullptr) && n > 0)
            throw Error(ErrorKind::InvalidArgument, "scores and positives must be non-null");
        std::vector<ScoredItem> items;
        items.reserve(n);
        for (size_t i = 0; i < n; ++i) items.push_back({scores[i], positives[i] != 0});
        double v = auprc(items);
        if (out_auprc != nullptr) *out_auprc = v;
    });
}

gf_status gf_parse_output(const char* text, const char* finish_reason, char** outcome_json) {
    return guarded(nullptr, [&] {
        if (text == nullptr) throw Error(ErrorKind::InvalidArgument, "text must be non-null");
        RawModelOutput raw;
        raw.text = text;
        raw.finish_reason =
            finish_reason == nullptr ? FinishReason::Stop : finish_reason_from_name(finish_reason);
        ParseOutcome outcome = parse_output(raw);
        json out;
        switch (outcome.kind) {
        case OutcomeKind::Verdict: {
            out["kind"] = "verdict";
            const Verdict& v = *outcome.verdict;
            json labels = json::object();
            for (TaskKind task : kAllTasks) {
                Label label = v.label_for(task);
                if (label != Label::Absent) labels[task_name(task)] = label_name(label);
            }
            out["labels"] = std::move(labels);
            json steps = json::array();
            for (const auto& s : v.trace.steps()) steps.push_back(s);
            out["steps"] = std::move(steps);
            break;
        }
        case OutcomeKind::Rejection:
            out["kind"] = "rejection";
            break;
        case OutcomeKind::ParseFailure:
            out["kind"] = "parse_failure";
            out["reason"] = outcome.failure_reason;
            break;
        }
        if (outcome_json != nullptr) {
            *outcome_json = dup_string(out.dump(2) + "\n");
            if (*outcome_json == nullptr) throw std::bad_alloc();
        }
    });
}

} // extern "C"
