/* C interface to the guardforge pipeline library.
 *
 * The pipeline handle is opaque; every call that can fail returns a
 * gf_status and leaves a human-readable message readable through
 * gf_pipeline_last_error until the next call on the same handle. Strings
 * returned through out-parameters are heap-allocated and must be released
 * with gf_string_free. A handle must not be used from two threads at once;
 * the stateless kernel functions below are thread-safe.
 */
#ifndef GUARDFORGE_H
#define GUARDFORGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gf_status {
    GF_OK = 0,
    /* Bad arguments or options. */
    GF_ERR_INVALID_ARGUMENT = 1,
    /* Input data failed validation (labels, schemas, consistency checks). */
    GF_ERR_VALIDATION = 2,
    /* File system failure. */
    GF_ERR_IO = 3,
    /* Endpoint unreachable, credentials rejected, or request timed out. */
    GF_ERR_ENDPOINT = 4,
    GF_ERR_INTERNAL = 5
} gf_status;

typedef struct gf_pipeline gf_pipeline;

const char* gf_version(void);

gf_pipeline* gf_pipeline_new(void);
void gf_pipeline_free(gf_pipeline* p);

/* Message for the most recent failing call on this handle; empty string if
 * the last call succeeded. Owned by the handle, do not free. */
const char* gf_pipeline_last_error(const gf_pipeline* p);

/* Runs one pipeline stage: "synth", "mine", "pairs", "eval", "stats",
 * "losscheck", or "subsample". options_json is a JSON object of stage
 * options; on success *summary_json receives the stage's JSON summary. */
gf_status gf_pipeline_run(gf_pipeline* p, const char* stage, const char* options_json,
                          char** summary_json);

void gf_string_free(char* s);

/* ---- stateless kernels ---- */

/* Preference weight from the correct/incorrect split of k sampled outputs. */
gf_status gf_alpha_weight(int k_corr, int k_incorr, double gamma, double* out_alpha);

/* Weighted preference loss over one pair of sequence log-probabilities,
 * with its partial derivatives with respect to the two policy terms. Any
 * out-pointer may be NULL. */
gf_status gf_hs_dpo_loss(double lp_pos_policy, double lp_pos_ref, double lp_neg_policy,
                         double lp_neg_ref, double alpha, double beta, double* out_loss,
                         double* out_d_lp_pos_policy, double* out_d_lp_neg_policy);

/* Negative log-likelihood of a token log-probability sequence. */
gf_status gf_sft_nll(const double* token_logprobs, size_t n, double* out_nll);

/* Preference loss plus lambda_sft times the NLL of the chosen sequence. */
gf_status gf_mixed_loss(double lp_pos_policy, double lp_pos_ref, double lp_neg_policy,
                        double lp_neg_ref, double alpha, double beta,
                        const double* chosen_token_logprobs, size_t n_tokens,
                        double lambda_sft, double* out_loss);

/* Precision, recall, and F1 from confusion counts. Any out-pointer may be
 * NULL. Zero denominators yield 0. */
gf_status gf_f1(int64_t tp, int64_t fp, int64_t tn, int64_t fn, double* out_precision,
                double* out_recall, double* out_f1);

/* Sample-weighted mean: sum(n*score)/sum(n). */
gf_status gf_weighted_average(const int64_t* ns, const double* scores, size_t n,
                              double* out_average);

/* Area under the precision-recall curve; positives[i] is 0 or 1. */
gf_status gf_auprc(const double* scores, const int* positives, size_t n, double* out_auprc);

/* Parses raw model output text. finish_reason is "stop", "length",
 * "content_filter", or "error" (NULL means "stop"). *outcome_json receives
 * {"kind": "verdict"|"rejection"|"parse_failure", ...} with labels and steps
 * for verdicts and a reason for parse failures. */
gf_status gf_parse_output(const char* text, const char* finish_reason, char** outcome_json);

#ifdef __cplusplus
}
#endif

#endif /* GUARDFORGE_H */
