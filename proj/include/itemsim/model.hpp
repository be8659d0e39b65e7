#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "itemsim/common.hpp"

namespace itemsim {

/// Item-embedding model scoring a target against a user's history with
/// uniform weights 1/|H|^alpha. P holds target-role rows, Q history-role rows.
struct FismParams {
    std::int32_t num_items = 0;
    std::int32_t k = 0;
    double alpha = 0.0;
    std::vector<double> P;  // num_items x k, row-major
    std::vector<double> Q;

    std::span<const double> p(ItemId i) const {
        return {P.data() + static_cast<size_t>(i) * static_cast<size_t>(k),
                static_cast<size_t>(k)};
    }
    std::span<const double> q(ItemId j) const {
        return {Q.data() + static_cast<size_t>(j) * static_cast<size_t>(k),
                static_cast<size_t>(k)};
    }
};

enum class AttentionVariant { concat, prod };

std::string to_string(AttentionVariant v);

/// FISM embeddings plus a one-hidden-layer attention net (W, b, h) whose
/// softmax denominator is raised to the smoothing exponent beta in [0, 1].
struct NaisParams {
    std::int32_t num_items = 0;
    std::int32_t k = 0;          // embedding size
    std::int32_t a = 0;          // attention factor (hidden width)
    AttentionVariant variant = AttentionVariant::prod;
    double beta = 0.5;
    std::vector<double> P;  // num_items x k
    std::vector<double> Q;
    std::vector<double> W;  // a x input_dim
    std::vector<double> b;  // a
    std::vector<double> h;  // a

    std::int32_t input_dim() const { return variant == AttentionVariant::concat ? 2 * k : k; }

    std::span<const double> p(ItemId i) const {
        return {P.data() + static_cast<size_t>(i) * static_cast<size_t>(k),
                static_cast<size_t>(k)};
    }
    std::span<const double> q(ItemId j) const {
        return {Q.data() + static_cast<size_t>(j) * static_cast<size_t>(k),
                static_cast<size_t>(k)};
    }

    void check_shapes() const;  // throws ConfigError on any mismatch
};

/// Per-item attention over an effective history (target excluded):
/// weights[j] = exp(logits[j]) / (sum_j' exp(logits[j']))^beta.
struct AttentionWeights {
    std::vector<ItemId> items;
    std::vector<double> logits;
    std::vector<double> weights;
};

/// Cached pieces of a NAIS prediction for one (user, candidate) pair.
/// S and D are stored shifted by the running max logit m:
///   S = sum_j exp(f_j - m) * (p_i . q_j),   D = sum_j exp(f_j - m),
/// so the score is recoverable as S * exp((1-beta)*m) / D^beta without
/// ever exponentiating an unshifted logit.
struct PredictionCache {
    UserId user = -1;
    ItemId item = -1;
    double S = 0.0;
    double D = 0.0;
    double m = 0.0;
    std::int32_t n = 0;  // history items folded in
};

// Counts evaluations of the attention MLP; the online-refresh contract is
// exactly one evaluation per new interaction.
extern std::atomic<std::uint64_t> attention_logit_evals;

double fism_predict(const FismParams& params, std::span<const ItemId> history, ItemId target);

/// f(p_i, q_j): h . ReLU(W x + b) with x = [p_i; q_j] (concat) or p_i*q_j elementwise (prod).
double attention_logit(const NaisParams& params, ItemId target, ItemId j);

/// Smoothed-softmax weights over history \ {target}. Throws on an empty
/// effective history; nais_predict handles that case by returning 0.
AttentionWeights attention_weights(const NaisParams& params, std::span<const ItemId> history,
                                   ItemId target);

struct NaisPrediction {
    double score = 0.0;
    PredictionCache cache;
};

NaisPrediction nais_predict(const NaisParams& params, std::span<const ItemId> history,
                            ItemId target);

/// Score implied by a cache: S * exp((1-beta)*m) / D^beta, 0 when empty.
double cache_score(const NaisParams& params, const PredictionCache& cache);

/// Fold one new interaction into the cache: one attention-logit evaluation,
/// one k-length dot product, and a re-shift when the new logit exceeds m.
/// Returns the refreshed score.
double refresh_prediction(const NaisParams& params, PredictionCache& cache, ItemId new_item);

// --- shared forward pass -------------------------------------------------
// Buffers for one NAIS forward over an effective history; reused across
// instances by the trainer and the gradient module.
struct NaisForward {
    std::vector<ItemId> items;    // effective history
    std::vector<double> logits;   // f_j
    std::vector<double> relu;     // n x a hidden activations
    std::vector<double> dots;     // p_i . q_j
    double max_logit = 0.0;
    double exp_sum = 0.0;  // sum_j exp(f_j - max_logit)
    double lse = 0.0;      // log sum_j exp(f_j)
    double score = 0.0;

    double weight(size_t idx, double beta) const;   // exp(f_j - beta*lse)
    double softmax(size_t idx) const;               // exp(f_j - lse)
};

void nais_forward(const NaisParams& params, std::span<const ItemId> history, ItemId target,
                  NaisForward& out);

}  // namespace itemsim
