#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "itemsim/dataio.hpp"
#include "itemsim/model.hpp"

namespace itemsim {

using Scorer = std::function<double(UserId, ItemId)>;

// Scorers view their arguments; the params/dataset must outlive the scorer.
Scorer make_fism_scorer(const FismParams& params, const Dataset& dataset);
Scorer make_nais_scorer(const NaisParams& params, const Dataset& dataset);

struct EvalReport {
    std::int32_t K = 10;
    std::vector<std::int32_t> per_user_hr;  // 0/1
    std::vector<double> per_user_ndcg;
    double mean_hr = 0.0;
    double mean_ndcg = 0.0;
};

/// 1-based rank of `positive` among the scored candidates. Greater score
/// ranks first; ties are broken by the smaller item id.
std::int32_t rank_position(std::span<const std::pair<ItemId, double>> scores, ItemId positive);

std::int32_t hr_at_k(std::int32_t rank, std::int32_t k);
double ndcg_at_k(std::int32_t rank, std::int32_t k);  // 1/log2(rank+1), single positive

/// Leave-one-out protocol: per user, rank the held-out item against its 99
/// stored negatives and average HR@K / NDCG@K over users. `threads` > 1 fans
/// users out concurrently; the reduction order is fixed by user id.
EvalReport evaluate(const Scorer& scorer, const Dataset& dataset, std::int32_t k,
                    std::int32_t threads = 1);

/// Same protocol against explicit positives/negatives (validation holdouts).
EvalReport evaluate_pairs(const Scorer& scorer, std::span<const ItemId> positives,
                          std::span<const std::vector<ItemId>> negatives, std::int32_t k,
                          std::int32_t threads = 1);

/// Per-user 99 sampled negatives avoiding history, the held-out test item
/// and the given positives.
std::vector<std::vector<ItemId>> sample_eval_negatives(const Dataset& dataset,
                                                       std::span<const ItemId> positives,
                                                       std::int32_t count, std::uint64_t seed);

/// Two-sided one-sample paired t-test on b - a; returns the p-value.
double paired_ttest(std::span<const double> a, std::span<const double> b);

struct ExplainResult {
    std::vector<std::pair<ItemId, double>> weights;  // L1-normalized, sums to 1
    double probability = 0.0;                        // sigmoid of the raw score
};

ExplainResult explain(const NaisParams& params, const Dataset& dataset, UserId user,
                      ItemId target);

struct AttentionStat {
    UserId user;
    ItemId item;
    double mean;
    double variance;
};

/// Mean/variance of the L1-normalized attention weights for every test
/// prediction; uniform weights (e.g. an untrained net) give variance 0.
std::vector<AttentionStat> attention_stats(const NaisParams& params, const Dataset& dataset);

// regularized incomplete beta I_x(a, b), exposed for the t-test and its tests
double incomplete_beta(double a, double b, double x);

}  // namespace itemsim
