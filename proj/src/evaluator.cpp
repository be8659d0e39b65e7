#include "itemsim/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace itemsim {

Scorer make_fism_scorer(const FismParams& params, const Dataset& dataset) {
    return [&params, &dataset](UserId user, ItemId item) {
        return fism_predict(params, dataset.histories[static_cast<size_t>(user)], item);
    };
}

Scorer make_nais_scorer(const NaisParams& params, const Dataset& dataset) {
    return [&params, &dataset](UserId user, ItemId item) {
        return nais_predict(params, dataset.histories[static_cast<size_t>(user)], item).score;
    };
}

std::int32_t rank_position(std::span<const std::pair<ItemId, double>> scores, ItemId positive) {
    double positive_score = 0.0;
    bool found = false;
    for (const auto& [item, score] : scores) {
        if (item == positive) {
            positive_score = score;
            found = true;
            break;
        }
    }
    if (!found) {
        throw ConsistencyError("positive item " + std::to_string(positive) +
                               " missing from the candidate list");
    }
    std::int32_t rank = 1;
    for (const auto& [item, score] : scores) {
        if (item == positive) continue;
        if (score > positive_score || (score == positive_score && item < positive)) ++rank;
    }
    return rank;
}

std::int32_t hr_at_k(std::int32_t rank, std::int32_t k) { return rank <= k ? 1 : 0; }

double ndcg_at_k(std::int32_t rank, std::int32_t k) {
    if (rank > k) return 0.0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

namespace {

EvalReport evaluate_impl(const Scorer& scorer, std::span<const ItemId> positives,
                         std::span<const std::vector<ItemId>> negatives, std::int32_t k,
                         std::int32_t threads) {
    const size_t num_users = positives.size();
    EvalReport report;
    report.K = k;
    report.per_user_hr.assign(num_users, 0);
    report.per_user_ndcg.assign(num_users, 0.0);

    const auto eval_user = [&](size_t u) {
        const ItemId positive = positives[u];
        const auto& negs = negatives[u];
        if (negs.empty()) {
            throw ConsistencyError("user " + std::to_string(u) + " has no evaluation negatives");
        }
        std::vector<std::pair<ItemId, double>> scored;
        scored.reserve(negs.size() + 1);
        scored.emplace_back(positive, scorer(static_cast<UserId>(u), positive));
        for (ItemId n : negs) {
            scored.emplace_back(n, scorer(static_cast<UserId>(u), n));
        }
        const std::int32_t rank = rank_position(scored, positive);
        report.per_user_hr[u] = hr_at_k(rank, k);
        report.per_user_ndcg[u] = ndcg_at_k(rank, k);
    };

    if (threads <= 1 || num_users < 2) {
        for (size_t u = 0; u < num_users; ++u) eval_user(u);
    } else {
        const size_t worker_count = std::min<size_t>(static_cast<size_t>(threads), num_users);
        std::vector<std::thread> workers;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::atomic<size_t> next{0};
        for (size_t w = 0; w < worker_count; ++w) {
            workers.emplace_back([&] {
                while (true) {
                    const size_t u = next.fetch_add(1);
                    if (u >= num_users) return;
                    try {
                        eval_user(u);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : workers) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    // fixed reduction order: ascending user id
    KahanSum hr_sum;
    KahanSum ndcg_sum;
    for (size_t u = 0; u < num_users; ++u) {
        hr_sum.add(static_cast<double>(report.per_user_hr[u]));
        ndcg_sum.add(report.per_user_ndcg[u]);
    }
    if (num_users > 0) {
        report.mean_hr = hr_sum.value() / static_cast<double>(num_users);
        report.mean_ndcg = ndcg_sum.value() / static_cast<double>(num_users);
    }
    return report;
}

}  // namespace

EvalReport evaluate(const Scorer& scorer, const Dataset& dataset, std::int32_t k,
                    std::int32_t threads) {
    if (dataset.eval_negatives.empty()) {
        throw ConsistencyError("dataset has no evaluation negatives");
    }
    return evaluate_impl(scorer, dataset.test_items, dataset.eval_negatives, k, threads);
}

EvalReport evaluate_pairs(const Scorer& scorer, std::span<const ItemId> positives,
                          std::span<const std::vector<ItemId>> negatives, std::int32_t k,
                          std::int32_t threads) {
    if (positives.size() != negatives.size()) {
        throw ConfigError("positives and negatives disagree on user count");
    }
    return evaluate_impl(scorer, positives, negatives, k, threads);
}

std::vector<std::vector<ItemId>> sample_eval_negatives(const Dataset& dataset,
                                                       std::span<const ItemId> positives,
                                                       std::int32_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<ItemId>> out(static_cast<size_t>(dataset.num_users));
    for (UserId u = 0; u < dataset.num_users; ++u) {
        auto& negs = out[static_cast<size_t>(u)];
        negs.reserve(static_cast<size_t>(count));
        const ItemId positive = positives.empty() ? -1 : positives[static_cast<size_t>(u)];
        const ItemId test = dataset.test_items[static_cast<size_t>(u)];
        while (negs.size() < static_cast<size_t>(count)) {
            const auto cand = static_cast<ItemId>(
                rng.uniform_below(static_cast<std::uint64_t>(dataset.num_items)));
            if (cand == positive || cand == test || dataset.in_history(u, cand)) continue;
            negs.push_back(cand);
        }
    }
    return out;
}

// --- paired t-test ---------------------------------------------------------

namespace {

// continued fraction for the incomplete beta (Lentz)
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double result = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        result *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        result *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return result;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double paired_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("paired t-test needs equal-length samples");
    const size_t n = a.size();
    if (n < 2) throw ConfigError("paired t-test needs at least 2 pairs");

    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += b[i] - a[i];
    mean /= static_cast<double>(n);

    double ss = 0.0;
    bool any_nonzero = false;
    for (size_t i = 0; i < n; ++i) {
        const double d = b[i] - a[i];
        if (d != 0.0) any_nonzero = true;
        ss += (d - mean) * (d - mean);
    }
    if (!any_nonzero) {
        throw ConsistencyError("all paired differences are zero; t-test undefined");
    }
    const double var = ss / static_cast<double>(n - 1);
    if (var == 0.0) return 0.0;  // identical nonzero shift on every pair

    const double t = mean / std::sqrt(var / static_cast<double>(n));
    const double df = static_cast<double>(n - 1);
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

// --- attention interpretability --------------------------------------------

ExplainResult explain(const NaisParams& params, const Dataset& dataset, UserId user,
                      ItemId target) {
    if (user < 0 || user >= dataset.num_users) {
        throw ConfigError("user id " + std::to_string(user) + " out of range");
    }
    const auto& history = dataset.histories[static_cast<size_t>(user)];
    const auto weights = attention_weights(params, history, target);  // throws when empty

    KahanSum total;
    for (double w : weights.weights) total.add(w);

    ExplainResult out;
    out.weights.reserve(weights.items.size());
    for (size_t i = 0; i < weights.items.size(); ++i) {
        out.weights.emplace_back(weights.items[i], weights.weights[i] / total.value());
    }
    out.probability = sigmoid(nais_predict(params, history, target).score);
    return out;
}

std::vector<AttentionStat> attention_stats(const NaisParams& params, const Dataset& dataset) {
    std::vector<AttentionStat> stats;
    stats.reserve(static_cast<size_t>(dataset.num_users));
    for (UserId u = 0; u < dataset.num_users; ++u) {
        const ItemId target = dataset.test_items[static_cast<size_t>(u)];
        const auto explained = explain(params, dataset, u, target);
        const size_t n = explained.weights.size();
        const double mean = 1.0 / static_cast<double>(n);  // L1-normalized weights
        double var = 0.0;
        for (const auto& [item, w] : explained.weights) {
            var += (w - mean) * (w - mean);
        }
        var /= static_cast<double>(n);
        stats.push_back({u, target, mean, var});
    }
    return stats;
}

}  // namespace itemsim
