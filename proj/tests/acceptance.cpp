// Acceptance suite: one check per numbered criterion, one printed line each.
//
//   acceptance [--criterion N] [--data-dir DIR] [--workdir DIR] [--full]
//
// Exit codes: 0 all selected criteria passed, 1 a criterion failed,
// 77 a criterion was skipped (dataset files not available).
//
// Criteria 5-9 need the processed MovieLens/Pinterest files (ml-1m.train.rating,
// ml-1m.test.rating, ml-1m.test.negative, and the pinterest-20.* trio). The
// directory is taken from --data-dir, $ITEMSIM_DATA_DIR, or ./data. Without
// these files the data-bound criteria report SKIP rather than a fake PASS.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "itemsim/baselines.hpp"
#include "itemsim/dataio.hpp"
#include "itemsim/evaluator.hpp"
#include "itemsim/gradients.hpp"
#include "itemsim/model_store.hpp"
#include "itemsim/trainer.hpp"

using namespace itemsim;
using Clock = std::chrono::steady_clock;

namespace {

enum class Outcome { pass, fail, skip };

struct Context {
    std::optional<std::string> data_dir;  // holds the NCF-processed files
    std::string workdir;                  // caches converged models across criteria
    bool full_scale = false;              // run criterion 8 on the full ML-1M
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(precision) << v;
    return ss.str();
}

// ---------------------------------------------------------------- helpers --

NaisParams random_nais(std::int32_t num_items, std::int32_t k, std::int32_t a,
                       AttentionVariant variant, double beta, std::uint64_t seed, double scale) {
    NaisParams p;
    p.num_items = num_items;
    p.k = k;
    p.a = a;
    p.variant = variant;
    p.beta = beta;
    Rng rng(seed);
    p.P.resize(static_cast<size_t>(num_items) * static_cast<size_t>(k));
    p.Q.resize(p.P.size());
    p.W.resize(static_cast<size_t>(a) * static_cast<size_t>(p.input_dim()));
    p.b.resize(static_cast<size_t>(a));
    p.h.resize(static_cast<size_t>(a));
    for (auto& v : p.P) v = rng.normal(0.0, scale);
    for (auto& v : p.Q) v = rng.normal(0.0, scale);
    for (auto& v : p.W) v = rng.normal(0.0, scale);
    for (auto& v : p.b) v = rng.normal(0.0, scale);
    for (auto& v : p.h) v = rng.normal(0.0, scale);
    return p;
}

FismParams random_fism(std::int32_t num_items, std::int32_t k, double alpha, std::uint64_t seed,
                       double scale) {
    FismParams p;
    p.num_items = num_items;
    p.k = k;
    p.alpha = alpha;
    Rng rng(seed);
    p.P.resize(static_cast<size_t>(num_items) * static_cast<size_t>(k));
    p.Q.resize(p.P.size());
    for (auto& v : p.P) v = rng.normal(0.0, scale);
    for (auto& v : p.Q) v = rng.normal(0.0, scale);
    return p;
}

std::vector<ItemId> random_history(Rng& rng, std::int32_t num_items, size_t len) {
    std::vector<ItemId> history;
    while (history.size() < len) {
        const auto item = static_cast<ItemId>(rng.uniform_below(static_cast<std::uint64_t>(num_items)));
        if (std::find(history.begin(), history.end(), item) == history.end()) {
            history.push_back(item);
        }
    }
    return history;
}

Dataset one_user_dataset(std::int32_t num_items, std::vector<ItemId> history) {
    Dataset ds;
    ds.num_users = 1;
    ds.num_items = num_items;
    ds.histories.push_back(std::move(history));
    ds.test_items.push_back(-1);
    ds.build_membership_index();
    return ds;
}

// Synthetic clustered dataset (criteria 10 and 11 are dataset-free; they run
// on this seeded generator).
Dataset synthetic_dataset(std::int32_t num_users, std::int32_t num_items, int min_hist,
                          int max_hist, std::uint64_t seed, int groups = 3) {
    Rng rng(seed);
    Dataset ds;
    ds.num_users = num_users;
    ds.num_items = num_items;
    ds.histories.resize(static_cast<size_t>(num_users));
    ds.test_items.resize(static_cast<size_t>(num_users));
    ds.eval_negatives.resize(static_cast<size_t>(num_users));
    const std::int32_t block = num_items / groups;
    for (UserId u = 0; u < num_users; ++u) {
        const std::int32_t g = u % groups;
        const std::int32_t lo = g * block;
        const std::int32_t hi = (g + 1 == groups) ? num_items : lo + block;
        const auto draw = [&]() -> ItemId {
            if (rng.next_double() < 0.85) {
                return static_cast<ItemId>(lo + rng.uniform_below(static_cast<std::uint64_t>(hi - lo)));
            }
            return static_cast<ItemId>(rng.uniform_below(static_cast<std::uint64_t>(num_items)));
        };
        auto& history = ds.histories[static_cast<size_t>(u)];
        const size_t want = static_cast<size_t>(
            min_hist + rng.uniform_below(static_cast<std::uint64_t>(max_hist - min_hist + 1)));
        std::vector<bool> seen(static_cast<size_t>(num_items), false);
        while (history.size() < want) {
            const ItemId item = draw();
            if (!seen[static_cast<size_t>(item)]) {
                seen[static_cast<size_t>(item)] = true;
                history.push_back(item);
            }
        }
        ItemId test = draw();
        while (seen[static_cast<size_t>(test)]) test = draw();
        ds.test_items[static_cast<size_t>(u)] = test;
        seen[static_cast<size_t>(test)] = true;
        auto& negs = ds.eval_negatives[static_cast<size_t>(u)];
        while (negs.size() < 99) {
            const auto cand =
                static_cast<ItemId>(rng.uniform_below(static_cast<std::uint64_t>(num_items)));
            if (!seen[static_cast<size_t>(cand)]) {
                seen[static_cast<size_t>(cand)] = true;
                negs.push_back(cand);
            }
        }
    }
    ds.build_membership_index();
    ds.validate();
    return ds;
}

struct NcfPaths {
    std::string train, test, negatives;
    bool exists() const {
        return std::filesystem::exists(train) && std::filesystem::exists(test) &&
               std::filesystem::exists(negatives);
    }
};

NcfPaths dataset_paths(const std::string& dir, const std::string& prefix) {
    return {dir + "/" + prefix + ".train.rating", dir + "/" + prefix + ".test.rating",
            dir + "/" + prefix + ".test.negative"};
}

/// Fixed-seed user subsample with dense re-numbered users; items unchanged.
Dataset subsample_users(const Dataset& full, double fraction, std::uint64_t seed) {
    std::vector<UserId> users(static_cast<size_t>(full.num_users));
    for (UserId u = 0; u < full.num_users; ++u) users[static_cast<size_t>(u)] = u;
    Rng rng(seed);
    for (size_t i = users.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_below(i));
        std::swap(users[i - 1], users[j]);
    }
    const size_t keep = std::max<size_t>(1, static_cast<size_t>(fraction * users.size()));
    users.resize(keep);
    std::sort(users.begin(), users.end());

    Dataset out;
    out.num_users = static_cast<std::int32_t>(keep);
    out.num_items = full.num_items;
    for (UserId u : users) {
        out.histories.push_back(full.histories[static_cast<size_t>(u)]);
        out.test_items.push_back(full.test_items[static_cast<size_t>(u)]);
        out.eval_negatives.push_back(full.eval_negatives[static_cast<size_t>(u)]);
    }
    out.build_membership_index();
    return out;
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[values.size() / 2];
}

// brute-force ranking oracle: full sort, score desc then id asc
std::int32_t oracle_rank(std::vector<std::pair<ItemId, double>> scored, ItemId positive) {
    std::stable_sort(scored.begin(), scored.end(), [](const auto& l, const auto& r) {
        if (l.second != r.second) return l.second > r.second;
        return l.first < r.first;
    });
    for (size_t i = 0; i < scored.size(); ++i) {
        if (scored[i].first == positive) return static_cast<std::int32_t>(i + 1);
    }
    return -1;
}

// ------------------------------------------------------------- criterion 1 --

// finite-difference machinery (kept local to the suite; independent of the
// gradient module's internals)
template <typename Obj>
double central_difference(double* coordinate, const Obj& objective, double step) {
    const double original = *coordinate;
    *coordinate = original + step;
    const double up = objective();
    *coordinate = original - step;
    const double down = objective();
    *coordinate = original;
    return (up - down) / (2.0 * step);
}

bool nais_has_kink(const NaisParams& p, const Dataset& ds, const TrainInstance& ins) {
    const auto k = static_cast<size_t>(p.k);
    const auto a = static_cast<size_t>(p.a);
    const auto d = static_cast<size_t>(p.input_dim());
    for (ItemId j : ds.histories[0]) {
        if (j == ins.item) continue;
        for (size_t r = 0; r < a; ++r) {
            double z = p.b[r];
            for (size_t c = 0; c < k; ++c) {
                if (p.variant == AttentionVariant::concat) {
                    z += p.W[r * d + c] * p.P[static_cast<size_t>(ins.item) * k + c] +
                         p.W[r * d + k + c] * p.Q[static_cast<size_t>(j) * k + c];
                } else {
                    z += p.W[r * d + c] * p.P[static_cast<size_t>(ins.item) * k + c] *
                         p.Q[static_cast<size_t>(j) * k + c];
                }
            }
            if (std::abs(z) < 1e-6) return true;
        }
    }
    return false;
}

Outcome criterion_1(const Context&) {
    const auto start = Clock::now();
    constexpr double kStep = 1e-5;
    constexpr double kTol = 1e-4;
    const std::vector<double> betas{0.0, 0.3, 0.5, 1.0};
    double worst = 0.0;

    // FISM: 20 randomized configurations
    for (std::uint64_t seed = 1, done = 0; done < 20; ++seed) {
        Rng rng(seed * 2833);
        const auto k = static_cast<std::int32_t>(1 + rng.uniform_below(8));
        const auto hist = random_history(rng, 12, rng.uniform_below(7));
        auto params = random_fism(12, k, betas[seed % 4] <= 1.0 ? 0.5 * (seed % 3) : 0.0, seed, 0.6);
        const TrainInstance ins{0, static_cast<ItemId>(rng.uniform_below(12)),
                                static_cast<std::int32_t>(seed % 2)};
        const auto ds = one_user_dataset(12, hist);
        const double lambda = seed % 2 == 0 ? 0.0 : 0.02;
        LossConfig cfg;
        cfg.lambda = lambda;
        const auto grad = grad_fism(ins, params, ds, cfg);

        const auto objective = [&]() {
            const double score = fism_predict(params, ds.histories[0], ins.item);
            double obj = instance_loss(score, ins.label);
            const auto kk = static_cast<size_t>(params.k);
            for (size_t c = 0; c < kk; ++c) {
                obj += lambda * params.P[static_cast<size_t>(ins.item) * kk + c] *
                       params.P[static_cast<size_t>(ins.item) * kk + c];
            }
            for (ItemId j : ds.histories[0]) {
                if (j == ins.item) continue;
                for (size_t c = 0; c < kk; ++c) {
                    obj += lambda * params.Q[static_cast<size_t>(j) * kk + c] *
                           params.Q[static_cast<size_t>(j) * kk + c];
                }
            }
            return obj;
        };

        const auto kk = static_cast<size_t>(params.k);
        for (size_t c = 0; c < kk; ++c) {
            const double fd = central_difference(
                &params.P[static_cast<size_t>(ins.item) * kk + c], objective, kStep);
            worst = std::max(worst, std::abs(grad.grads.d_target[c] - fd) /
                                        std::max(1.0, std::abs(grad.grads.d_target[c])));
        }
        for (size_t idx = 0; idx < grad.grads.history_ids.size(); ++idx) {
            for (size_t c = 0; c < kk; ++c) {
                const double analytic = grad.grads.d_history[idx * kk + c];
                const double fd = central_difference(
                    &params.Q[static_cast<size_t>(grad.grads.history_ids[idx]) * kk + c],
                    objective, kStep);
                worst = std::max(worst, std::abs(analytic - fd) / std::max(1.0, std::abs(analytic)));
            }
        }
        ++done;
    }

    // NAIS: 20 randomized configurations per attention variant
    for (const auto variant : {AttentionVariant::prod, AttentionVariant::concat}) {
        for (std::uint64_t seed = 1, done = 0; done < 20; ++seed) {
            Rng rng(seed * 6101 + (variant == AttentionVariant::concat ? 1 : 0));
            const auto k = static_cast<std::int32_t>(1 + rng.uniform_below(8));
            const auto a = static_cast<std::int32_t>(1 + rng.uniform_below(8));
            const double beta = betas[seed % 4];
            const double lambda = seed % 3 == 0 ? 0.02 : 0.0;
            auto params = random_nais(12, k, a, variant, beta, seed, 0.5);
            const auto ds = one_user_dataset(12, random_history(rng, 12, rng.uniform_below(7)));
            const TrainInstance ins{0, static_cast<ItemId>(rng.uniform_below(12)),
                                    static_cast<std::int32_t>(seed % 2)};
            if (nais_has_kink(params, ds, ins)) continue;

            LossConfig cfg;
            cfg.lambda = lambda;
            const auto grad = grad_nais(ins, params, ds, cfg);

            const auto objective = [&]() {
                const double score = nais_predict(params, ds.histories[0], ins.item).score;
                double obj = instance_loss(score, ins.label);
                if (lambda == 0.0) return obj;
                const auto kk = static_cast<size_t>(params.k);
                for (size_t c = 0; c < kk; ++c) {
                    const double v = params.P[static_cast<size_t>(ins.item) * kk + c];
                    obj += lambda * v * v;
                }
                bool any = false;
                for (ItemId j : ds.histories[0]) {
                    if (j == ins.item) continue;
                    any = true;
                    for (size_t c = 0; c < kk; ++c) {
                        const double v = params.Q[static_cast<size_t>(j) * kk + c];
                        obj += lambda * v * v;
                    }
                }
                if (any) {
                    for (double v : params.W) obj += lambda * v * v;
                    for (double v : params.b) obj += lambda * v * v;
                    for (double v : params.h) obj += lambda * v * v;
                }
                return obj;
            };

            const auto kk = static_cast<size_t>(params.k);
            const auto check = [&](double* coordinate, double analytic) {
                const double fd = central_difference(coordinate, objective, kStep);
                worst = std::max(worst, std::abs(analytic - fd) / std::max(1.0, std::abs(analytic)));
            };
            for (size_t c = 0; c < kk; ++c) {
                check(&params.P[static_cast<size_t>(ins.item) * kk + c], grad.grads.d_target[c]);
            }
            for (size_t idx = 0; idx < grad.grads.history_ids.size(); ++idx) {
                for (size_t c = 0; c < kk; ++c) {
                    check(&params.Q[static_cast<size_t>(grad.grads.history_ids[idx]) * kk + c],
                          grad.grads.d_history[idx * kk + c]);
                }
            }
            for (size_t i = 0; i < grad.grads.dW.size(); ++i) check(&params.W[i], grad.grads.dW[i]);
            for (size_t i = 0; i < grad.grads.db.size(); ++i) check(&params.b[i], grad.grads.db[i]);
            for (size_t i = 0; i < grad.grads.dh.size(); ++i) check(&params.h[i], grad.grads.dh[i]);
            ++done;
        }
    }

    const double elapsed = seconds_since(start);
    const bool ok = worst < kTol && elapsed < 10.0;
    std::cout << "criterion 1: " << (ok ? "PASS" : "FAIL")
              << " gradient certification, max relative error " << worst << " (tolerance 1e-4), "
              << fmt(elapsed, 2) << "s (limit 10s)\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------- criterion 2 --

Outcome criterion_2(const Context&) {
    const auto start = Clock::now();
    double worst = 0.0;
    Rng rng(424242);
    for (int trial = 0; trial < 1000; ++trial) {
        const double alpha = rng.next_double();
        const auto variant = trial % 2 == 0 ? AttentionVariant::prod : AttentionVariant::concat;
        auto nais = random_nais(25, 4, 3, variant, alpha, 1000 + static_cast<std::uint64_t>(trial), 0.6);
        std::fill(nais.h.begin(), nais.h.end(), 0.0);  // zeroed attention output

        FismParams fism;
        fism.num_items = nais.num_items;
        fism.k = nais.k;
        fism.alpha = alpha;
        fism.P = nais.P;
        fism.Q = nais.Q;

        const auto history = random_history(rng, 25, 1 + rng.uniform_below(10));
        const auto target = static_cast<ItemId>(rng.uniform_below(25));
        const double diff = std::abs(nais_predict(nais, history, target).score -
                                     fism_predict(fism, history, target));
        worst = std::max(worst, diff);
    }
    const double elapsed = seconds_since(start);
    const bool ok = worst < 1e-12 && elapsed < 1.0;
    std::cout << "criterion 2: " << (ok ? "PASS" : "FAIL")
              << " FISM-equivalence at h=0, beta=alpha; max |difference| " << worst
              << " over 1000 instances (tolerance 1e-12), " << fmt(elapsed, 2) << "s (limit 1s)\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------- criterion 3 --

Outcome criterion_3(const Context&) {
    const auto start = Clock::now();
    const std::int32_t num_items = 1100;
    const auto params = random_nais(num_items, 8, 8, AttentionVariant::prod, 0.5, 31337, 0.2);
    const ItemId candidate = 0;

    std::vector<ItemId> history;
    auto pred = nais_predict(params, history, candidate);
    double cached_score = pred.score;
    double worst = 0.0;
    bool logit_count_ok = true;

    for (ItemId item = 1; item <= 1000; ++item) {
        const auto evals_before = attention_logit_evals.load();
        cached_score = refresh_prediction(params, pred.cache, item);
        const auto evals_used = attention_logit_evals.load() - evals_before;
        if (evals_used != 1) logit_count_ok = false;

        history.push_back(item);
        const double scratch = nais_predict(params, history, candidate).score;
        worst = std::max(worst, std::abs(cached_score - scratch));
    }
    const double elapsed = seconds_since(start);
    const bool ok = worst < 1e-8 && logit_count_ok && elapsed < 5.0;
    std::cout << "criterion 3: " << (ok ? "PASS" : "FAIL")
              << " online refresh over 1000 interactions; max |cached - scratch| " << worst
              << " (tolerance 1e-8), one attention-logit eval per refresh: "
              << (logit_count_ok ? "yes" : "NO") << ", " << fmt(elapsed, 2) << "s (limit 5s)\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------- criterion 4 --

Outcome criterion_4(const Context&) {
    const auto start = Clock::now();
    bool ok = true;
    std::int64_t instances = 0;

    const auto verify = [&](const std::vector<std::pair<ItemId, double>>& scored, ItemId positive) {
        const auto expected_rank = oracle_rank(scored, positive);
        const auto rank = rank_position(scored, positive);
        if (rank != expected_rank) ok = false;
        for (std::int32_t k = 1; k <= static_cast<std::int32_t>(scored.size()); ++k) {
            if (hr_at_k(rank, k) != (expected_rank <= k ? 1 : 0)) ok = false;
            const double expected_ndcg =
                expected_rank <= k ? 1.0 / std::log2(static_cast<double>(expected_rank) + 1.0) : 0.0;
            if (std::abs(ndcg_at_k(rank, k) - expected_ndcg) > 1e-15) ok = false;
        }
        ++instances;
    };

    // exhaustive: every permutation of two 5-score multisets (with and
    // without ties), every choice of positive
    for (const auto& base : {std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5},
                             std::vector<double>{0.1, 0.2, 0.2, 0.2, 0.5}}) {
        auto scores = base;
        std::sort(scores.begin(), scores.end());
        do {
            for (size_t positive = 0; positive < scores.size(); ++positive) {
                std::vector<std::pair<ItemId, double>> scored;
                for (size_t i = 0; i < scores.size(); ++i) {
                    scored.emplace_back(static_cast<ItemId>(i * 3), scores[i]);
                }
                verify(scored, static_cast<ItemId>(positive * 3));
            }
        } while (std::next_permutation(scores.begin(), scores.end()));
    }

    // randomized instances with 2..10 candidates, coarse scores to force ties
    Rng rng(2024);
    for (int trial = 0; trial < 2000; ++trial) {
        const size_t n = 2 + rng.uniform_below(9);
        std::vector<std::pair<ItemId, double>> scored;
        for (size_t i = 0; i < n; ++i) {
            scored.emplace_back(static_cast<ItemId>(i),
                                std::floor(rng.next_double() * 5.0) / 5.0);
        }
        verify(scored, static_cast<ItemId>(rng.uniform_below(n)));
    }

    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 5.0;
    std::cout << "criterion 4: " << (ok ? "PASS" : "FAIL")
              << " rank/HR/NDCG match brute-force enumeration on " << instances << " instances, "
              << fmt(elapsed, 2) << "s (limit 5s)\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------- criterion 5 --

Outcome criterion_5(const Context& ctx) {
    if (!ctx.data_dir) {
        std::cout << "criterion 5: SKIP sampling counts (ml-1m/pinterest files not found; set "
                     "ITEMSIM_DATA_DIR)\n";
        return Outcome::skip;
    }
    struct Expectation {
        const char* prefix;
        std::int64_t users, items, interactions, train_instances;
    };
    const std::vector<Expectation> expectations{
        {"ml-1m", 6040, 3706, 1000209, 4970845},
        {"pinterest-20", 55187, 9916, 1500809, 7228110},
    };
    bool ok = true;
    bool any = false;
    std::string detail;
    for (const auto& expected : expectations) {
        const auto paths = dataset_paths(*ctx.data_dir, expected.prefix);
        if (!paths.exists()) {
            detail += std::string(expected.prefix) + " absent; ";
            continue;
        }
        any = true;
        const auto ds = load_ncf_dataset(paths.train, paths.test, paths.negatives);
        const auto instances = sample_negatives(ds, 4, 2024);
        const bool this_ok = ds.num_users == expected.users && ds.num_items == expected.items &&
                             ds.interaction_count() == expected.interactions &&
                             static_cast<std::int64_t>(instances.size()) == expected.train_instances;
        if (!this_ok) ok = false;
        detail += std::string(expected.prefix) + ": U=" + std::to_string(ds.num_users) +
                  " I=" + std::to_string(ds.num_items) +
                  " interactions=" + std::to_string(ds.interaction_count()) +
                  " instances=" + std::to_string(instances.size()) + "; ";
    }
    if (!any) {
        std::cout << "criterion 5: SKIP sampling counts (no dataset files under " << *ctx.data_dir
                  << ")\n";
        return Outcome::skip;
    }
    std::cout << "criterion 5: " << (ok ? "PASS" : "FAIL") << " sampling counts -- " << detail
              << "\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------- criterion 6 --

Outcome criterion_6(const Context& ctx) {
    if (!ctx.data_dir) {
        std::cout << "criterion 6: SKIP baseline reproduction (ml-1m files not found)\n";
        return Outcome::skip;
    }
    const auto paths = dataset_paths(*ctx.data_dir, "ml-1m");
    if (!paths.exists()) {
        std::cout << "criterion 6: SKIP baseline reproduction (ml-1m files not found)\n";
        return Outcome::skip;
    }
    const auto ds = load_ncf_dataset(paths.train, paths.test, paths.negatives);

    const auto scores = pop_scores(ds);
    const auto pop = evaluate(make_pop_scorer(scores), ds, 10, 2);
    const double pop_hr = pop.mean_hr * 100.0, pop_ndcg = pop.mean_ndcg * 100.0;

    const auto sims = itemknn_similarities(ds);
    const auto knn = evaluate(make_itemknn_scorer(sims, ds, 0), ds, 10, 2);
    const double knn_hr = knn.mean_hr * 100.0, knn_ndcg = knn.mean_ndcg * 100.0;

    const bool ok = std::abs(pop_hr - 45.36) <= 1.0 && std::abs(pop_ndcg - 25.43) <= 1.0 &&
                    std::abs(knn_hr - 62.27) <= 2.0 && std::abs(knn_ndcg - 35.87) <= 2.0;
    std::cout << "criterion 6: " << (ok ? "PASS" : "FAIL") << " baselines on ml-1m -- Pop HR@10 "
              << fmt(pop_hr, 2) << " (45.36 +/- 1.0), NDCG@10 " << fmt(pop_ndcg, 2)
              << " (25.43 +/- 1.0); ItemKNN HR@10 " << fmt(knn_hr, 2)
              << " (62.27 +/- 2.0), NDCG@10 " << fmt(knn_ndcg, 2) << " (35.87 +/- 2.0)\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------- criterion 7 --

Outcome criterion_7(const Context& ctx) {
    if (!ctx.data_dir) {
        std::cout << "criterion 7: SKIP FISM end-to-end (ml-1m files not found)\n";
        return Outcome::skip;
    }
    const auto paths = dataset_paths(*ctx.data_dir, "ml-1m");
    if (!paths.exists()) {
        std::cout << "criterion 7: SKIP FISM end-to-end (ml-1m files not found)\n";
        return Outcome::skip;
    }
    const auto ds = load_ncf_dataset(paths.train, paths.test, paths.negatives);

    TrainConfig cfg;
    cfg.model = ModelKind::fism;
    cfg.k = 16;
    cfg.alpha = 0.0;
    cfg.lr = 0.01;
    cfg.neg_ratio = 4;
    cfg.epochs = 64;
    cfg.seed = 2018;
    std::cout << "criterion 7: training FISM on ml-1m (" << cfg.epochs
              << " epochs; expect hours)...\n";
    const auto result = train_fism(ds, cfg, &std::cout);

    std::filesystem::create_directories(ctx.workdir);
    save_model(result.params, ctx.workdir + "/fism-ml1m.model");

    const auto report = evaluate(make_fism_scorer(result.params, ds), ds, 10, 2);
    const double hr = report.mean_hr * 100.0, ndcg = report.mean_ndcg * 100.0;
    const bool ok = std::abs(hr - 66.47) <= 2.0 && std::abs(ndcg - 39.49) <= 2.0;
    std::cout << "criterion 7: " << (ok ? "PASS" : "FAIL") << " FISM on ml-1m -- HR@10 "
              << fmt(hr, 2) << " (66.47 +/- 2.0), NDCG@10 " << fmt(ndcg, 2)
              << " (39.49 +/- 2.0)\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------- criterion 8 --

struct SubsampleModels {
    Dataset dataset;
    FismParams fism;
    EvalReport fism_report;
};

// Shared by criteria 8 and 9: the fixed-seed 10% subsample with a converged
// FISM, cached in the workdir.
SubsampleModels subsample_fism(const Context& ctx, const NcfPaths& paths) {
    SubsampleModels out;
    const auto full = load_ncf_dataset(paths.train, paths.test, paths.negatives);
    out.dataset = subsample_users(full, 0.10, 77);

    const std::string cache = ctx.workdir + "/fism-ml1m-sub10.model";
    TrainConfig cfg;
    cfg.model = ModelKind::fism;
    cfg.k = 16;
    cfg.alpha = 0.0;
    cfg.lr = 0.01;
    cfg.neg_ratio = 4;
    cfg.epochs = 50;
    cfg.seed = 2018;
    if (std::filesystem::exists(cache)) {
        out.fism = load_fism_model(cache);
    } else {
        std::cout << "# training FISM on the 10% ml-1m subsample (" << cfg.epochs << " epochs)\n";
        out.fism = train_fism(out.dataset, cfg, &std::cout).params;
        std::filesystem::create_directories(ctx.workdir);
        save_model(out.fism, cache);
    }
    out.fism_report = evaluate(make_fism_scorer(out.fism, out.dataset), out.dataset, 10, 2);
    return out;
}

NaisParams train_subsample_nais(const Context& ctx, const SubsampleModels& base, double beta,
                                const std::string& cache_name) {
    const std::string cache = ctx.workdir + "/" + cache_name;
    if (std::filesystem::exists(cache)) {
        return load_nais_model(cache);
    }
    TrainConfig cfg;
    cfg.model = ModelKind::nais_prod;
    cfg.k = 16;
    cfg.a = 16;
    cfg.beta = beta;
    cfg.lr = 0.01;
    cfg.neg_ratio = 4;
    cfg.epochs = 30;
    cfg.seed = 2018;
    std::cout << "# training NAIS-prod (beta=" << beta << ") on the subsample (" << cfg.epochs
              << " epochs)\n";
    const auto params = train_nais(base.dataset, cfg, &base.fism, &std::cout).params;
    std::filesystem::create_directories(ctx.workdir);
    save_model(params, cache);
    return params;
}

Outcome criterion_8(const Context& ctx) {
    if (!ctx.data_dir) {
        std::cout << "criterion 8: SKIP NAIS improvement (ml-1m files not found)\n";
        return Outcome::skip;
    }
    const auto paths = dataset_paths(*ctx.data_dir, "ml-1m");
    if (!paths.exists()) {
        std::cout << "criterion 8: SKIP NAIS improvement (ml-1m files not found)\n";
        return Outcome::skip;
    }

    if (ctx.full_scale) {
        const auto ds = load_ncf_dataset(paths.train, paths.test, paths.negatives);
        const std::string fism_path = ctx.workdir + "/fism-ml1m.model";
        FismParams fism;
        if (std::filesystem::exists(fism_path)) {
            fism = load_fism_model(fism_path);
        } else {
            std::cout << "# converged FISM not cached; run criterion 7 first. Training now.\n";
            TrainConfig cfg;
            cfg.model = ModelKind::fism;
            cfg.k = 16;
            cfg.epochs = 64;
            cfg.seed = 2018;
            fism = train_fism(ds, cfg, &std::cout).params;
            std::filesystem::create_directories(ctx.workdir);
            save_model(fism, fism_path);
        }
        const auto fism_report = evaluate(make_fism_scorer(fism, ds), ds, 10, 2);

        TrainConfig cfg;
        cfg.model = ModelKind::nais_prod;
        cfg.k = 16;
        cfg.a = 16;
        cfg.beta = 0.5;
        cfg.epochs = 30;
        cfg.seed = 2018;
        const auto nais = train_nais(ds, cfg, &fism, &std::cout).params;
        save_model(nais, ctx.workdir + "/nais-ml1m.model");
        const auto nais_report = evaluate(make_nais_scorer(nais, ds), ds, 10, 2);

        const double rel =
            (nais_report.mean_ndcg - fism_report.mean_ndcg) / fism_report.mean_ndcg;
        const double p = paired_ttest(fism_report.per_user_ndcg, nais_report.per_user_ndcg);
        const bool ok = rel >= 0.02 && p < 0.05 && nais_report.mean_ndcg > fism_report.mean_ndcg;
        std::cout << "criterion 8: " << (ok ? "PASS" : "FAIL") << " full ml-1m -- FISM NDCG@10 "
                  << fmt(fism_report.mean_ndcg * 100, 2) << ", NAIS-prod NDCG@10 "
                  << fmt(nais_report.mean_ndcg * 100, 2) << ", relative gain " << fmt(rel * 100, 2)
                  << "% (need >= 2%), paired-t p " << p << " (need < 0.05)\n";
        return ok ? Outcome::pass : Outcome::fail;
    }

    // CI fallback pinned by the criterion: fixed-seed 10%-user subsample
    const auto base = subsample_fism(ctx, paths);
    const auto nais = train_subsample_nais(ctx, base, 0.5, "nais-ml1m-sub10-b05.model");
    const auto nais_report = evaluate(make_nais_scorer(nais, base.dataset), base.dataset, 10, 2);
    const double p = paired_ttest(base.fism_report.per_user_ndcg, nais_report.per_user_ndcg);
    const bool ok = nais_report.mean_ndcg > base.fism_report.mean_ndcg && p < 0.05;
    std::cout << "criterion 8: " << (ok ? "PASS" : "FAIL")
              << " 10% subsample -- FISM NDCG@10 " << fmt(base.fism_report.mean_ndcg * 100, 2)
              << ", NAIS-prod NDCG@10 " << fmt(nais_report.mean_ndcg * 100, 2) << ", paired-t p "
              << p << " (need NAIS > FISM and p < 0.05; --full for the whole ml-1m run)\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------- criterion 9 --

Outcome criterion_9(const Context& ctx) {
    if (!ctx.data_dir) {
        std::cout << "criterion 9: SKIP beta sensitivity (ml-1m files not found)\n";
        return Outcome::skip;
    }
    const auto paths = dataset_paths(*ctx.data_dir, "ml-1m");
    if (!paths.exists()) {
        std::cout << "criterion 9: SKIP beta sensitivity (ml-1m files not found)\n";
        return Outcome::skip;
    }
    const auto base = subsample_fism(ctx, paths);
    const auto smooth = train_subsample_nais(ctx, base, 0.5, "nais-ml1m-sub10-b05.model");
    const auto softmax = train_subsample_nais(ctx, base, 1.0, "nais-ml1m-sub10-b10.model");
    const auto smooth_report = evaluate(make_nais_scorer(smooth, base.dataset), base.dataset, 10, 2);
    const auto softmax_report =
        evaluate(make_nais_scorer(softmax, base.dataset), base.dataset, 10, 2);
    const bool ok = softmax_report.mean_ndcg < smooth_report.mean_ndcg;
    std::cout << "criterion 9: " << (ok ? "PASS" : "FAIL") << " beta sensitivity -- NDCG@10 "
              << fmt(softmax_report.mean_ndcg * 100, 2) << " at beta=1 vs "
              << fmt(smooth_report.mean_ndcg * 100, 2) << " at beta=0.5 (beta=1 must be lower)\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------ criterion 10 --

Outcome criterion_10(const Context& ctx) {
    // dataset-free criterion: the synthetic clustered generator stands in
    // when the ml-1m files are absent
    Dataset ds;
    std::string source;
    if (ctx.data_dir) {
        const auto paths = dataset_paths(*ctx.data_dir, "ml-1m");
        if (paths.exists()) {
            const auto full = load_ncf_dataset(paths.train, paths.test, paths.negatives);
            ds = subsample_users(full, 0.05, 77);
            source = "ml-1m 5% subsample";
        }
    }
    if (source.empty()) {
        ds = synthetic_dataset(120, 400, 10, 40, 99);
        source = "synthetic";
    }

    TrainConfig fism_cfg;
    fism_cfg.model = ModelKind::fism;
    fism_cfg.k = 8;
    fism_cfg.epochs = source == "synthetic" ? 40 : 25;
    fism_cfg.seed = 5;
    const auto fism = train_fism(ds, fism_cfg).params;

    TrainConfig cfg;
    cfg.model = ModelKind::nais_prod;
    cfg.k = 8;
    cfg.a = 8;
    cfg.beta = 0.5;
    cfg.seed = 6;
    cfg.epochs = 1;
    const auto after_one = train_nais(ds, cfg, &fism).params;
    cfg.epochs = source == "synthetic" ? 30 : 15;
    const auto trained = train_nais(ds, cfg, &fism).params;

    const auto collect_variances = [&](const NaisParams& params) {
        std::vector<double> variances;
        for (const auto& stat : attention_stats(params, ds)) variances.push_back(stat.variance);
        return variances;
    };
    const double before = median(collect_variances(after_one));
    const double after = median(collect_variances(trained));
    const bool ok = after > before;
    std::cout << "criterion 10: " << (ok ? "PASS" : "FAIL")
              << " attention-variance growth on " << source << " -- median variance " << before
              << " after epoch 1 vs " << after << " after training (must increase)\n";
    return ok ? Outcome::pass : Outcome::fail;
}

// ------------------------------------------------------------ criterion 11 --

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

Outcome criterion_11(const Context& ctx) {
    const auto ds = synthetic_dataset(60, 300, 8, 30, 2024);
    std::filesystem::create_directories(ctx.workdir);

    const auto run_once = [&](const std::string& tag) {
        TrainConfig fism_cfg;
        fism_cfg.model = ModelKind::fism;
        fism_cfg.k = 8;
        fism_cfg.epochs = 12;
        fism_cfg.seed = 31;
        const auto fism = train_fism(ds, fism_cfg).params;
        save_model(fism, ctx.workdir + "/det-fism-" + tag + ".model");

        TrainConfig nais_cfg;
        nais_cfg.model = ModelKind::nais_concat;
        nais_cfg.k = 8;
        nais_cfg.a = 8;
        nais_cfg.epochs = 6;
        nais_cfg.seed = 32;
        const auto nais = train_nais(ds, nais_cfg, &fism).params;
        save_model(nais, ctx.workdir + "/det-nais-" + tag + ".model");
        return evaluate(make_nais_scorer(nais, ds), ds, 10, 2);
    };

    const auto report_a = run_once("a");
    const auto report_b = run_once("b");

    const bool files_ok =
        file_bytes(ctx.workdir + "/det-fism-a.model") == file_bytes(ctx.workdir + "/det-fism-b.model") &&
        file_bytes(ctx.workdir + "/det-nais-a.model") == file_bytes(ctx.workdir + "/det-nais-b.model");
    const bool reports_ok = report_a.per_user_hr == report_b.per_user_hr &&
                            report_a.per_user_ndcg == report_b.per_user_ndcg &&
                            report_a.mean_hr == report_b.mean_hr &&
                            report_a.mean_ndcg == report_b.mean_ndcg;
    const bool ok = files_ok && reports_ok;
    std::cout << "criterion 11: " << (ok ? "PASS" : "FAIL")
              << " determinism -- model files bit-identical: " << (files_ok ? "yes" : "NO")
              << ", eval reports identical: " << (reports_ok ? "yes" : "NO") << "\n";
    return ok ? Outcome::pass : Outcome::fail;
}

}  // namespace

int main(int argc, char** argv) {
    Context ctx;
    ctx.workdir = "acceptance_work";
    int selected = 0;  // 0 = all

    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            selected = std::atoi(argv[++i]);
        } else if (arg == "--data-dir" && i + 1 < argc) {
            ctx.data_dir = argv[++i];
        } else if (arg == "--workdir" && i + 1 < argc) {
            ctx.workdir = argv[++i];
        } else if (arg == "--full") {
            ctx.full_scale = true;
        } else {
            std::cerr << "usage: acceptance [--criterion N] [--data-dir DIR] [--workdir DIR] "
                         "[--full]\n";
            return 2;
        }
    }
    if (!ctx.data_dir) {
        if (const char* env = std::getenv("ITEMSIM_DATA_DIR")) ctx.data_dir = env;
    }
    if (!ctx.data_dir && std::filesystem::exists("data/ml-1m.train.rating")) {
        ctx.data_dir = "data";
    }

    using Criterion = Outcome (*)(const Context&);
    const std::vector<Criterion> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                          criterion_5, criterion_6, criterion_7, criterion_8,
                                          criterion_9, criterion_10, criterion_11};

    bool any_fail = false;
    bool any_skip = false;
    for (size_t idx = 0; idx < criteria.size(); ++idx) {
        if (selected != 0 && static_cast<size_t>(selected) != idx + 1) continue;
        const Outcome outcome = criteria[idx](ctx);
        if (outcome == Outcome::fail) any_fail = true;
        if (outcome == Outcome::skip) any_skip = true;
    }
    if (any_fail) return 1;
    if (any_skip) return 77;
    return 0;
}
