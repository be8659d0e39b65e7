#include "itemsim/model.hpp"

#include <algorithm>
#include <cmath>

namespace itemsim {

std::atomic<std::uint64_t> attention_logit_evals{0};

std::string to_string(AttentionVariant v) {
    return v == AttentionVariant::concat ? "concat" : "prod";
}

void NaisParams::check_shapes() const {
    const auto items = static_cast<size_t>(num_items);
    const auto kk = static_cast<size_t>(k);
    const auto aa = static_cast<size_t>(a);
    if (k < 1 || a < 1) throw ConfigError("embedding size and attention factor must be >= 1");
    if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0, 1]");
    if (P.size() != items * kk || Q.size() != items * kk) {
        throw ConfigError("embedding table size does not match num_items x k");
    }
    if (W.size() != aa * static_cast<size_t>(input_dim())) {
        throw ConfigError("attention weight matrix does not match variant '" +
                          to_string(variant) + "' (expected " + std::to_string(a) + "x" +
                          std::to_string(input_dim()) + ")");
    }
    if (b.size() != aa || h.size() != aa) {
        throw ConfigError("attention bias/projection length does not match attention factor");
    }
}

namespace {

inline void check_item(ItemId id, std::int32_t num_items) {
    if (id < 0 || id >= num_items) {
        throw ConfigError("item id " + std::to_string(id) + " out of range [0, " +
                          std::to_string(num_items) + ")");
    }
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

// hidden = ReLU(W x + b), returns h . hidden
inline double logit_core(const NaisParams& params, std::span<const double> pi,
                         std::span<const double> qj, double* hidden) {
    const auto a = static_cast<size_t>(params.a);
    const auto k = static_cast<size_t>(params.k);
    const double* W = params.W.data();
    double f = 0.0;
    if (params.variant == AttentionVariant::prod) {
        for (size_t r = 0; r < a; ++r) {
            const double* wrow = W + r * k;
            double z = params.b[r];
            for (size_t c = 0; c < k; ++c) z += wrow[c] * pi[c] * qj[c];
            const double relu = z > 0.0 ? z : 0.0;
            hidden[r] = relu;
            f += params.h[r] * relu;
        }
    } else {
        for (size_t r = 0; r < a; ++r) {
            const double* wrow = W + r * 2 * k;
            double z = params.b[r];
            for (size_t c = 0; c < k; ++c) z += wrow[c] * pi[c];
            for (size_t c = 0; c < k; ++c) z += wrow[k + c] * qj[c];
            const double relu = z > 0.0 ? z : 0.0;
            hidden[r] = relu;
            f += params.h[r] * relu;
        }
    }
    attention_logit_evals.fetch_add(1, std::memory_order_relaxed);
    return f;
}

}  // namespace

double fism_predict(const FismParams& params, std::span<const ItemId> history, ItemId target) {
    check_item(target, params.num_items);
    const auto k = static_cast<size_t>(params.k);
    std::vector<double> sum(k, 0.0);
    std::int64_t n = 0;
    for (ItemId j : history) {
        check_item(j, params.num_items);
        if (j == target) continue;  // self-similarity exclusion
        const auto qj = params.q(j);
        for (size_t c = 0; c < k; ++c) sum[c] += qj[c];
        ++n;
    }
    if (n == 0) return 0.0;
    const double scale = std::pow(static_cast<double>(n), -params.alpha);
    return scale * dot(params.p(target), std::span<const double>(sum));
}

double attention_logit(const NaisParams& params, ItemId target, ItemId j) {
    params.check_shapes();
    check_item(target, params.num_items);
    check_item(j, params.num_items);
    std::vector<double> hidden(static_cast<size_t>(params.a));
    return logit_core(params, params.p(target), params.q(j), hidden.data());
}

double NaisForward::weight(size_t idx, double beta) const {
    return std::exp(logits[idx] - beta * lse);
}

double NaisForward::softmax(size_t idx) const { return std::exp(logits[idx] - lse); }

void nais_forward(const NaisParams& params, std::span<const ItemId> history, ItemId target,
                  NaisForward& out) {
    check_item(target, params.num_items);
    const auto a = static_cast<size_t>(params.a);

    out.items.clear();
    out.logits.clear();
    out.dots.clear();
    for (ItemId j : history) {
        check_item(j, params.num_items);
        if (j != target) out.items.push_back(j);
    }
    const size_t n = out.items.size();
    out.relu.resize(n * a);
    out.logits.resize(n);
    out.dots.resize(n);
    if (n == 0) {
        out.max_logit = 0.0;
        out.exp_sum = 0.0;
        out.lse = 0.0;
        out.score = 0.0;
        return;
    }

    const auto pi = params.p(target);
    for (size_t idx = 0; idx < n; ++idx) {
        const auto qj = params.q(out.items[idx]);
        out.logits[idx] = logit_core(params, pi, qj, out.relu.data() + idx * a);
        out.dots[idx] = dot(pi, qj);
    }

    out.max_logit = *std::max_element(out.logits.begin(), out.logits.end());
    KahanSum weighted;
    KahanSum denom;
    for (size_t idx = 0; idx < n; ++idx) {
        const double e = std::exp(out.logits[idx] - out.max_logit);
        denom.add(e);
        weighted.add(e * out.dots[idx]);
    }
    out.exp_sum = denom.value();
    out.lse = out.max_logit + std::log(out.exp_sum);
    // same evaluation route as cache_score, so the cache is exact by construction
    out.score = weighted.value() *
                std::exp((1.0 - params.beta) * out.max_logit - params.beta * std::log(out.exp_sum));
}

AttentionWeights attention_weights(const NaisParams& params, std::span<const ItemId> history,
                                   ItemId target) {
    params.check_shapes();
    NaisForward fwd;
    nais_forward(params, history, target, fwd);
    if (fwd.items.empty()) {
        throw ConsistencyError("effective history of target " + std::to_string(target) +
                               " is empty");
    }
    AttentionWeights out;
    out.items = std::move(fwd.items);
    out.weights.resize(out.items.size());
    for (size_t idx = 0; idx < out.items.size(); ++idx) {
        out.weights[idx] = fwd.weight(idx, params.beta);
    }
    out.logits = std::move(fwd.logits);
    return out;
}

NaisPrediction nais_predict(const NaisParams& params, std::span<const ItemId> history,
                            ItemId target) {
    params.check_shapes();
    NaisForward fwd;
    nais_forward(params, history, target, fwd);

    NaisPrediction pred;
    pred.cache.item = target;
    pred.cache.n = static_cast<std::int32_t>(fwd.items.size());
    if (fwd.items.empty()) return pred;

    KahanSum s;
    for (size_t idx = 0; idx < fwd.items.size(); ++idx) {
        s.add(std::exp(fwd.logits[idx] - fwd.max_logit) * fwd.dots[idx]);
    }
    pred.cache.S = s.value();
    pred.cache.D = fwd.exp_sum;
    pred.cache.m = fwd.max_logit;
    pred.score = cache_score(params, pred.cache);
    return pred;
}

double cache_score(const NaisParams& params, const PredictionCache& cache) {
    if (cache.n == 0) return 0.0;
    return cache.S * std::exp((1.0 - params.beta) * cache.m - params.beta * std::log(cache.D));
}

double refresh_prediction(const NaisParams& params, PredictionCache& cache, ItemId new_item) {
    check_item(new_item, params.num_items);
    if (new_item == cache.item) {
        throw ConsistencyError("refresh item " + std::to_string(new_item) +
                               " equals the candidate; self-similarity is excluded");
    }
    std::vector<double> hidden(static_cast<size_t>(params.a));
    const double f = logit_core(params, params.p(cache.item), params.q(new_item), hidden.data());
    const double s = dot(params.p(cache.item), params.q(new_item));
    if (cache.n == 0) {
        cache.m = f;
        cache.S = s;
        cache.D = 1.0;
    } else if (f <= cache.m) {
        const double e = std::exp(f - cache.m);
        cache.S += e * s;
        cache.D += e;
    } else {
        // new max logit: re-shift the cached sums
        const double scale = std::exp(cache.m - f);
        cache.S = cache.S * scale + s;
        cache.D = cache.D * scale + 1.0;
        cache.m = f;
    }
    cache.n += 1;
    return cache_score(params, cache);
}

}  // namespace itemsim
