#include "itemsim/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "itemsim/evaluator.hpp"

namespace itemsim {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::fism: return "fism";
        case ModelKind::nais_concat: return "nais-concat";
        default: return "nais-prod";
    }
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "fism") return ModelKind::fism;
    if (name == "nais-concat") return ModelKind::nais_concat;
    if (name == "nais-prod") return ModelKind::nais_prod;
    throw ConfigError("unknown model '" + name + "' (expected fism, nais-concat, nais-prod)");
}

void TrainConfig::check() const {
    if (k < 1) throw ConfigError("embedding size must be >= 1");
    if (a < 1) throw ConfigError("attention factor must be >= 1");
    if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0, 1]");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (lr <= 0.0) throw ConfigError("learning rate must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (neg_ratio < 1) throw ConfigError("negative ratio must be >= 1 for training");
}

AdagradState make_adagrad(const FismParams& params, double lr, double eps) {
    AdagradState s;
    s.lr = lr;
    s.eps = eps;
    s.accP.assign(params.P.size(), 0.0);
    s.accQ.assign(params.Q.size(), 0.0);
    return s;
}

AdagradState make_adagrad(const NaisParams& params, double lr, double eps) {
    AdagradState s;
    s.lr = lr;
    s.eps = eps;
    s.accP.assign(params.P.size(), 0.0);
    s.accQ.assign(params.Q.size(), 0.0);
    s.accW.assign(params.W.size(), 0.0);
    s.accB.assign(params.b.size(), 0.0);
    s.accH.assign(params.h.size(), 0.0);
    return s;
}

namespace {

inline void apply_coord(double g, double& acc, double& theta, double lr, double eps,
                        const char* name) {
    if (!std::isfinite(g)) {
        throw DivergenceError(std::string("non-finite gradient in ") + name);
    }
    if (g == 0.0) return;
    acc += g * g;
    theta -= lr * g / (std::sqrt(acc) + eps);
}

inline void apply_row(std::span<const double> g, double* acc, double* theta, double lr,
                      double eps, const char* name) {
    for (size_t c = 0; c < g.size(); ++c) apply_coord(g[c], acc[c], theta[c], lr, eps, name);
}

void apply_embeddings(AdagradState& state, std::vector<double>& P, std::vector<double>& Q,
                      std::int32_t k, const GradientSet& grads, double lr, double eps) {
    const auto kk = static_cast<size_t>(k);
    if (grads.target >= 0 && !grads.d_target.empty()) {
        const size_t off = static_cast<size_t>(grads.target) * kk;
        apply_row(grads.d_target, state.accP.data() + off, P.data() + off, lr, eps, "P");
    }
    for (size_t idx = 0; idx < grads.history_ids.size(); ++idx) {
        const size_t off = static_cast<size_t>(grads.history_ids[idx]) * kk;
        apply_row({grads.d_history.data() + idx * kk, kk}, state.accQ.data() + off,
                  Q.data() + off, lr, eps, "Q");
    }
}

}  // namespace

void adagrad_step(AdagradState& state, FismParams& params, const GradientSet& grads) {
    apply_embeddings(state, params.P, params.Q, params.k, grads, state.lr, state.eps);
}

void adagrad_step(AdagradState& state, NaisParams& params, const GradientSet& grads) {
    apply_embeddings(state, params.P, params.Q, params.k, grads, state.lr, state.eps);
    if (!grads.dW.empty()) {
        apply_row(grads.dW, state.accW.data(), params.W.data(), state.lr, state.eps, "W");
        apply_row(grads.db, state.accB.data(), params.b.data(), state.lr, state.eps, "b");
        apply_row(grads.dh, state.accH.data(), params.h.data(), state.lr, state.eps, "h");
    }
}

FismParams init_fism_params(std::int32_t num_items, std::int32_t k, double alpha,
                            std::uint64_t seed) {
    if (num_items < 1 || k < 1) throw ConfigError("num_items and k must be >= 1");
    FismParams params;
    params.num_items = num_items;
    params.k = k;
    params.alpha = alpha;
    Rng rng(seed);
    const size_t size = static_cast<size_t>(num_items) * static_cast<size_t>(k);
    params.P.resize(size);
    params.Q.resize(size);
    for (auto& v : params.P) v = rng.normal(0.0, 0.01);
    for (auto& v : params.Q) v = rng.normal(0.0, 0.01);
    return params;
}

NaisParams init_nais_params(std::int32_t num_items, std::int32_t k, std::int32_t a,
                            AttentionVariant variant, double beta, std::uint64_t seed) {
    if (num_items < 1 || k < 1 || a < 1) throw ConfigError("num_items, k and a must be >= 1");
    NaisParams params;
    params.num_items = num_items;
    params.k = k;
    params.a = a;
    params.variant = variant;
    params.beta = beta;
    Rng rng(seed);
    const size_t size = static_cast<size_t>(num_items) * static_cast<size_t>(k);
    params.P.resize(size);
    params.Q.resize(size);
    params.W.resize(static_cast<size_t>(a) * static_cast<size_t>(params.input_dim()));
    params.b.resize(static_cast<size_t>(a));
    params.h.resize(static_cast<size_t>(a));
    for (auto& v : params.P) v = rng.normal(0.0, 0.01);
    for (auto& v : params.Q) v = rng.normal(0.0, 0.01);
    for (auto& v : params.W) v = rng.normal(0.0, 0.01);
    for (auto& v : params.b) v = rng.normal(0.0, 0.01);
    for (auto& v : params.h) v = rng.normal(0.0, 0.01);
    params.check_shapes();
    return params;
}

void print_epoch_log(std::ostream& os, const EpochLog& log) {
    os << log.epoch << '\t' << log.mean_loss << '\t' << log.seconds << '\t';
    if (log.hr >= 0.0) os << log.hr;
    os << '\t';
    if (log.ndcg >= 0.0) os << log.ndcg;
    os << '\n';
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Params, typename GradFn>
std::vector<EpochLog> run_epochs(const Dataset& dataset, const TrainConfig& cfg, Params& params,
                                 AdagradState& state, GradFn&& grad_into,
                                 const Scorer& scorer, std::ostream* log_stream) {
    std::vector<EpochLog> logs;
    LossConfig loss_cfg;
    loss_cfg.lambda = cfg.lambda;

    InstanceGradient ig;
    for (std::int32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = Clock::now();
        const auto instances =
            sample_negatives(dataset, cfg.neg_ratio, cfg.seed + static_cast<std::uint64_t>(epoch));
        const auto batches =
            user_minibatches(instances, mix_seed(cfg.seed + static_cast<std::uint64_t>(epoch)));
        loss_cfg.total_instances = static_cast<std::int64_t>(instances.size());

        KahanSum loss_sum;
        for (const auto& batch : batches) {
            for (const auto& ins : batch.instances) {
                try {
                    grad_into(ins, loss_cfg, ig);
                    adagrad_step(state, params, ig.grads);
                } catch (const DivergenceError& e) {
                    throw DivergenceError(std::string(e.what()) + " (epoch " +
                                          std::to_string(epoch) + ", user " +
                                          std::to_string(ins.user) + ")");
                }
                loss_sum.add(ig.loss);
            }
        }

        EpochLog log;
        log.epoch = epoch;
        log.mean_loss = instances.empty() ? 0.0
                                          : loss_sum.value() / static_cast<double>(instances.size());
        if (!std::isfinite(log.mean_loss)) {
            throw DivergenceError("non-finite mean loss at epoch " + std::to_string(epoch));
        }
        if (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
            const EvalReport report =
                evaluate(scorer, dataset, cfg.eval_topk, cfg.eval_threads);
            log.hr = report.mean_hr;
            log.ndcg = report.mean_ndcg;
        }
        log.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        if (log_stream != nullptr) print_epoch_log(*log_stream, log);
        logs.push_back(log);
    }
    return logs;
}

}  // namespace

FismTrainResult train_fism(const Dataset& dataset, const TrainConfig& cfg,
                           std::ostream* log_stream) {
    cfg.check();
    if (cfg.model != ModelKind::fism) throw ConfigError("train_fism requires model=fism");

    FismTrainResult result;
    result.params = init_fism_params(dataset.num_items, cfg.k, cfg.alpha, cfg.seed);
    auto state = make_adagrad(result.params, cfg.lr);

    const auto grad_into = [&](const TrainInstance& ins, const LossConfig& lc,
                               InstanceGradient& out) {
        grad_fism_into(ins, result.params, dataset, lc, out);
    };
    const Scorer scorer = make_fism_scorer(result.params, dataset);
    result.epochs = run_epochs(dataset, cfg, result.params, state, grad_into, scorer, log_stream);
    return result;
}

NaisTrainResult train_nais(const Dataset& dataset, const TrainConfig& cfg,
                           const FismParams* pretrain, std::ostream* log_stream) {
    cfg.check();
    if (cfg.model == ModelKind::fism) {
        throw ConfigError("train_nais requires model=nais-concat or nais-prod");
    }
    const auto variant = cfg.model == ModelKind::nais_concat ? AttentionVariant::concat
                                                             : AttentionVariant::prod;

    NaisTrainResult result;
    result.params =
        init_nais_params(dataset.num_items, cfg.k, cfg.a, variant, cfg.beta, cfg.seed);
    if (pretrain != nullptr) {
        if (pretrain->k != cfg.k || pretrain->num_items != dataset.num_items) {
            throw ConfigError("pre-trained embeddings are " + std::to_string(pretrain->num_items) +
                              "x" + std::to_string(pretrain->k) + ", expected " +
                              std::to_string(dataset.num_items) + "x" + std::to_string(cfg.k));
        }
        result.params.P = pretrain->P;
        result.params.Q = pretrain->Q;
    }
    auto state = make_adagrad(result.params, cfg.lr);

    NaisForward fwd;
    const auto grad_into = [&](const TrainInstance& ins, const LossConfig& lc,
                               InstanceGradient& out) {
        grad_nais_into(ins, result.params, dataset, lc, fwd, out);
    };
    const Scorer scorer = make_nais_scorer(result.params, dataset);
    result.epochs = run_epochs(dataset, cfg, result.params, state, grad_into, scorer, log_stream);
    return result;
}

}  // namespace itemsim
