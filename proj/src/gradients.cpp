#include "itemsim/gradients.hpp"

#include <algorithm>
#include <cmath>

namespace itemsim {

double instance_loss(double score, std::int32_t label) {
    // -log sigmoid(x) = softplus(-x), -log(1 - sigmoid(x)) = softplus(x)
    const double t = label == 1 ? -score : score;
    return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

std::vector<ItemId> GradientSet::touched_items() const {
    std::vector<ItemId> out;
    out.reserve(history_ids.size() + 1);
    if (target >= 0) out.push_back(target);
    for (ItemId j : history_ids) {
        if (j != target) out.push_back(j);
    }
    return out;
}

void GradientSet::clear() {
    target = -1;
    d_target.clear();
    history_ids.clear();
    d_history.clear();
    dW.clear();
    db.clear();
    dh.clear();
}

void grad_fism_into(const TrainInstance& instance, const FismParams& params,
                    const Dataset& dataset, const LossConfig& cfg, InstanceGradient& out) {
    const auto k = static_cast<size_t>(params.k);
    const ItemId target = instance.item;
    const auto& history = dataset.histories[static_cast<size_t>(instance.user)];

    GradientSet& g = out.grads;
    g.clear();
    g.target = target;
    g.d_target.assign(k, 0.0);

    const auto pi = params.p(target);

    std::vector<double>& qsum = g.d_target;  // reused as the history-embedding sum
    for (ItemId j : history) {
        if (j == target) continue;
        g.history_ids.push_back(j);
        const auto qj = params.q(j);
        for (size_t c = 0; c < k; ++c) qsum[c] += qj[c];
    }
    const size_t n = g.history_ids.size();

    if (n == 0) {
        out.score = 0.0;
        out.loss = instance_loss(0.0, instance.label);
        for (size_t c = 0; c < k; ++c) g.d_target[c] = 2.0 * cfg.lambda * pi[c];
        return;
    }

    const double scale = std::pow(static_cast<double>(n), -params.alpha);
    double score = 0.0;
    for (size_t c = 0; c < k; ++c) score += pi[c] * qsum[c];
    score *= scale;
    out.score = score;
    out.loss = instance_loss(score, instance.label);

    const double delta = sigmoid(score) - static_cast<double>(instance.label);

    // d/dp_i = delta * scale * sum q_j + 2*lambda*p_i
    for (size_t c = 0; c < k; ++c) {
        g.d_target[c] = delta * scale * qsum[c] + 2.0 * cfg.lambda * pi[c];
    }
    // d/dq_j = delta * scale * p_i + 2*lambda*q_j
    g.d_history.resize(n * k);
    for (size_t idx = 0; idx < n; ++idx) {
        const auto qj = params.q(g.history_ids[idx]);
        double* row = g.d_history.data() + idx * k;
        for (size_t c = 0; c < k; ++c) {
            row[c] = delta * scale * pi[c] + 2.0 * cfg.lambda * qj[c];
        }
    }
}

void grad_nais_into(const TrainInstance& instance, const NaisParams& params,
                    const Dataset& dataset, const LossConfig& cfg, NaisForward& fwd,
                    InstanceGradient& out) {
    const auto k = static_cast<size_t>(params.k);
    const auto a = static_cast<size_t>(params.a);
    const auto d = static_cast<size_t>(params.input_dim());
    const bool concat = params.variant == AttentionVariant::concat;
    const ItemId target = instance.item;
    const auto& history = dataset.histories[static_cast<size_t>(instance.user)];

    GradientSet& g = out.grads;
    g.clear();
    g.target = target;
    g.d_target.assign(k, 0.0);

    nais_forward(params, history, target, fwd);
    const size_t n = fwd.items.size();
    out.score = fwd.score;
    out.loss = instance_loss(fwd.score, instance.label);

    const auto pi = params.p(target);
    if (n == 0) {
        for (size_t c = 0; c < k; ++c) g.d_target[c] = 2.0 * cfg.lambda * pi[c];
        return;
    }

    const double delta = sigmoid(fwd.score) - static_cast<double>(instance.label);
    const double beta = params.beta;

    g.history_ids = fwd.items;
    g.d_history.assign(n * k, 0.0);
    g.dW.assign(a * d, 0.0);
    g.db.assign(a, 0.0);
    g.dh.assign(a, 0.0);

    std::vector<double> masked(a);       // h elementwise relu-mask of one item
    std::vector<double> back_p(k);       // p_i slot of W^T masked
    std::vector<double> back_q(k);       // q_j slot (concat only)

    for (size_t idx = 0; idx < n; ++idx) {
        const ItemId j = fwd.items[idx];
        const auto qj = params.q(j);
        const double w_j = fwd.weight(idx, beta);
        // dyhat/df_j with the full smoothed-softmax Jacobian
        // da_l/df_j = a_l * (1{l=j} - beta * softmax_j) contracted over the dots
        const double coeff = delta * (w_j * fwd.dots[idx] - beta * fwd.softmax(idx) * fwd.score);

        const double* relu_row = fwd.relu.data() + idx * a;
        for (size_t r = 0; r < a; ++r) {
            masked[r] = relu_row[r] > 0.0 ? params.h[r] : 0.0;  // ReLU'(0) := 0
            g.dh[r] += coeff * relu_row[r];
            g.db[r] += coeff * masked[r];
        }

        double* drow = g.d_history.data() + idx * k;
        if (concat) {
            std::fill(back_p.begin(), back_p.end(), 0.0);
            std::fill(back_q.begin(), back_q.end(), 0.0);
            for (size_t r = 0; r < a; ++r) {
                if (masked[r] == 0.0) continue;
                const double mr = masked[r];
                const double* wrow = params.W.data() + r * d;
                double* dwrow = g.dW.data() + r * d;
                for (size_t c = 0; c < k; ++c) {
                    dwrow[c] += coeff * mr * pi[c];
                    dwrow[k + c] += coeff * mr * qj[c];
                    back_p[c] += mr * wrow[c];
                    back_q[c] += mr * wrow[k + c];
                }
            }
            for (size_t c = 0; c < k; ++c) {
                g.d_target[c] += delta * w_j * qj[c] + coeff * back_p[c];
                drow[c] += delta * w_j * pi[c] + coeff * back_q[c];
            }
        } else {
            std::fill(back_p.begin(), back_p.end(), 0.0);
            for (size_t r = 0; r < a; ++r) {
                if (masked[r] == 0.0) continue;
                const double mr = masked[r];
                const double* wrow = params.W.data() + r * k;
                double* dwrow = g.dW.data() + r * k;
                for (size_t c = 0; c < k; ++c) {
                    dwrow[c] += coeff * mr * pi[c] * qj[c];
                    back_p[c] += mr * wrow[c];
                }
            }
            for (size_t c = 0; c < k; ++c) {
                g.d_target[c] += (delta * w_j + coeff * back_p[c]) * qj[c];
                drow[c] += (delta * w_j + coeff * back_p[c]) * pi[c];
            }
        }
    }

    if (cfg.lambda != 0.0) {
        const double two_lambda = 2.0 * cfg.lambda;
        for (size_t c = 0; c < k; ++c) g.d_target[c] += two_lambda * pi[c];
        for (size_t idx = 0; idx < n; ++idx) {
            const auto qj = params.q(g.history_ids[idx]);
            double* row = g.d_history.data() + idx * k;
            for (size_t c = 0; c < k; ++c) row[c] += two_lambda * qj[c];
        }
        for (size_t i = 0; i < g.dW.size(); ++i) g.dW[i] += two_lambda * params.W[i];
        for (size_t r = 0; r < a; ++r) {
            g.db[r] += two_lambda * params.b[r];
            g.dh[r] += two_lambda * params.h[r];
        }
    }
}

InstanceGradient grad_fism(const TrainInstance& instance, const FismParams& params,
                           const Dataset& dataset, const LossConfig& cfg) {
    InstanceGradient out;
    grad_fism_into(instance, params, dataset, cfg, out);
    return out;
}

InstanceGradient grad_nais(const TrainInstance& instance, const NaisParams& params,
                           const Dataset& dataset, const LossConfig& cfg) {
    InstanceGradient out;
    NaisForward fwd;
    grad_nais_into(instance, params, dataset, cfg, fwd, out);
    return out;
}

namespace {

double sum_squares(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

double param_norm_squared(const FismParams& params) {
    return sum_squares(params.P) + sum_squares(params.Q);
}

double param_norm_squared(const NaisParams& params) {
    return sum_squares(params.P) + sum_squares(params.Q) + sum_squares(params.W) +
           sum_squares(params.b) + sum_squares(params.h);
}

double batch_objective(std::span<const MiniBatch> batches, const FismParams& params,
                       const Dataset& dataset, const LossConfig& cfg) {
    KahanSum data;
    for (const auto& batch : batches) {
        for (const auto& ins : batch.instances) {
            const double score =
                fism_predict(params, dataset.histories[static_cast<size_t>(ins.user)], ins.item);
            data.add(instance_loss(score, ins.label));
        }
    }
    return data.value() / static_cast<double>(cfg.total_instances) +
           cfg.lambda * param_norm_squared(params);
}

double batch_objective(std::span<const MiniBatch> batches, const NaisParams& params,
                       const Dataset& dataset, const LossConfig& cfg) {
    KahanSum data;
    for (const auto& batch : batches) {
        for (const auto& ins : batch.instances) {
            const double score =
                nais_predict(params, dataset.histories[static_cast<size_t>(ins.user)], ins.item)
                    .score;
            data.add(instance_loss(score, ins.label));
        }
    }
    return data.value() / static_cast<double>(cfg.total_instances) +
           cfg.lambda * param_norm_squared(params);
}

}  // namespace itemsim
