#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "itemsim/dataio.hpp"
#include "itemsim/model.hpp"

namespace itemsim {

struct LossConfig {
    double lambda = 0.0;              // L2 coefficient
    std::int64_t total_instances = 1;  // N in the (1/N) data-term scaling
};

/// Regularized log loss of one instance, evaluated in overflow-safe form.
double instance_loss(double score, std::int32_t label);

/// Gradient of one instance's objective: log loss plus lambda * ||theta||^2
/// over the parameters the instance touches (target row, effective-history
/// rows, and the attention net when the history is nonempty).
struct GradientSet {
    ItemId target = -1;
    std::vector<double> d_target;     // k; the only nonzero row of dP
    std::vector<ItemId> history_ids;  // keys of the nonzero dQ rows
    std::vector<double> d_history;    // |history_ids| x k, row-major
    std::vector<double> dW;           // dense; empty for FISM
    std::vector<double> db;
    std::vector<double> dh;

    std::vector<ItemId> touched_items() const;  // {target} union history_ids
    void clear();
};

struct InstanceGradient {
    double score = 0.0;
    double loss = 0.0;  // data term only, without the lambda part
    GradientSet grads;
};

InstanceGradient grad_fism(const TrainInstance& instance, const FismParams& params,
                           const Dataset& dataset, const LossConfig& cfg);

InstanceGradient grad_nais(const TrainInstance& instance, const NaisParams& params,
                           const Dataset& dataset, const LossConfig& cfg);

// In-place variants reusing caller-owned buffers; the trainer's hot path.
void grad_fism_into(const TrainInstance& instance, const FismParams& params,
                    const Dataset& dataset, const LossConfig& cfg, InstanceGradient& out);
void grad_nais_into(const TrainInstance& instance, const NaisParams& params,
                    const Dataset& dataset, const LossConfig& cfg, NaisForward& fwd,
                    InstanceGradient& out);

/// (1/N) sum of instance losses plus lambda * ||Theta||^2 over all
/// parameters; N is cfg.total_instances (epoch-global), not the batch size.
double batch_objective(std::span<const MiniBatch> batches, const FismParams& params,
                       const Dataset& dataset, const LossConfig& cfg);
double batch_objective(std::span<const MiniBatch> batches, const NaisParams& params,
                       const Dataset& dataset, const LossConfig& cfg);

double param_norm_squared(const FismParams& params);
double param_norm_squared(const NaisParams& params);

}  // namespace itemsim
