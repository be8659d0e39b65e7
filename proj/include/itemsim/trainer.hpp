#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "itemsim/dataio.hpp"
#include "itemsim/gradients.hpp"
#include "itemsim/model.hpp"

namespace itemsim {

enum class ModelKind { fism, nais_concat, nais_prod };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct TrainConfig {
    ModelKind model = ModelKind::fism;
    std::int32_t k = 16;
    std::int32_t a = 16;       // attention factor (NAIS only)
    double alpha = 0.0;        // FISM normalization exponent
    double beta = 0.5;         // NAIS smoothing exponent
    double lambda = 0.0;
    double lr = 0.01;
    std::int32_t epochs = 10;
    std::int32_t neg_ratio = 4;
    std::uint64_t seed = 1;

    // optional per-epoch ranking evaluation
    std::int32_t eval_every = 0;  // 0 disables
    std::int32_t eval_topk = 10;
    std::int32_t eval_threads = 1;

    void check() const;  // throws ConfigError
};

/// Per-coordinate sum of squared gradients; update rule
///   acc += g^2 ; theta -= lr * g / (sqrt(acc) + eps)
struct AdagradState {
    double lr = 0.01;
    double eps = 1e-8;
    std::vector<double> accP, accQ, accW, accB, accH;
};

AdagradState make_adagrad(const FismParams& params, double lr, double eps = 1e-8);
AdagradState make_adagrad(const NaisParams& params, double lr, double eps = 1e-8);

void adagrad_step(AdagradState& state, FismParams& params, const GradientSet& grads);
void adagrad_step(AdagradState& state, NaisParams& params, const GradientSet& grads);

// Gaussian(0, 0.01) initialization, deterministic for a given seed.
FismParams init_fism_params(std::int32_t num_items, std::int32_t k, double alpha,
                            std::uint64_t seed);
NaisParams init_nais_params(std::int32_t num_items, std::int32_t k, std::int32_t a,
                            AttentionVariant variant, double beta, std::uint64_t seed);

struct EpochLog {
    std::int32_t epoch = 0;
    double mean_loss = 0.0;
    double seconds = 0.0;
    double hr = -1.0;    // < 0 when evaluation was disabled for the epoch
    double ndcg = -1.0;
};

// epoch<TAB>loss<TAB>seconds<TAB>hr<TAB>ndcg, metric fields blank when disabled
void print_epoch_log(std::ostream& os, const EpochLog& log);

struct FismTrainResult {
    FismParams params;
    std::vector<EpochLog> epochs;
};

struct NaisTrainResult {
    NaisParams params;
    std::vector<EpochLog> epochs;
};

/// Adagrad over per-user mini-batches with per-instance updates. Negatives
/// are resampled each epoch from seed + epoch; the batch order is shuffled
/// with mix_seed(seed + epoch). Bit-for-bit deterministic for a fixed config.
FismTrainResult train_fism(const Dataset& dataset, const TrainConfig& cfg,
                           std::ostream* log_stream = nullptr);

/// Same loop for NAIS. When `pretrain` is given, its item embeddings replace
/// the random initialization; the attention net stays freshly Gaussian.
NaisTrainResult train_nais(const Dataset& dataset, const TrainConfig& cfg,
                           const FismParams* pretrain = nullptr,
                           std::ostream* log_stream = nullptr);

}  // namespace itemsim
