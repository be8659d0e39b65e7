#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "itemsim/common.hpp"

namespace itemsim {

/// Implicit-feedback dataset in leave-one-out form: per-user training
/// histories, one held-out test item per user, and (optionally) 99
/// pre-sampled ranking negatives per user.
struct Dataset {
    std::int32_t num_users = 0;
    std::int32_t num_items = 0;
    std::vector<std::vector<ItemId>> histories;       // insertion order, no duplicates
    std::vector<ItemId> test_items;                   // test_items[u] = held-out item
    std::vector<std::vector<ItemId>> eval_negatives;  // empty, or 99 ids per user

    bool in_history(UserId user, ItemId item) const;

    // training interactions + one held-out interaction per user
    std::int64_t interaction_count() const;

    // sorted per-user copies for O(log n) membership; call after edits
    void build_membership_index();

    // throws ConsistencyError on any invariant violation
    void validate() const;

  private:
    std::vector<std::vector<ItemId>> sorted_histories_;
};

struct TrainInstance {
    UserId user;
    ItemId item;
    std::int32_t label;  // 1 = observed interaction, 0 = sampled negative
};

struct MiniBatch {
    UserId user;
    std::vector<TrainInstance> instances;
};

struct Interaction {
    UserId user;
    ItemId item;
    std::int64_t timestamp;
};

/// Parse the processed NCF-style file triple (train/test/negatives).
/// U and I are inferred as max id + 1 across the three files.
Dataset load_ncf_dataset(const std::string& train_path, const std::string& test_path,
                         const std::string& negatives_path);

struct SplitResult {
    std::vector<std::vector<ItemId>> histories;
    std::vector<std::pair<UserId, ItemId>> test_pairs;
};

/// Hold out each user's latest interaction (ties broken by largest item id).
/// Ids are assumed 0-based dense; run remap_to_dense first if they are not.
SplitResult leave_one_out_split(std::span<const Interaction> interactions);

struct RemapResult {
    std::vector<Interaction> interactions;
    std::vector<std::int64_t> user_ids;  // dense id -> original id
    std::vector<std::int64_t> item_ids;
};

/// Compact sparse user/item ids to dense 0-based ranges (first-appearance order).
RemapResult remap_to_dense(std::span<const Interaction> interactions);

/// One positive plus `ratio` uniform negatives per training interaction.
/// Negatives are drawn with replacement from items outside the user's
/// history; the held-out test item is not excluded from the pool.
std::vector<TrainInstance> sample_negatives(const Dataset& dataset, std::int32_t ratio,
                                            std::uint64_t seed);

/// Group instances per user and emit the groups in a seeded random order.
/// Within a batch the instances keep their original relative order.
std::vector<MiniBatch> user_minibatches(std::span<const TrainInstance> instances,
                                        std::uint64_t seed);

struct ValidationSplit {
    Dataset train;                         // histories minus the validation items
    std::vector<ItemId> validation_items;  // one per user
};

/// Draw one validation interaction per user from its training history.
/// Requires every history to hold at least 2 items.
ValidationSplit holdout_validation(const Dataset& dataset, std::uint64_t seed);

}  // namespace itemsim
