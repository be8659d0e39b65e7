#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "itemsim/dataio.hpp"
#include "itemsim/evaluator.hpp"

namespace itemsim {

/// score(i) = number of training interactions item i appears in
std::vector<double> pop_scores(const Dataset& dataset);

/// Sparse symmetric cosine similarities over binary user-interaction
/// vectors; the diagonal is zero and zero entries are absent.
struct ItemSimMatrix {
    std::int32_t num_items = 0;
    std::vector<std::vector<std::pair<ItemId, double>>> rows;  // sorted by item id

    double at(ItemId i, ItemId j) const;  // 0 when absent or i == j
};

ItemSimMatrix itemknn_similarities(const Dataset& dataset);

/// Sum of similarities between the target and the user's history (the
/// target itself contributes nothing). `neighbors` > 0 restricts the sum
/// to the target's top-k most similar items; 0 means all neighbors.
double itemknn_predict(const ItemSimMatrix& sims, const Dataset& dataset, UserId user,
                       ItemId target, std::int32_t neighbors = 0);

Scorer make_pop_scorer(const std::vector<double>& scores);
Scorer make_itemknn_scorer(const ItemSimMatrix& sims, const Dataset& dataset,
                           std::int32_t neighbors = 0);

}  // namespace itemsim
