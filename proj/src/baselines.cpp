#include "itemsim/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace itemsim {

std::vector<double> pop_scores(const Dataset& dataset) {
    std::vector<double> scores(static_cast<size_t>(dataset.num_items), 0.0);
    for (const auto& history : dataset.histories) {
        for (ItemId i : history) scores[static_cast<size_t>(i)] += 1.0;
    }
    return scores;
}

double ItemSimMatrix::at(ItemId i, ItemId j) const {
    if (i == j) return 0.0;
    const auto& row = rows[static_cast<size_t>(i)];
    const auto it = std::lower_bound(row.begin(), row.end(), j,
                                     [](const auto& entry, ItemId id) { return entry.first < id; });
    if (it == row.end() || it->first != j) return 0.0;
    return it->second;
}

ItemSimMatrix itemknn_similarities(const Dataset& dataset) {
    const auto num_items = static_cast<size_t>(dataset.num_items);

    std::vector<std::int32_t> item_counts(num_items, 0);
    std::vector<std::vector<UserId>> users_of(num_items);
    for (UserId u = 0; u < dataset.num_users; ++u) {
        for (ItemId i : dataset.histories[static_cast<size_t>(u)]) {
            ++item_counts[static_cast<size_t>(i)];
            users_of[static_cast<size_t>(i)].push_back(u);
        }
    }

    ItemSimMatrix sims;
    sims.num_items = dataset.num_items;
    sims.rows.resize(num_items);

    // co-occurrence counts accumulated one item row at a time; only the
    // scratch row is dense, the stored matrix keeps nonzero entries only
    std::vector<std::int32_t> scratch(num_items, 0);
    std::vector<ItemId> touched;
    for (size_t i = 0; i < num_items; ++i) {
        if (item_counts[i] == 0) continue;
        touched.clear();
        for (UserId u : users_of[i]) {
            for (ItemId j : dataset.histories[static_cast<size_t>(u)]) {
                const auto jj = static_cast<size_t>(j);
                if (jj == i) continue;
                if (scratch[jj] == 0) touched.push_back(j);
                ++scratch[jj];
            }
        }
        auto& row = sims.rows[i];
        row.reserve(touched.size());
        std::sort(touched.begin(), touched.end());
        const double denom_i = static_cast<double>(item_counts[i]);
        for (ItemId j : touched) {
            const auto jj = static_cast<size_t>(j);
            const double s = static_cast<double>(scratch[jj]) /
                             std::sqrt(denom_i * static_cast<double>(item_counts[jj]));
            row.emplace_back(j, s);
            scratch[jj] = 0;
        }
    }
    return sims;
}

double itemknn_predict(const ItemSimMatrix& sims, const Dataset& dataset, UserId user,
                       ItemId target, std::int32_t neighbors) {
    const auto& row = sims.rows[static_cast<size_t>(target)];
    const auto& history = dataset.histories[static_cast<size_t>(user)];

    if (neighbors <= 0) {
        double score = 0.0;
        for (ItemId j : history) score += sims.at(target, j);
        return score;
    }

    // truncated variant: only the target's top-k most similar items count
    std::vector<std::pair<ItemId, double>> top(row.begin(), row.end());
    const size_t keep = std::min<size_t>(static_cast<size_t>(neighbors), top.size());
    std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(keep), top.end(),
                      [](const auto& lhs, const auto& rhs) {
                          if (lhs.second != rhs.second) return lhs.second > rhs.second;
                          return lhs.first < rhs.first;
                      });
    double score = 0.0;
    for (size_t idx = 0; idx < keep; ++idx) {
        const auto [j, s] = top[idx];
        if (std::find(history.begin(), history.end(), j) != history.end()) score += s;
    }
    return score;
}

Scorer make_pop_scorer(const std::vector<double>& scores) {
    return [&scores](UserId, ItemId item) { return scores[static_cast<size_t>(item)]; };
}

Scorer make_itemknn_scorer(const ItemSimMatrix& sims, const Dataset& dataset,
                           std::int32_t neighbors) {
    return [&sims, &dataset, neighbors](UserId user, ItemId item) {
        return itemknn_predict(sims, dataset, user, item, neighbors);
    };
}

}  // namespace itemsim
