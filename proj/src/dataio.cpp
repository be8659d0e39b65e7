#include "itemsim/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <unordered_map>

namespace itemsim {

bool Dataset::in_history(UserId user, ItemId item) const {
    const auto& sorted = sorted_histories_[static_cast<size_t>(user)];
    return std::binary_search(sorted.begin(), sorted.end(), item);
}

std::int64_t Dataset::interaction_count() const {
    std::int64_t total = num_users;  // one held-out interaction per user
    for (const auto& h : histories) total += static_cast<std::int64_t>(h.size());
    return total;
}

void Dataset::build_membership_index() {
    sorted_histories_.resize(histories.size());
    for (size_t u = 0; u < histories.size(); ++u) {
        sorted_histories_[u] = histories[u];
        std::sort(sorted_histories_[u].begin(), sorted_histories_[u].end());
    }
}

void Dataset::validate() const {
    if (static_cast<std::int32_t>(histories.size()) != num_users ||
        static_cast<std::int32_t>(test_items.size()) != num_users) {
        throw ConsistencyError("dataset arrays do not cover all " + std::to_string(num_users) +
                               " users");
    }
    for (UserId u = 0; u < num_users; ++u) {
        const auto& h = histories[static_cast<size_t>(u)];
        if (h.empty()) {
            throw ConsistencyError("user " + std::to_string(u) + " has no training history");
        }
        for (ItemId i : h) {
            if (i < 0 || i >= num_items) {
                throw ConsistencyError("history item " + std::to_string(i) + " of user " +
                                       std::to_string(u) + " out of range");
            }
        }
        auto sorted = h;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw ConsistencyError("duplicate history item for user " + std::to_string(u));
        }
        const ItemId test = test_items[static_cast<size_t>(u)];
        if (test < 0 || test >= num_items) {
            throw ConsistencyError("test item of user " + std::to_string(u) + " out of range");
        }
        if (std::binary_search(sorted.begin(), sorted.end(), test)) {
            throw ConsistencyError("test item " + std::to_string(test) +
                                   " appears in the history of user " + std::to_string(u));
        }
        if (!eval_negatives.empty()) {
            const auto& negs = eval_negatives[static_cast<size_t>(u)];
            if (negs.size() != 99) {
                throw ConsistencyError("user " + std::to_string(u) + " has " +
                                       std::to_string(negs.size()) + " evaluation negatives");
            }
            for (ItemId n : negs) {
                if (n < 0 || n >= num_items) {
                    throw ConsistencyError("evaluation negative out of range for user " +
                                           std::to_string(u));
                }
                if (n == test || std::binary_search(sorted.begin(), sorted.end(), n)) {
                    throw ConsistencyError("evaluation negative " + std::to_string(n) +
                                           " collides with history/test of user " +
                                           std::to_string(u));
                }
            }
        }
    }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    while (true) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

std::int64_t parse_int(std::string_view field, const std::string& path, size_t line_no) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected integer, got '" +
                         std::string(field) + "'");
    }
    return value;
}

// rating field is read for format validation only; feedback is binarized
void check_rating(std::string_view field, const std::string& path, size_t line_no) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected rating, got '" +
                         std::string(field) + "'");
    }
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

Dataset load_ncf_dataset(const std::string& train_path, const std::string& test_path,
                         const std::string& negatives_path) {
    std::int64_t max_user = -1;
    std::int64_t max_item = -1;

    std::vector<Interaction> train;
    {
        auto in = open_or_throw(train_path);
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            strip_cr(line);
            if (line.empty()) continue;
            const auto fields = split_fields(line);
            if (fields.size() != 4) {
                throw ParseError(train_path + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                                 std::to_string(fields.size()));
            }
            const std::int64_t u = parse_int(fields[0], train_path, line_no);
            const std::int64_t i = parse_int(fields[1], train_path, line_no);
            check_rating(fields[2], train_path, line_no);
            const std::int64_t t = parse_int(fields[3], train_path, line_no);
            if (u < 0 || i < 0) {
                throw ParseError(train_path + ":" + std::to_string(line_no) + ": negative id");
            }
            max_user = std::max(max_user, u);
            max_item = std::max(max_item, i);
            train.push_back({static_cast<UserId>(u), static_cast<ItemId>(i), t});
        }
    }

    std::vector<std::pair<UserId, ItemId>> test_pairs;
    {
        auto in = open_or_throw(test_path);
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            strip_cr(line);
            if (line.empty()) continue;
            const auto fields = split_fields(line);
            if (fields.size() != 4) {
                throw ParseError(test_path + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                                 std::to_string(fields.size()));
            }
            const std::int64_t u = parse_int(fields[0], test_path, line_no);
            const std::int64_t i = parse_int(fields[1], test_path, line_no);
            check_rating(fields[2], test_path, line_no);
            parse_int(fields[3], test_path, line_no);
            if (u < 0 || i < 0) {
                throw ParseError(test_path + ":" + std::to_string(line_no) + ": negative id");
            }
            max_user = std::max(max_user, u);
            max_item = std::max(max_item, i);
            test_pairs.emplace_back(static_cast<UserId>(u), static_cast<ItemId>(i));
        }
    }

    // negatives: "(userID,itemID)" then exactly 99 tab-separated item ids
    std::vector<std::pair<UserId, std::vector<ItemId>>> negative_lines;
    {
        auto in = open_or_throw(negatives_path);
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            strip_cr(line);
            if (line.empty()) continue;
            const auto fields = split_fields(line);
            if (fields.size() != 100) {
                throw ParseError(negatives_path + ":" + std::to_string(line_no) +
                                 ": expected a test pair plus 99 negatives, got " +
                                 std::to_string(fields.size() - 1) + " negatives");
            }
            const std::string_view head = fields[0];
            if (head.size() < 5 || head.front() != '(' || head.back() != ')') {
                throw ParseError(negatives_path + ":" + std::to_string(line_no) +
                                 ": malformed test pair '" + std::string(head) + "'");
            }
            const std::string_view inner = head.substr(1, head.size() - 2);
            const size_t comma = inner.find(',');
            if (comma == std::string_view::npos) {
                throw ParseError(negatives_path + ":" + std::to_string(line_no) +
                                 ": malformed test pair '" + std::string(head) + "'");
            }
            const std::int64_t u = parse_int(inner.substr(0, comma), negatives_path, line_no);
            const std::int64_t i = parse_int(inner.substr(comma + 1), negatives_path, line_no);
            std::vector<ItemId> negs;
            negs.reserve(99);
            for (size_t f = 1; f < fields.size(); ++f) {
                const std::int64_t n = parse_int(fields[f], negatives_path, line_no);
                if (n < 0) {
                    throw ParseError(negatives_path + ":" + std::to_string(line_no) + ": negative id");
                }
                max_item = std::max(max_item, n);
                negs.push_back(static_cast<ItemId>(n));
            }
            max_user = std::max(max_user, u);
            max_item = std::max(max_item, i);

            // the parenthesized pair must match the test file
            bool found = false;
            for (const auto& [tu, ti] : test_pairs) {
                if (tu == u) {
                    if (ti != i) {
                        throw ConsistencyError(negatives_path + ":" + std::to_string(line_no) +
                                               ": pair (" + std::to_string(u) + "," + std::to_string(i) +
                                               ") disagrees with test item " + std::to_string(ti));
                    }
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw ConsistencyError(negatives_path + ":" + std::to_string(line_no) +
                                       ": no test line for user " + std::to_string(u));
            }
            negative_lines.emplace_back(static_cast<UserId>(u), std::move(negs));
        }
    }

    Dataset ds;
    ds.num_users = static_cast<std::int32_t>(max_user + 1);
    ds.num_items = static_cast<std::int32_t>(max_item + 1);
    ds.histories.resize(static_cast<size_t>(ds.num_users));
    ds.test_items.assign(static_cast<size_t>(ds.num_users), -1);
    ds.eval_negatives.resize(static_cast<size_t>(ds.num_users));

    for (const auto& it : train) {
        ds.histories[static_cast<size_t>(it.user)].push_back(it.item);
    }
    for (const auto& [u, i] : test_pairs) {
        if (ds.test_items[static_cast<size_t>(u)] != -1) {
            throw ConsistencyError(test_path + ": user " + std::to_string(u) +
                                   " has more than one test line");
        }
        ds.test_items[static_cast<size_t>(u)] = i;
    }
    for (UserId u = 0; u < ds.num_users; ++u) {
        if (ds.test_items[static_cast<size_t>(u)] == -1) {
            throw ConsistencyError(test_path + ": missing test line for user " + std::to_string(u));
        }
    }
    for (auto& [u, negs] : negative_lines) {
        if (!ds.eval_negatives[static_cast<size_t>(u)].empty()) {
            throw ConsistencyError(negatives_path + ": user " + std::to_string(u) +
                                   " has more than one negatives line");
        }
        ds.eval_negatives[static_cast<size_t>(u)] = std::move(negs);
    }
    for (UserId u = 0; u < ds.num_users; ++u) {
        if (ds.eval_negatives[static_cast<size_t>(u)].empty()) {
            throw ConsistencyError(negatives_path + ": missing negatives line for user " +
                                   std::to_string(u));
        }
    }

    ds.build_membership_index();
    ds.validate();
    return ds;
}

SplitResult leave_one_out_split(std::span<const Interaction> interactions) {
    std::int64_t max_user = -1;
    for (const auto& it : interactions) {
        max_user = std::max<std::int64_t>(max_user, it.user);
    }

    SplitResult result;
    result.histories.resize(static_cast<size_t>(max_user + 1));

    // latest interaction per user; timestamp ties broken by largest item id
    std::vector<std::int64_t> best_time(static_cast<size_t>(max_user + 1), INT64_MIN);
    std::vector<ItemId> best_item(static_cast<size_t>(max_user + 1), -1);
    std::vector<std::int64_t> counts(static_cast<size_t>(max_user + 1), 0);
    for (const auto& it : interactions) {
        const auto u = static_cast<size_t>(it.user);
        ++counts[u];
        if (it.timestamp > best_time[u] || (it.timestamp == best_time[u] && it.item > best_item[u])) {
            best_time[u] = it.timestamp;
            best_item[u] = it.item;
        }
    }
    for (size_t u = 0; u < counts.size(); ++u) {
        if (counts[u] == 1) {
            throw ConsistencyError("user " + std::to_string(u) +
                                   " has a single interaction; cannot hold one out");
        }
    }

    std::vector<bool> held_out(static_cast<size_t>(max_user + 1), false);
    for (const auto& it : interactions) {
        const auto u = static_cast<size_t>(it.user);
        if (!held_out[u] && it.timestamp == best_time[u] && it.item == best_item[u]) {
            held_out[u] = true;  // hold out a single copy
            continue;
        }
        result.histories[u].push_back(it.item);
    }
    for (size_t u = 0; u < counts.size(); ++u) {
        if (counts[u] > 0) {
            result.test_pairs.emplace_back(static_cast<UserId>(u), best_item[u]);
        }
    }
    return result;
}

RemapResult remap_to_dense(std::span<const Interaction> interactions) {
    RemapResult out;
    std::unordered_map<std::int64_t, UserId> user_map;
    std::unordered_map<std::int64_t, ItemId> item_map;
    out.interactions.reserve(interactions.size());
    for (const auto& it : interactions) {
        auto [uit, unew] = user_map.try_emplace(it.user, static_cast<UserId>(user_map.size()));
        if (unew) out.user_ids.push_back(it.user);
        auto [iit, inew] = item_map.try_emplace(it.item, static_cast<ItemId>(item_map.size()));
        if (inew) out.item_ids.push_back(it.item);
        out.interactions.push_back({uit->second, iit->second, it.timestamp});
    }
    return out;
}

std::vector<TrainInstance> sample_negatives(const Dataset& dataset, std::int32_t ratio,
                                            std::uint64_t seed) {
    if (ratio < 0) throw ConfigError("negative ratio must be >= 0");
    Rng rng(seed);
    std::vector<TrainInstance> out;
    std::int64_t total = 0;
    for (const auto& h : dataset.histories) total += static_cast<std::int64_t>(h.size());
    out.reserve(static_cast<size_t>(total * (ratio + 1)));

    for (UserId u = 0; u < dataset.num_users; ++u) {
        const auto& history = dataset.histories[static_cast<size_t>(u)];
        if (ratio > 0 && static_cast<std::int64_t>(history.size()) >= dataset.num_items) {
            throw ConsistencyError("user " + std::to_string(u) +
                                   " has interacted with every item; no negative exists");
        }
        for (ItemId pos : history) {
            out.push_back({u, pos, 1});
            for (std::int32_t x = 0; x < ratio; ++x) {
                ItemId neg;
                do {
                    neg = static_cast<ItemId>(rng.uniform_below(static_cast<std::uint64_t>(dataset.num_items)));
                } while (dataset.in_history(u, neg));
                out.push_back({u, neg, 0});
            }
        }
    }
    return out;
}

std::vector<MiniBatch> user_minibatches(std::span<const TrainInstance> instances,
                                        std::uint64_t seed) {
    std::int64_t max_user = -1;
    for (const auto& ins : instances) max_user = std::max<std::int64_t>(max_user, ins.user);

    std::vector<std::vector<TrainInstance>> buckets(static_cast<size_t>(max_user + 1));
    for (const auto& ins : instances) buckets[static_cast<size_t>(ins.user)].push_back(ins);

    std::vector<UserId> users;
    for (std::int64_t u = 0; u <= max_user; ++u) {
        if (!buckets[static_cast<size_t>(u)].empty()) users.push_back(static_cast<UserId>(u));
    }

    // Fisher-Yates over the user list
    Rng rng(seed);
    for (size_t i = users.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_below(i));
        std::swap(users[i - 1], users[j]);
    }

    std::vector<MiniBatch> batches;
    batches.reserve(users.size());
    for (UserId u : users) {
        batches.push_back({u, std::move(buckets[static_cast<size_t>(u)])});
    }
    return batches;
}

ValidationSplit holdout_validation(const Dataset& dataset, std::uint64_t seed) {
    Rng rng(seed);
    ValidationSplit split;
    split.train = dataset;
    split.validation_items.resize(static_cast<size_t>(dataset.num_users));
    for (UserId u = 0; u < dataset.num_users; ++u) {
        auto& history = split.train.histories[static_cast<size_t>(u)];
        if (history.size() < 2) {
            throw ConsistencyError("user " + std::to_string(u) +
                                   " needs >= 2 training items for a validation holdout");
        }
        const size_t pick = static_cast<size_t>(rng.uniform_below(history.size()));
        split.validation_items[static_cast<size_t>(u)] = history[pick];
        history.erase(history.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    split.train.build_membership_index();
    return split;
}

}  // namespace itemsim
