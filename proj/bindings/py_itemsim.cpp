// Python bindings for the itemsim core: dataset handling, FISM/NAIS
// training, scoring, online refresh, evaluation, and model persistence.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "itemsim/baselines.hpp"
#include "itemsim/dataio.hpp"
#include "itemsim/evaluator.hpp"
#include "itemsim/gradients.hpp"
#include "itemsim/model_store.hpp"
#include "itemsim/trainer.hpp"

namespace py = pybind11;
using namespace itemsim;

namespace {

py::array_t<double> to_array(const std::vector<double>& values, size_t rows, size_t cols) {
    py::array_t<double> out({rows, cols});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

std::vector<Interaction> interactions_from_tuples(
    const std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>>& raw) {
    std::vector<Interaction> xs;
    xs.reserve(raw.size());
    for (const auto& [u, i, t] : raw) {
        xs.push_back({static_cast<UserId>(u), static_cast<ItemId>(i), t});
    }
    return xs;
}

}  // namespace

PYBIND11_MODULE(itemsim, m) {
    m.doc() = "Item-based collaborative filtering: FISM and NAIS with smoothed-softmax "
              "attention, trained by hand-derived gradients.";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ConsistencyError>(m, "ConsistencyError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("num_users", &Dataset::num_users)
        .def_readonly("num_items", &Dataset::num_items)
        .def("history", [](const Dataset& ds, UserId u) { return ds.histories.at(static_cast<size_t>(u)); })
        .def("test_item", [](const Dataset& ds, UserId u) { return ds.test_items.at(static_cast<size_t>(u)); })
        .def("negatives", [](const Dataset& ds, UserId u) { return ds.eval_negatives.at(static_cast<size_t>(u)); })
        .def("in_history", &Dataset::in_history)
        .def("interaction_count", &Dataset::interaction_count)
        .def("__repr__", [](const Dataset& ds) {
            std::ostringstream ss;
            ss << "Dataset(users=" << ds.num_users << ", items=" << ds.num_items
               << ", interactions=" << ds.interaction_count() << ")";
            return ss.str();
        });

    m.def("load_ncf_dataset", &load_ncf_dataset, py::arg("train_path"), py::arg("test_path"),
          py::arg("negatives_path"));

    m.def(
        "leave_one_out_split",
        [](const std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>>& raw) {
            const auto xs = interactions_from_tuples(raw);
            const auto split = leave_one_out_split(xs);
            return py::make_tuple(split.histories, split.test_pairs);
        },
        py::arg("interactions"),
        "Hold out each user's latest (user, item, timestamp) interaction; ties go to the "
        "largest item id. Returns (histories, test_pairs).");

    m.def(
        "remap_to_dense",
        [](const std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>>& raw) {
            const auto remapped = remap_to_dense(interactions_from_tuples(raw));
            std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>> out;
            out.reserve(remapped.interactions.size());
            for (const auto& it : remapped.interactions) {
                out.emplace_back(it.user, it.item, it.timestamp);
            }
            return py::make_tuple(out, remapped.user_ids, remapped.item_ids);
        },
        py::arg("interactions"));

    m.def(
        "sample_negatives",
        [](const Dataset& ds, std::int32_t ratio, std::uint64_t seed) {
            const auto instances = sample_negatives(ds, ratio, seed);
            py::array_t<std::int32_t> users(instances.size());
            py::array_t<std::int32_t> items(instances.size());
            py::array_t<std::int32_t> labels(instances.size());
            auto* u = users.mutable_data();
            auto* i = items.mutable_data();
            auto* l = labels.mutable_data();
            for (size_t idx = 0; idx < instances.size(); ++idx) {
                u[idx] = instances[idx].user;
                i[idx] = instances[idx].item;
                l[idx] = instances[idx].label;
            }
            return py::make_tuple(users, items, labels);
        },
        py::arg("dataset"), py::arg("ratio"), py::arg("seed"),
        "Per-epoch training instances as (users, items, labels) arrays.");

    m.def(
        "holdout_validation",
        [](const Dataset& ds, std::uint64_t seed) {
            auto split = holdout_validation(ds, seed);
            return py::make_tuple(std::move(split.train), split.validation_items);
        },
        py::arg("dataset"), py::arg("seed"));

    py::enum_<AttentionVariant>(m, "AttentionVariant")
        .value("concat", AttentionVariant::concat)
        .value("prod", AttentionVariant::prod);

    py::enum_<ModelKind>(m, "ModelKind")
        .value("fism", ModelKind::fism)
        .value("nais_concat", ModelKind::nais_concat)
        .value("nais_prod", ModelKind::nais_prod);

    py::class_<FismParams>(m, "FismParams")
        .def_readonly("num_items", &FismParams::num_items)
        .def_readonly("k", &FismParams::k)
        .def_readonly("alpha", &FismParams::alpha)
        .def_property_readonly("P",
                               [](const FismParams& p) {
                                   return to_array(p.P, static_cast<size_t>(p.num_items),
                                                   static_cast<size_t>(p.k));
                               })
        .def_property_readonly("Q", [](const FismParams& p) {
            return to_array(p.Q, static_cast<size_t>(p.num_items), static_cast<size_t>(p.k));
        });

    py::class_<NaisParams>(m, "NaisParams")
        .def_readonly("num_items", &NaisParams::num_items)
        .def_readonly("k", &NaisParams::k)
        .def_readonly("a", &NaisParams::a)
        .def_readonly("beta", &NaisParams::beta)
        .def_readonly("variant", &NaisParams::variant)
        .def_property_readonly("P",
                               [](const NaisParams& p) {
                                   return to_array(p.P, static_cast<size_t>(p.num_items),
                                                   static_cast<size_t>(p.k));
                               })
        .def_property_readonly("Q",
                               [](const NaisParams& p) {
                                   return to_array(p.Q, static_cast<size_t>(p.num_items),
                                                   static_cast<size_t>(p.k));
                               })
        .def_property_readonly("W",
                               [](const NaisParams& p) {
                                   return to_array(p.W, static_cast<size_t>(p.a),
                                                   static_cast<size_t>(p.input_dim()));
                               })
        .def_property_readonly("b", [](const NaisParams& p) { return to_array(p.b, 1, p.b.size()); })
        .def_property_readonly("h", [](const NaisParams& p) { return to_array(p.h, 1, p.h.size()); });

    py::class_<PredictionCache>(m, "PredictionCache")
        .def_readonly("user", &PredictionCache::user)
        .def_readonly("item", &PredictionCache::item)
        .def_readonly("n", &PredictionCache::n);

    py::class_<EpochLog>(m, "EpochLog")
        .def_readonly("epoch", &EpochLog::epoch)
        .def_readonly("mean_loss", &EpochLog::mean_loss)
        .def_readonly("seconds", &EpochLog::seconds)
        .def_readonly("hr", &EpochLog::hr)
        .def_readonly("ndcg", &EpochLog::ndcg)
        .def("__repr__", [](const EpochLog& log) {
            std::ostringstream ss;
            ss << "EpochLog(epoch=" << log.epoch << ", mean_loss=" << log.mean_loss << ")";
            return ss.str();
        });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("model", &TrainConfig::model)
        .def_readwrite("k", &TrainConfig::k)
        .def_readwrite("a", &TrainConfig::a)
        .def_readwrite("alpha", &TrainConfig::alpha)
        .def_readwrite("beta", &TrainConfig::beta)
        .def_readwrite("lambda_", &TrainConfig::lambda)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("neg_ratio", &TrainConfig::neg_ratio)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("eval_every", &TrainConfig::eval_every)
        .def_readwrite("eval_topk", &TrainConfig::eval_topk)
        .def_readwrite("eval_threads", &TrainConfig::eval_threads);

    m.def(
        "train_fism",
        [](const Dataset& ds, const TrainConfig& cfg) {
            auto result = train_fism(ds, cfg);
            return std::make_pair(std::move(result.params), std::move(result.epochs));
        },
        py::arg("dataset"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());

    m.def(
        "train_nais",
        [](const Dataset& ds, const TrainConfig& cfg, const FismParams* pretrain) {
            auto result = train_nais(ds, cfg, pretrain);
            return std::make_pair(std::move(result.params), std::move(result.epochs));
        },
        py::arg("dataset"), py::arg("config"), py::arg("pretrain") = nullptr,
        py::call_guard<py::gil_scoped_release>());

    m.def("fism_predict",
          [](const FismParams& p, const std::vector<ItemId>& history, ItemId target) {
              return fism_predict(p, history, target);
          });
    m.def("nais_predict",
          [](const NaisParams& p, const std::vector<ItemId>& history, ItemId target) {
              const auto pred = nais_predict(p, history, target);
              return py::make_tuple(pred.score, pred.cache);
          },
          "Returns (score, cache); the cache supports refresh_prediction.");
    m.def("refresh_prediction",
          [](const NaisParams& p, PredictionCache& cache, ItemId item) {
              return refresh_prediction(p, cache, item);
          },
          py::arg("params"), py::arg("cache"), py::arg("new_item"),
          "Fold one new interaction into the cache in O(a*k); returns the new score.");
    m.def("attention_logit", &attention_logit);
    m.def("attention_weights",
          [](const NaisParams& p, const std::vector<ItemId>& history, ItemId target) {
              const auto w = attention_weights(p, history, target);
              return py::make_tuple(w.items, w.logits, w.weights);
          });

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("K", &EvalReport::K)
        .def_readonly("mean_hr", &EvalReport::mean_hr)
        .def_readonly("mean_ndcg", &EvalReport::mean_ndcg)
        .def_readonly("per_user_hr", &EvalReport::per_user_hr)
        .def_readonly("per_user_ndcg", &EvalReport::per_user_ndcg)
        .def("__repr__", [](const EvalReport& r) {
            std::ostringstream ss;
            ss << "EvalReport(HR@" << r.K << "=" << r.mean_hr << ", NDCG@" << r.K << "="
               << r.mean_ndcg << ")";
            return ss.str();
        });

    m.def(
        "evaluate_fism",
        [](const FismParams& params, const Dataset& ds, std::int32_t k, std::int32_t threads) {
            return evaluate(make_fism_scorer(params, ds), ds, k, threads);
        },
        py::arg("params"), py::arg("dataset"), py::arg("k") = 10, py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "evaluate_nais",
        [](const NaisParams& params, const Dataset& ds, std::int32_t k, std::int32_t threads) {
            return evaluate(make_nais_scorer(params, ds), ds, k, threads);
        },
        py::arg("params"), py::arg("dataset"), py::arg("k") = 10, py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "evaluate_pop",
        [](const Dataset& ds, std::int32_t k) {
            const auto scores = pop_scores(ds);
            return evaluate(make_pop_scorer(scores), ds, k);
        },
        py::arg("dataset"), py::arg("k") = 10);
    m.def(
        "evaluate_itemknn",
        [](const Dataset& ds, std::int32_t k, std::int32_t neighbors) {
            const auto sims = itemknn_similarities(ds);
            return evaluate(make_itemknn_scorer(sims, ds, neighbors), ds, k);
        },
        py::arg("dataset"), py::arg("k") = 10, py::arg("neighbors") = 0,
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "evaluate_scorer",
        [](const py::function& scorer, const Dataset& ds, std::int32_t k) {
            // python callables cannot fan out across threads
            const Scorer wrapped = [&scorer](UserId u, ItemId i) {
                return scorer(u, i).cast<double>();
            };
            return evaluate(wrapped, ds, k, 1);
        },
        py::arg("scorer"), py::arg("dataset"), py::arg("k") = 10);

    m.def("pop_scores", &pop_scores);
    m.def("paired_ttest",
          [](const std::vector<double>& a, const std::vector<double>& b) {
              return paired_ttest(a, b);
          },
          "Two-sided one-sample paired t-test on b - a; returns the p-value.");

    m.def(
        "explain",
        [](const NaisParams& params, const Dataset& ds, UserId user, ItemId target) {
            const auto result = explain(params, ds, user, target);
            return py::make_tuple(result.weights, result.probability);
        },
        py::arg("params"), py::arg("dataset"), py::arg("user"), py::arg("target"),
        "L1-normalized attention breakdown plus sigmoid(score).");

    m.def(
        "attention_stats",
        [](const NaisParams& params, const Dataset& ds) {
            const auto stats = attention_stats(params, ds);
            py::list out;
            for (const auto& s : stats) {
                out.append(py::make_tuple(s.user, s.item, s.mean, s.variance));
            }
            return out;
        },
        py::arg("params"), py::arg("dataset"));

    m.def("save_fism_model",
          [](const FismParams& params, const std::string& path) { save_model(params, path); });
    m.def("save_nais_model",
          [](const NaisParams& params, const std::string& path) { save_model(params, path); });
    m.def("load_fism_model", &load_fism_model);
    m.def("load_nais_model", &load_nais_model);

    m.def("init_fism_params", &init_fism_params, py::arg("num_items"), py::arg("k"),
          py::arg("alpha"), py::arg("seed"));
    m.def("init_nais_params", &init_nais_params, py::arg("num_items"), py::arg("k"), py::arg("a"),
          py::arg("variant"), py::arg("beta"), py::arg("seed"));

    m.attr("__version__") = "0.1.0";
}
