// Command-line driver: train / eval / explain / stats / refresh-demo.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error, 3 training
// divergence, 4 unknown user or item.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "itemsim/baselines.hpp"
#include "itemsim/dataio.hpp"
#include "itemsim/evaluator.hpp"
#include "itemsim/model_store.hpp"
#include "itemsim/trainer.hpp"

using namespace itemsim;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitUnknownId = 4;

struct DatasetArgs {
    std::string train_path;
    std::string test_path;
    std::string negatives_path;

    void attach(CLI::App* cmd) {
        cmd->add_option("--train", train_path, "training interactions (user\\titem\\trating\\tts)")
            ->required();
        cmd->add_option("--test", test_path, "held-out test interactions, one line per user")
            ->required();
        cmd->add_option("--negatives", negatives_path, "per-user evaluation negatives")->required();
    }

    Dataset load() const { return load_ncf_dataset(train_path, test_path, negatives_path); }
};

void echo_kv(const std::string& key, const std::string& value) {
    std::cout << "# " << key << "=" << value << "\n";
}

std::string fmt_double(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

void echo_dataset(const DatasetArgs& args, const Dataset& ds) {
    echo_kv("train", args.train_path);
    echo_kv("test", args.test_path);
    echo_kv("negatives", args.negatives_path);
    echo_kv("num_users", std::to_string(ds.num_users));
    echo_kv("num_items", std::to_string(ds.num_items));
    echo_kv("interactions", std::to_string(ds.interaction_count()));
}

void print_metrics(const EvalReport& report) {
    std::cout << std::setprecision(6) << std::fixed;
    std::cout << "HR@" << report.K << '\t' << report.mean_hr << '\n';
    std::cout << "NDCG@" << report.K << '\t' << report.mean_ndcg << '\n';
    std::cout.unsetf(std::ios::fixed);
}

int run_train(const DatasetArgs& data_args, TrainConfig cfg, const std::string& model_name,
              const std::string& pretrain_path, const std::string& out_path,
              std::optional<std::uint64_t> validation_seed) {
    cfg.model = model_kind_from_string(model_name);
    const Dataset full = data_args.load();

    echo_kv("command", "train");
    echo_dataset(data_args, full);
    echo_kv("model", model_name);
    echo_kv("k", std::to_string(cfg.k));
    echo_kv("attention_factor", std::to_string(cfg.a));
    echo_kv("alpha", fmt_double(cfg.alpha));
    echo_kv("beta", fmt_double(cfg.beta));
    echo_kv("lambda", fmt_double(cfg.lambda));
    echo_kv("lr", fmt_double(cfg.lr));
    echo_kv("epochs", std::to_string(cfg.epochs));
    echo_kv("neg_ratio", std::to_string(cfg.neg_ratio));
    echo_kv("topk", std::to_string(cfg.eval_topk));
    echo_kv("eval_every", std::to_string(cfg.eval_every));
    echo_kv("threads", std::to_string(cfg.eval_threads));
    echo_kv("seed", std::to_string(cfg.seed));
    // derived seeds, epoch e counted from 0
    echo_kv("sampling_seed", "seed+e");
    echo_kv("shuffle_seed", "mix64(seed+e)");
    if (!pretrain_path.empty()) echo_kv("pretrain", pretrain_path);
    if (!out_path.empty()) echo_kv("out", out_path);
    if (validation_seed) echo_kv("validation_seed", std::to_string(*validation_seed));

    std::optional<ValidationSplit> validation;
    const Dataset* train_set = &full;
    if (validation_seed) {
        validation = holdout_validation(full, *validation_seed);
        train_set = &validation->train;
    }

    if (cfg.model == ModelKind::fism) {
        if (!pretrain_path.empty()) {
            std::cerr << "error: --pretrain only applies to nais models\n";
            return kExitUsage;
        }
        const auto result = train_fism(*train_set, cfg, &std::cout);
        if (!out_path.empty()) save_model(result.params, out_path);
        if (validation) {
            const auto negatives = sample_eval_negatives(
                *train_set, validation->validation_items, 99, mix_seed(*validation_seed));
            const auto report = evaluate_pairs(make_fism_scorer(result.params, *train_set),
                                               validation->validation_items, negatives,
                                               cfg.eval_topk, cfg.eval_threads);
            std::cout << "VAL-";
            print_metrics(report);
        }
    } else {
        std::optional<FismParams> pretrain;
        if (!pretrain_path.empty()) pretrain = load_fism_model(pretrain_path);
        const auto result =
            train_nais(*train_set, cfg, pretrain ? &*pretrain : nullptr, &std::cout);
        if (!out_path.empty()) save_model(result.params, out_path);
        if (validation) {
            const auto negatives = sample_eval_negatives(
                *train_set, validation->validation_items, 99, mix_seed(*validation_seed));
            const auto report = evaluate_pairs(make_nais_scorer(result.params, *train_set),
                                               validation->validation_items, negatives,
                                               cfg.eval_topk, cfg.eval_threads);
            std::cout << "VAL-";
            print_metrics(report);
        }
    }
    return 0;
}

int run_eval(const DatasetArgs& data_args, const std::string& model_path,
             const std::string& baseline, std::int32_t neighbors, std::int32_t topk,
             std::int32_t threads) {
    const Dataset ds = data_args.load();
    echo_kv("command", "eval");
    echo_dataset(data_args, ds);
    echo_kv("topk", std::to_string(topk));
    echo_kv("threads", std::to_string(threads));

    if (!baseline.empty()) {
        echo_kv("baseline", baseline);
        if (baseline == "pop") {
            const auto scores = pop_scores(ds);
            print_metrics(evaluate(make_pop_scorer(scores), ds, topk, threads));
            return 0;
        }
        echo_kv("neighbors", neighbors > 0 ? std::to_string(neighbors) : "all");
        const auto sims = itemknn_similarities(ds);
        print_metrics(evaluate(make_itemknn_scorer(sims, ds, neighbors), ds, topk, threads));
        return 0;
    }

    echo_kv("model_file", model_path);
    const auto loaded = load_model(model_path);
    if (const auto* fism = std::get_if<FismParams>(&loaded)) {
        if (fism->num_items != ds.num_items) {
            throw ConfigError("model holds " + std::to_string(fism->num_items) +
                              " items, dataset has " + std::to_string(ds.num_items));
        }
        echo_kv("model", "fism");
        print_metrics(evaluate(make_fism_scorer(*fism, ds), ds, topk, threads));
    } else {
        const auto& nais = std::get<NaisParams>(loaded);
        if (nais.num_items != ds.num_items) {
            throw ConfigError("model holds " + std::to_string(nais.num_items) +
                              " items, dataset has " + std::to_string(ds.num_items));
        }
        echo_kv("model", nais.variant == AttentionVariant::concat ? "nais-concat" : "nais-prod");
        print_metrics(evaluate(make_nais_scorer(nais, ds), ds, topk, threads));
    }
    return 0;
}

int run_explain(const DatasetArgs& data_args, const std::string& model_path, std::int64_t user,
                std::int64_t item) {
    const Dataset ds = data_args.load();
    echo_kv("command", "explain");
    echo_dataset(data_args, ds);
    echo_kv("model_file", model_path);
    echo_kv("user", std::to_string(user));
    echo_kv("target", std::to_string(item));

    if (user < 0 || user >= ds.num_users || item < 0 || item >= ds.num_items) {
        std::cerr << "error: unknown user " << user << " or item " << item << "\n";
        return kExitUnknownId;
    }
    const auto params = load_nais_model(model_path);
    const auto result =
        explain(params, ds, static_cast<UserId>(user), static_cast<ItemId>(item));
    std::cout << std::setprecision(6) << std::fixed;
    for (const auto& [history_item, weight] : result.weights) {
        std::cout << history_item << '\t' << weight << '\n';
    }
    std::cout << "sigma\t" << result.probability << '\n';
    return 0;
}

int run_stats(const DatasetArgs& data_args, const std::string& model_path,
              const std::string& out_path) {
    const Dataset ds = data_args.load();
    echo_kv("command", "stats");
    echo_dataset(data_args, ds);
    echo_kv("model_file", model_path);
    if (!out_path.empty()) echo_kv("out", out_path);

    const auto params = load_nais_model(model_path);
    const auto stats = attention_stats(params, ds);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw IoError("cannot write " + out_path);
        out = &file;
    }
    *out << "user,item,mean,variance\n";
    for (const auto& s : stats) {
        *out << s.user << ',' << s.item << ',' << s.mean << ',' << s.variance << '\n';
    }
    return 0;
}

int run_refresh_demo(const DatasetArgs& data_args, const std::string& model_path,
                     std::int64_t user, std::int64_t candidate, const std::string& events_path,
                     std::int32_t check_every, double tolerance) {
    Dataset ds = data_args.load();
    echo_kv("command", "refresh-demo");
    echo_dataset(data_args, ds);
    echo_kv("model_file", model_path);
    echo_kv("user", std::to_string(user));
    echo_kv("candidate", std::to_string(candidate));
    echo_kv("events", events_path);
    echo_kv("check_every", std::to_string(check_every));
    echo_kv("tolerance", fmt_double(tolerance));

    if (user < 0 || user >= ds.num_users || candidate < 0 || candidate >= ds.num_items) {
        std::cerr << "error: unknown user " << user << " or item " << candidate << "\n";
        return kExitUnknownId;
    }
    const auto params = load_nais_model(model_path);
    const auto watched = static_cast<UserId>(user);
    const auto target = static_cast<ItemId>(candidate);

    auto& history = ds.histories[static_cast<size_t>(watched)];
    auto pred = nais_predict(params, history, target);
    pred.cache.user = watched;
    double score = pred.score;

    std::ifstream events(events_path);
    if (!events) throw IoError("cannot open " + events_path);

    std::int64_t refreshes = 0, checks = 0, skipped = 0, failures = 0;
    double max_deviation = 0.0;
    std::string line;
    size_t line_no = 0;
    while (std::getline(events, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::int64_t event_user = 0, event_item = 0;
        if (!(fields >> event_user >> event_item)) {
            throw ParseError(events_path + ":" + std::to_string(line_no) + ": expected 'user item'");
        }
        if (event_user != watched) continue;
        if (event_item < 0 || event_item >= ds.num_items) {
            std::cerr << "error: unknown item " << event_item << " at line " << line_no << "\n";
            return kExitUnknownId;
        }
        const auto item = static_cast<ItemId>(event_item);
        if (item == target || std::find(history.begin(), history.end(), item) != history.end()) {
            ++skipped;  // self-similarity or duplicate interaction
            continue;
        }
        score = refresh_prediction(params, pred.cache, item);
        history.push_back(item);
        ++refreshes;
        if (check_every > 0 && refreshes % check_every == 0) {
            const double scratch = nais_predict(params, history, target).score;
            const double deviation = std::abs(score - scratch);
            max_deviation = std::max(max_deviation, deviation);
            ++checks;
            if (deviation > tolerance * std::max(1.0, std::abs(scratch))) {
                ++failures;
                std::cerr << "check failed after " << refreshes << " refreshes: cached " << score
                          << " vs recomputed " << scratch << "\n";
            }
        }
    }

    std::cout << "refreshes\t" << refreshes << '\n';
    std::cout << "skipped\t" << skipped << '\n';
    std::cout << "checks\t" << checks << '\n';
    std::cout << "max_deviation\t" << max_deviation << '\n';
    std::cout << "final_score\t" << score << '\n';
    if (failures > 0) {
        std::cerr << failures << " of " << checks << " consistency checks failed\n";
        return kExitRuntime;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Item-based collaborative filtering: FISM and NAIS training, evaluation, and "
                 "online score refresh"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model and optionally save it");
    DatasetArgs train_data;
    train_data.attach(train_cmd);
    TrainConfig cfg;
    std::string model_name = "fism";
    std::string pretrain_path, out_path;
    std::optional<std::uint64_t> validation_seed;
    train_cmd->add_option("--model", model_name, "fism | nais-concat | nais-prod")
        ->check(CLI::IsMember({"fism", "nais-concat", "nais-prod"}));
    train_cmd->add_option("--k", cfg.k, "embedding size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--attention-factor", cfg.a, "attention hidden width")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--alpha", cfg.alpha, "FISM normalization exponent")
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--beta", cfg.beta, "softmax smoothing exponent")
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--lambda", cfg.lambda, "L2 coefficient")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--lr", cfg.lr, "Adagrad learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--epochs", cfg.epochs, "training epochs")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--neg-ratio", cfg.neg_ratio, "negatives per positive")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", cfg.seed, "base random seed");
    train_cmd->add_option("--topk", cfg.eval_topk, "cutoff for per-epoch metrics")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--eval-every", cfg.eval_every, "evaluate every n epochs (0 = off)")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--threads", cfg.eval_threads, "threads for evaluation")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--pretrain", pretrain_path, "fism model file for embedding init");
    train_cmd->add_option("--out", out_path, "write the trained model here");
    train_cmd->add_option("--validation-seed", validation_seed,
                          "hold out one validation interaction per user with this seed");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "rank the held-out items and report HR/NDCG");
    DatasetArgs eval_data;
    eval_data.attach(eval_cmd);
    std::string eval_model_path, eval_baseline;
    std::int32_t eval_topk = 10, eval_threads = 1, eval_neighbors = 0;
    auto* model_opt = eval_cmd->add_option("--model-file", eval_model_path, "trained model file");
    eval_cmd->add_option("--baseline", eval_baseline, "pop | itemknn")
        ->check(CLI::IsMember({"pop", "itemknn"}))
        ->excludes(model_opt);
    eval_cmd->add_option("--neighbors", eval_neighbors,
                         "itemknn neighbor cutoff (0 = all neighbors)")
        ->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--topk", eval_topk, "ranking cutoff K")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--threads", eval_threads, "evaluation threads")
        ->check(CLI::PositiveNumber);

    // explain
    auto* explain_cmd =
        app.add_subcommand("explain", "print the attention breakdown for one (user, item)");
    DatasetArgs explain_data;
    explain_data.attach(explain_cmd);
    std::string explain_model_path;
    std::int64_t explain_user = 0, explain_item = 0;
    explain_cmd->add_option("--model-file", explain_model_path, "nais model file")->required();
    explain_cmd->add_option("--user", explain_user, "user id")->required();
    explain_cmd->add_option("--item", explain_item, "target item id")->required();

    // stats
    auto* stats_cmd =
        app.add_subcommand("stats", "attention mean/variance per test prediction, as CSV");
    DatasetArgs stats_data;
    stats_data.attach(stats_cmd);
    std::string stats_model_path, stats_out;
    stats_cmd->add_option("--model-file", stats_model_path, "nais model file")->required();
    stats_cmd->add_option("--out", stats_out, "CSV output path (default: stdout)");

    // refresh-demo
    auto* refresh_cmd = app.add_subcommand(
        "refresh-demo", "stream interactions and refresh one cached prediction online");
    DatasetArgs refresh_data;
    refresh_data.attach(refresh_cmd);
    std::string refresh_model_path, events_path;
    std::int64_t refresh_user = 0, refresh_candidate = 0;
    std::int32_t check_every = 100;
    double tolerance = 1e-8;
    refresh_cmd->add_option("--model-file", refresh_model_path, "nais model file")->required();
    refresh_cmd->add_option("--user", refresh_user, "watched user id")->required();
    refresh_cmd->add_option("--candidate", refresh_candidate, "watched candidate item")
        ->required();
    refresh_cmd->add_option("--events", events_path, "file of 'user<TAB>item' interaction events")
        ->required();
    refresh_cmd->add_option("--check-every", check_every,
                            "full recompute check cadence (0 = never)")
        ->check(CLI::NonNegativeNumber);
    refresh_cmd->add_option("--tolerance", tolerance, "allowed |cached - recomputed|")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (train_cmd->parsed()) {
            return run_train(train_data, cfg, model_name, pretrain_path, out_path,
                             validation_seed);
        }
        if (eval_cmd->parsed()) {
            if (eval_model_path.empty() && eval_baseline.empty()) {
                std::cerr << "error: eval needs --model-file or --baseline\n";
                return kExitUsage;
            }
            return run_eval(eval_data, eval_model_path, eval_baseline, eval_neighbors, eval_topk,
                            eval_threads);
        }
        if (explain_cmd->parsed()) {
            return run_explain(explain_data, explain_model_path, explain_user, explain_item);
        }
        if (stats_cmd->parsed()) {
            return run_stats(stats_data, stats_model_path, stats_out);
        }
        return run_refresh_demo(refresh_data, refresh_model_path, refresh_user, refresh_candidate,
                                events_path, check_every, tolerance);
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
