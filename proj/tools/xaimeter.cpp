// xaimeter: generate fixture datasets, train the toy classifier, evaluate
// explanation methods against the metric suite, and report consensus /
// consistency analyses over saved score tables.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xaimeter/analysis.hpp"
#include "xaimeter/checkpoint.hpp"
#include "xaimeter/dataset.hpp"
#include "xaimeter/errors.hpp"
#include "xaimeter/runner.hpp"
#include "xaimeter/score_table.hpp"

namespace fs = std::filesystem;
using namespace xaimeter;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIntegrity = 2;
constexpr int kExitRuntime = 3;

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag_seed) {
    if (flag_seed) return *flag_seed;
    if (const char* env = std::getenv("XAIMETER_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ValueError("XAIMETER_SEED is not a valid integer: " + std::string(env));
        }
    }
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

void write_run_config(const fs::path& dir, const nlohmann::json& config) {
    fs::create_directories(dir);
    std::ofstream os(dir / "run-config.json");
    if (!os) throw IoError("cannot write " + (dir / "run-config.json").string());
    os << config.dump(2) << "\n";
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
    int n = 50;
    int size = 32;
    int classes = 3;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_gen_data(const GenDataArgs& args) {
    SyntheticConfig cfg;
    cfg.n = args.n;
    cfg.size = args.size;
    cfg.classes = args.classes;
    cfg.seed = resolve_seed(args.seed);

    const BenchmarkDataset dataset = gen_synthetic_dataset(cfg);
    save_dataset(dataset, args.out);

    nlohmann::json config;
    config["command"] = "gen-data";
    config["n"] = cfg.n;
    config["size"] = cfg.size;
    config["classes"] = cfg.classes;
    config["seed"] = cfg.seed;
    config["out"] = args.out;
    write_run_config(args.out, config);

    std::cout << "wrote " << dataset.entries.size() << " image/gaze pairs to " << args.out
              << " (seed " << cfg.seed << ")\n";
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string data;
    std::string out;
    std::string arch = "toy";
    int epochs = 30;
    double lr = 0.05;
    int batch = 16;
    double holdout = 0.2;
    std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& args) {
    if (args.holdout < 0.0 || args.holdout >= 1.0) {
        throw ValueError("--holdout must be in [0, 1)");
    }
    const BenchmarkDataset dataset = load_dataset(args.data);
    if (!dataset.has_labels()) throw ValueError("dataset has no labels; cannot train");
    const std::uint64_t seed = resolve_seed(args.seed);

    RandomStream init(seed, fnv1a64_str("model-init"));
    const auto h = static_cast<int>(dataset.image_height());
    const auto w = static_cast<int>(dataset.image_width());
    Classifier model = args.arch == "linear"
                           ? Classifier::linear(h, w, dataset.classes, init)
                           : Classifier::toy_cnn(h, w, dataset.classes, init);

    // deterministic holdout split: shuffle indices, last fraction held out
    std::vector<std::size_t> order(dataset.entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream split_rng(seed, fnv1a64_str("holdout-split"));
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(
            split_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
    const auto holdout_count = static_cast<std::size_t>(
        args.holdout * static_cast<double>(order.size()));
    const std::size_t train_count = order.size() - holdout_count;
    if (train_count == 0) throw ValueError("holdout leaves no training data");

    std::vector<TrainExample> train_set, test_set;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const DatasetEntry& e = dataset.entries[order[k]];
        TrainExample ex{&e.image, e.label};
        (k < train_count ? train_set : test_set).push_back(ex);
    }

    TrainConfig cfg;
    cfg.epochs = args.epochs;
    cfg.learning_rate = args.lr;
    cfg.batch_size = args.batch;
    cfg.seed = seed;
    const TrainReport report = train(model, train_set, cfg);

    const fs::path out_path(args.out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_model(model, out_path);

    {
        std::ofstream log(args.out + ".log.csv");
        if (!log) throw IoError("cannot write " + args.out + ".log.csv");
        log << "epoch,loss,accuracy\n";
        for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) {
            log << i + 1 << ',' << format_double(report.epoch_loss[i]) << ','
                << format_double(report.epoch_accuracy[i]) << '\n';
        }
    }

    double holdout_acc = std::numeric_limits<double>::quiet_NaN();
    if (!test_set.empty()) {
        std::size_t correct = 0;
        for (const TrainExample& ex : test_set) {
            if (model.predict(*ex.image) == ex.label) ++correct;
        }
        holdout_acc = static_cast<double>(correct) / static_cast<double>(test_set.size());
    }

    nlohmann::json config;
    config["command"] = "train";
    config["data"] = args.data;
    config["out"] = args.out;
    config["arch"] = args.arch;
    config["epochs"] = args.epochs;
    config["lr"] = args.lr;
    config["batch"] = args.batch;
    config["holdout"] = args.holdout;
    config["seed"] = seed;
    write_run_config(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."),
                     config);

    std::cout << "train accuracy " << report.final_train_accuracy;
    if (!test_set.empty()) std::cout << ", holdout accuracy " << holdout_acc;
    std::cout << " (checkpoint " << args.out << ", checksum " << file_checksum(args.out)
              << ")\n";
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string model;
    std::string data;
    std::string out;
    std::string strategy = "uniform";
    std::string metrics = "all";
    std::string explainers = "all";
    int samples = 50;
    double epsilon = 0.0;  // 0 = scaled default
    double eta_sq = 1e-6;
    int del_steps = 50;
    std::string g_output = "logit";
    std::string del_output = "prob";
    bool lip_normalize = false;
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    int ig_samples = 10;
    int sg_samples = 10;
    double sg_noise = 0.2;
    std::string gradcam_layer;
    int max_walk_iters = 10000;
    int seed_pixels = 3;
    bool save_saliency = false;
    bool save_samples = false;
};

RunOptions build_run_options(const EvaluateArgs& args, std::uint64_t seed) {
    RunOptions opts;
    if (args.explainers == "all") {
        opts.explainers = ExplainerSpec::all_eight();
    } else {
        for (const std::string& id : split_csv(args.explainers)) {
            opts.explainers.push_back(ExplainerSpec::parse(id));
        }
    }
    for (ExplainerSpec& spec : opts.explainers) {
        if (spec.kind == ExplainerKind::IntegratedGradients) spec.samples = args.ig_samples;
        if (spec.kind == ExplainerKind::SmoothGrads) {
            spec.samples = args.sg_samples;
            spec.noise = args.sg_noise;
        }
        if (spec.kind == ExplainerKind::GradCam) spec.conv_layer = args.gradcam_layer;
    }
    if (args.metrics == "all") {
        opts.metrics = all_metrics();
    } else {
        for (const std::string& id : split_csv(args.metrics)) {
            opts.metrics.push_back(metric_from_name(id));
        }
    }
    if (opts.explainers.empty() || opts.metrics.empty()) {
        throw ValueError("empty --explainers or --metrics list");
    }
    opts.strategy = strategy_from_name(args.strategy);
    opts.sampler.count = args.samples;
    opts.sampler.epsilon = args.epsilon;
    opts.sampler.max_walk_iterations = args.max_walk_iters;
    opts.sampler.seed_pixels = args.seed_pixels;
    opts.eta_sq = args.eta_sq;
    opts.del_steps = args.del_steps;
    opts.g_output = output_space_from_name(args.g_output);
    opts.del_output = output_space_from_name(args.del_output);
    opts.lip_normalize = args.lip_normalize;
    opts.jobs = args.jobs;
    opts.seed = seed;
    return opts;
}

int cmd_evaluate(const EvaluateArgs& args) {
    const std::uint64_t seed = resolve_seed(args.seed);
    const Classifier model = load_model(args.model);
    const BenchmarkDataset dataset = load_dataset(args.data);
    if (dataset.image_height() != static_cast<std::size_t>(model.input_height()) ||
        dataset.image_width() != static_cast<std::size_t>(model.input_width())) {
        throw SchemaError("dataset image size " + std::to_string(dataset.image_height()) +
                          "x" + std::to_string(dataset.image_width()) +
                          " does not match model input " +
                          std::to_string(model.input_height()) + "x" +
                          std::to_string(model.input_width()));
    }

    RunOptions opts = build_run_options(args, seed);
    opts.model_checksum = file_checksum(args.model);
    if (args.save_saliency) opts.save_saliency_dir = fs::path(args.out) / "saliency";
    if (args.save_samples) opts.save_samples_dir = fs::path(args.out) / "samples";
    opts.on_image_done = [](int) { std::cout << "." << std::flush; };

    const ScoreTable table = run_matrix(model, dataset, opts);
    std::cout << "\n";
    save_results(table, args.out);

    nlohmann::json config;
    config["command"] = "evaluate";
    config["model"] = args.model;
    config["data"] = args.data;
    config["out"] = args.out;
    config["strategy"] = args.strategy;
    config["metrics"] = args.metrics;
    config["explainers"] = args.explainers;
    config["samples"] = args.samples;
    config["epsilon"] = opts.sampler.epsilon;
    config["eta_sq"] = args.eta_sq;
    config["del_steps"] = args.del_steps;
    config["g_output"] = args.g_output;
    config["del_output"] = args.del_output;
    config["lip_normalize"] = args.lip_normalize;
    config["jobs"] = args.jobs;
    config["seed"] = seed;
    config["ig_samples"] = args.ig_samples;
    config["sg_samples"] = args.sg_samples;
    config["sg_noise"] = args.sg_noise;
    config["gradcam_layer"] = args.gradcam_layer;
    config["max_walk_iters"] = args.max_walk_iters;
    config["seed_pixels"] = args.seed_pixels;
    config["model_checksum"] = opts.model_checksum;
    write_run_config(args.out, config);

    std::cout << "wrote score table (" << table.metrics.size() << " metrics x "
              << table.explainers.size() << " explainers x " << table.n_images
              << " images) to " << args.out << "\n";
    return 0;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
    std::vector<std::string> tables;
    std::string out;
};

void write_consensus_csv(const fs::path& path, const ConsensusMatrix& cm) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "metric";
    for (MetricId id : cm.metrics) os << ',' << metric_name(id);
    os << '\n';
    for (std::size_t i = 0; i < cm.metrics.size(); ++i) {
        os << metric_name(cm.metrics[i]);
        for (std::size_t j = 0; j < cm.metrics.size(); ++j) {
            os << ',' << format_double(cm.defined_at(i, j)
                                           ? cm.at(i, j)
                                           : std::numeric_limits<double>::quiet_NaN());
        }
        os << '\n';
    }
}

int cmd_report(const ReportArgs& args) {
    if (args.tables.empty()) throw ValueError("report needs at least one table directory");
    std::vector<ScoreTable> tables;
    for (const std::string& dir : args.tables) tables.push_back(load_results(dir));
    for (std::size_t i = 1; i < tables.size(); ++i) {
        if (tables[i].meta.model_checksum != tables[0].meta.model_checksum) {
            throw SchemaError("tables come from different model checkpoints: " +
                              args.tables[0] + " vs " + args.tables[i]);
        }
    }
    fs::create_directories(args.out);

    std::ofstream summary(fs::path(args.out) / "summary.txt");
    if (!summary) throw IoError("cannot write summary.txt");

    for (const ScoreTable& table : tables) {
        const std::string strat = strategy_name(table.meta.strategy);
        const ConsensusMatrix cm = consensus(table);
        write_consensus_csv(fs::path(args.out) / ("consensus_" + strat + ".csv"), cm);

        summary << "== " << strat << " sampling (dataset " << table.meta.dataset_name << ", "
                << table.n_images << " images, epsilon "
                << format_double(table.meta.epsilon) << ") ==\n";
        summary << "best method per metric (mean score, mean evaluation radius):\n";
        for (std::size_t m = 0; m < table.metrics.size(); ++m) {
            const bool lower = metric_lower_is_better(table.metrics[m]);
            std::size_t best_e = 0;
            double best_score = std::numeric_limits<double>::quiet_NaN();
            for (std::size_t e = 0; e < table.explainers.size(); ++e) {
                const double mean = table.stats(m, e).mean_score;
                if (!std::isfinite(mean)) continue;
                if (!std::isfinite(best_score) || (lower ? mean < best_score : mean > best_score)) {
                    best_score = mean;
                    best_e = e;
                }
            }
            const CellStats st = table.stats(m, best_e);
            summary << "  " << metric_name(table.metrics[m])
                    << (lower ? " (lower is better): " : " (higher is better): ");
            if (std::isfinite(best_score)) {
                summary << table.explainers[best_e].id() << " ("
                        << format_double(st.mean_score) << ", R="
                        << format_double(st.mean_radius) << ")";
            } else {
                summary << "undefined for every explainer";
            }
            summary << '\n';
        }
        summary << '\n';
    }

    // consistency needs exactly one uniform and one adversarial table
    const ScoreTable* uniform_table = nullptr;
    const ScoreTable* adversarial_table = nullptr;
    for (const ScoreTable& t : tables) {
        if (t.meta.strategy == Strategy::Uniform && !uniform_table) uniform_table = &t;
        if (t.meta.strategy == Strategy::Adversarial && !adversarial_table) {
            adversarial_table = &t;
        }
    }
    if (uniform_table && adversarial_table) {
        const std::vector<ConsistencyEntry> entries =
            consistency(*uniform_table, *adversarial_table);
        std::ofstream os(fs::path(args.out) / "consistency.csv");
        if (!os) throw IoError("cannot write consistency.csv");
        os << "metric,pcc\n";
        double lip_pcc = std::numeric_limits<double>::quiet_NaN();
        double lss_pcc = std::numeric_limits<double>::quiet_NaN();
        for (const ConsistencyEntry& e : entries) {
            os << metric_name(e.metric) << ','
               << format_double(e.defined ? e.pcc : std::numeric_limits<double>::quiet_NaN())
               << '\n';
            if (e.metric == MetricId::Lip) lip_pcc = e.pcc;
            if (e.metric == MetricId::Lss) lss_pcc = e.pcc;
        }
        summary << "== consistency across sampling strategies (PCC of mean scores) ==\n";
        for (const ConsistencyEntry& e : entries) {
            summary << "  " << metric_name(e.metric) << ": "
                    << (e.defined ? format_double(e.pcc) : "NaN") << '\n';
        }
        if (std::isfinite(lip_pcc) && std::isfinite(lss_pcc)) {
            summary << "  lss-vs-lip: lss consistency "
                    << (lss_pcc >= lip_pcc ? "is at least" : "falls below")
                    << " lip consistency (" << format_double(lss_pcc) << " vs "
                    << format_double(lip_pcc)
                    << "); directional expectation only, not a hard check\n";
        }
    } else {
        summary << "== consistency skipped: need one uniform and one adversarial table ==\n";
    }

    std::cout << "report written to " << args.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"benchmark for feature-importance explanation methods"};
    app.require_subcommand(1);

    GenDataArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic shape dataset");
    gen->add_option("--n", gen_args.n, "number of images")->capture_default_str();
    gen->add_option("--size", gen_args.size, "image side length")->capture_default_str();
    gen->add_option("--classes", gen_args.classes, "number of shape classes (2-4)")
        ->capture_default_str();
    gen->add_option("--seed", gen_args.seed, "random seed (default: XAIMETER_SEED or random)");
    gen->add_option("--out", gen_args.out, "output directory")->required();

    TrainArgs train_args;
    CLI::App* tr = app.add_subcommand("train", "train the toy classifier");
    tr->add_option("--data", train_args.data, "dataset directory")->required();
    tr->add_option("--out", train_args.out, "checkpoint path")->required();
    tr->add_option("--arch", train_args.arch, "architecture: toy|linear")
        ->check(CLI::IsMember({"toy", "linear"}))
        ->capture_default_str();
    tr->add_option("--epochs", train_args.epochs, "training epochs")->capture_default_str();
    tr->add_option("--lr", train_args.lr, "learning rate")->capture_default_str();
    tr->add_option("--batch", train_args.batch, "batch size")->capture_default_str();
    tr->add_option("--holdout", train_args.holdout, "held-out fraction for test accuracy")
        ->capture_default_str();
    tr->add_option("--seed", train_args.seed, "random seed (default: XAIMETER_SEED or random)");

    EvaluateArgs eval_args;
    CLI::App* ev = app.add_subcommand("evaluate", "run the metric x explainer matrix");
    ev->add_option("--model", eval_args.model, "model checkpoint")->required();
    ev->add_option("--data", eval_args.data, "dataset directory")->required();
    ev->add_option("--out", eval_args.out, "output directory")->required();
    ev->add_option("--strategy", eval_args.strategy, "sampling strategy: uniform|adversarial")
        ->check(CLI::IsMember({"uniform", "adversarial"}))
        ->capture_default_str();
    ev->add_option("--metrics", eval_args.metrics,
                   "comma-separated metric ids or 'all' "
                   "(lip,lss,cle,lrc,del,ad,ai,ag,pcc,sim)")
        ->capture_default_str();
    ev->add_option("--explainers", eval_args.explainers,
                   "comma-separated explainer ids or 'all'")
        ->capture_default_str();
    ev->add_option("--samples", eval_args.samples, "perturbed samples per image")
        ->capture_default_str();
    ev->add_option("--epsilon", eval_args.epsilon,
                   "neighborhood radius (0 = scale 250 from 256x256x3 to the image size)")
        ->capture_default_str();
    ev->add_option("--eta-sq", eval_args.eta_sq, "LRC denominator constant eta^2")
        ->capture_default_str();
    ev->add_option("--del-steps", eval_args.del_steps, "deletion curve steps to the 50% cap")
        ->capture_default_str();
    ev->add_option("--g-output", eval_args.g_output,
                   "surrogate-family model output: logit|prob")
        ->check(CLI::IsMember({"logit", "prob"}))
        ->capture_default_str();
    ev->add_option("--del-output", eval_args.del_output,
                   "deletion/AD-family model output: prob|logit")
        ->check(CLI::IsMember({"logit", "prob"}))
        ->capture_default_str();
    ev->add_flag("--lip-normalize", eval_args.lip_normalize,
                 "min-max normalize saliency maps inside LIP's map distance");
    ev->add_option("--jobs", eval_args.jobs, "image-level parallelism")->capture_default_str();
    ev->add_option("--seed", eval_args.seed, "random seed (default: XAIMETER_SEED or random)");
    ev->add_option("--ig-samples", eval_args.ig_samples, "integrated-gradients samples")
        ->capture_default_str();
    ev->add_option("--sg-samples", eval_args.sg_samples, "smoothgrads samples")
        ->capture_default_str();
    ev->add_option("--sg-noise", eval_args.sg_noise, "smoothgrads noise level")
        ->capture_default_str();
    ev->add_option("--gradcam-layer", eval_args.gradcam_layer,
                   "conv layer for grad-cam (default: last conv)");
    ev->add_option("--max-walk-iters", eval_args.max_walk_iters,
                   "adversarial walk iteration cap")
        ->capture_default_str();
    ev->add_option("--seed-pixels", eval_args.seed_pixels,
                   "pixels modified by adversarial seed noise")
        ->capture_default_str();
    ev->add_flag("--save-saliency", eval_args.save_saliency,
                 "export anchor saliency maps as 16-bit PNGs");
    ev->add_flag("--save-samples", eval_args.save_samples,
                 "cache perturbation sets (PNGs + manifest)");

    ReportArgs report_args;
    CLI::App* rp = app.add_subcommand("report", "consensus/consistency over saved tables");
    rp->add_option("tables", report_args.tables, "score-table directories")->required();
    rp->add_option("--out", report_args.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_args);
        if (tr->parsed()) return cmd_train(train_args);
        if (ev->parsed()) return cmd_evaluate(eval_args);
        if (rp->parsed()) return cmd_report(report_args);
        std::cerr << "no subcommand\n";
        return kExitUsage;
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const VersionMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const CorruptFileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
