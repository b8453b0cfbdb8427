#include "xaimeter/runner.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "xaimeter/errors.hpp"
#include "xaimeter/stats.hpp"

namespace xaimeter {

namespace {

bool wants(const std::vector<MetricId>& metrics, MetricId id) {
    return std::find(metrics.begin(), metrics.end(), id) != metrics.end();
}

struct ImageContext {
    const Classifier* model = nullptr;
    const RunOptions* opts = nullptr;
    const DatasetEntry* entry = nullptr;
    int image_index = 0;
    RandomStream base;  // substream root for this (seed, image, strategy)
};

void fail_cell(CellRaw& cell, const std::string& reason) {
    cell.flags.push_back(reason);
}

/// Fills the column of cells (all metrics) for one (image, explainer) pair.
void evaluate_explainer(const ImageContext& ctx, const ClassLogitModel& g, int p0,
                        const PerturbationSet& pset, const std::vector<double>& g_tilde,
                        double g0, const ExplainerSpec& spec, std::size_t e,
                        ScoreTable& table) {
    const RunOptions& opts = *ctx.opts;
    const Image& x0 = ctx.entry->image;
    const auto img = static_cast<std::size_t>(ctx.image_index);

    // explainer streams hang off the explainer id, not its list position, so
    // reordering or filtering the explainer list cannot change any cell
    RandomStream expl_stream = ctx.base.substream(fnv1a64_str(spec.id().c_str()));

    SaliencyMap s0;
    try {
        RandomStream anchor_stream = expl_stream.substream(0);
        s0 = explain(g, x0, spec, anchor_stream);
    } catch (const Error& e_err) {
        for (std::size_t m = 0; m < table.metrics.size(); ++m) {
            fail_cell(table.cell(m, e, img), std::string("explainer-error: ") + e_err.what());
        }
        return;
    }

    if (!opts.save_saliency_dir.empty()) {
        const auto dir = opts.save_saliency_dir;
        std::filesystem::create_directories(dir);
        export_saliency_png(s0, (dir / (ctx.entry->id + "_" + spec.id() + ".png")).string());
    }

    const bool needs_neighbors = wants(opts.metrics, MetricId::Lip) ||
                                 wants(opts.metrics, MetricId::Lss) ||
                                 wants(opts.metrics, MetricId::Cle) ||
                                 wants(opts.metrics, MetricId::Lrc);
    NeighborhoodEvals ev;
    int capped_samples = 0;
    if (needs_neighbors) {
        ev.samples = &pset;
        ev.s0 = s0;
        ev.g0 = g0;
        ev.g_tilde = g_tilde;
        ev.normalize_for_lip = opts.lip_normalize;
        ev.s_tilde.reserve(pset.samples.size());
        for (std::size_t k = 0; k < pset.samples.size(); ++k) {
            RandomStream sample_stream = expl_stream.substream(k + 1);
            ev.s_tilde.push_back(explain(g, pset.samples[k].image, spec, sample_stream));
            if (pset.samples[k].capped) ++capped_samples;
        }
    }

    const double neighborhood_r = needs_neighbors ? neighborhood_radius(pset) : 0.0;

    for (std::size_t m = 0; m < table.metrics.size(); ++m) {
        CellRaw& cell = table.cell(m, e, img);
        try {
            switch (table.metrics[m]) {
                case MetricId::Lip:
                    cell.score = lip(ev);
                    cell.radius = neighborhood_r;
                    break;
                case MetricId::Lss:
                    cell.score = lss(ev);
                    cell.radius = neighborhood_r;
                    break;
                case MetricId::Cle:
                    cell.score = cle(ev);
                    cell.radius = neighborhood_r;
                    break;
                case MetricId::Lrc:
                    cell.score = lrc(ev, opts.eta_sq);
                    cell.radius = neighborhood_r;
                    break;
                case MetricId::Del: {
                    const DeletionResult del =
                        deletion_audc(x0, s0, *ctx.model, p0, opts.del_steps, opts.del_output);
                    cell.score = del.audc;
                    cell.radius = del.radius;
                    break;
                }
                case MetricId::Ad:
                case MetricId::Ai:
                case MetricId::Ag: {
                    const AdAiAgResult r = ad_ai_ag(x0, s0, *ctx.model, p0, opts.del_output);
                    cell.radius = r.radius;
                    if (table.metrics[m] == MetricId::Ad) {
                        if (r.ad_defined) cell.score = r.ad;
                        else fail_cell(cell, "undefined: y == 0");
                    } else if (table.metrics[m] == MetricId::Ai) {
                        cell.score = r.ai;
                    } else {
                        if (r.ag_defined) cell.score = r.ag;
                        else fail_cell(cell, "undefined: y == 1");
                    }
                    break;
                }
                case MetricId::Pcc:
                case MetricId::Sim: {
                    if (!ctx.entry->gaze) {
                        fail_cell(cell, "unavailable: dataset has no gaze maps");
                        break;
                    }
                    if (table.metrics[m] == MetricId::Pcc) {
                        cell.score = plausibility_pcc(s0, *ctx.entry->gaze);
                    } else {
                        cell.score = plausibility_sim(s0, *ctx.entry->gaze);
                    }
                    break;
                }
            }
            if (metric_is_sample_based(table.metrics[m]) && capped_samples > 0) {
                fail_cell(cell, "capped-walks: " + std::to_string(capped_samples));
            }
        } catch (const UndefinedCorrelationError& err) {
            cell.score = std::numeric_limits<double>::quiet_NaN();
            fail_cell(cell, std::string("undefined: ") + err.what());
        } catch (const Error& err) {
            cell.score = std::numeric_limits<double>::quiet_NaN();
            fail_cell(cell, std::string("error: ") + err.what());
        }
    }
}

void process_image(const ImageContext& ctx, ScoreTable& table) {
    const RunOptions& opts = *ctx.opts;
    const Image& x0 = ctx.entry->image;
    const auto img = static_cast<std::size_t>(ctx.image_index);
    try {
        const int p0 = ctx.model->predict(x0);
        const ClassLogitModel g(*ctx.model, p0);

        const bool needs_neighbors = wants(opts.metrics, MetricId::Lip) ||
                                     wants(opts.metrics, MetricId::Lss) ||
                                     wants(opts.metrics, MetricId::Cle) ||
                                     wants(opts.metrics, MetricId::Lrc);
        PerturbationSet pset;
        std::vector<double> g_tilde;
        double g0 = 0.0;
        if (needs_neighbors) {
            RandomStream sampler_stream = ctx.base.substream(fnv1a64_str("sampler"));
            pset = (opts.strategy == Strategy::Uniform)
                       ? sample_uniform(x0, opts.sampler, sampler_stream)
                       : sample_adversarial(x0, g, opts.sampler, sampler_stream);
            if (!opts.save_samples_dir.empty()) {
                save_perturbation_set(pset, opts.save_samples_dir / ctx.entry->id);
            }
            const auto g_value = [&](const Tensor& t) {
                return opts.g_output == OutputSpace::Logit ? g.value(t) : g.probability(t);
            };
            g0 = g_value(x0.pixels());
            g_tilde.reserve(pset.samples.size());
            for (const SampleRecord& rec : pset.samples) {
                g_tilde.push_back(g_value(rec.image.pixels()));
            }
        }

        for (std::size_t e = 0; e < table.explainers.size(); ++e) {
            evaluate_explainer(ctx, g, p0, pset, g_tilde, g0, table.explainers[e], e, table);
        }
    } catch (const Error& err) {
        for (std::size_t m = 0; m < table.metrics.size(); ++m) {
            for (std::size_t e = 0; e < table.explainers.size(); ++e) {
                fail_cell(table.cell(m, e, img), std::string("image-error: ") + err.what());
            }
        }
    }
    if (opts.on_image_done) opts.on_image_done(ctx.image_index);
}

}  // namespace

ScoreTable run_matrix(const Classifier& model, const BenchmarkDataset& dataset,
                      const RunOptions& options) {
    if (dataset.entries.empty()) throw ValueError("run_matrix: empty dataset");
    if (options.explainers.empty() || options.metrics.empty()) {
        throw ValueError("run_matrix: need at least one explainer and one metric");
    }

    RunOptions opts = options;
    if (opts.sampler.epsilon <= 0.0) {
        opts.sampler.epsilon = default_epsilon(dataset.entries.front().image.dims());
    }

    TableMetadata meta;
    meta.strategy = opts.strategy;
    meta.seed = opts.seed;
    meta.epsilon = opts.sampler.epsilon;
    meta.eta_sq = opts.eta_sq;
    meta.samples = opts.sampler.count;
    meta.del_steps = opts.del_steps;
    meta.g_output = opts.g_output;
    meta.del_output = opts.del_output;
    meta.lip_normalize = opts.lip_normalize;
    meta.model_checksum = opts.model_checksum;
    meta.dataset_name = dataset.name;

    ScoreTable table(opts.metrics, opts.explainers,
                     static_cast<int>(dataset.entries.size()), meta);

    const std::uint64_t strategy_tag =
        fnv1a64_str(strategy_name(opts.strategy).c_str());
    const auto n_images = dataset.entries.size();
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_images) break;
            ImageContext ctx{
                &model, &opts, &dataset.entries[i], static_cast<int>(i),
                RandomStream(opts.seed, derive_stream(strategy_tag, i))};
            process_image(ctx, table);
        }
    };

    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return table;
}

}  // namespace xaimeter
