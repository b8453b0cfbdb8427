#include "xaimeter/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "xaimeter/errors.hpp"
#include "xaimeter/png_io.hpp"
#include "xaimeter/stats.hpp"

namespace xaimeter {

std::string strategy_name(Strategy s) {
    return s == Strategy::Uniform ? "uniform" : "adversarial";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "uniform") return Strategy::Uniform;
    if (name == "adversarial") return Strategy::Adversarial;
    throw ValueError("unknown strategy: '" + name + "'");
}

double default_epsilon(std::size_t dims) {
    return 250.0 * std::sqrt(static_cast<double>(dims) / (256.0 * 256.0 * 3.0));
}

namespace {

void validate_config(const SamplerConfig& cfg) {
    if (cfg.epsilon <= 0.0) throw ValueError("sampler: epsilon must be > 0");
    if (cfg.count < 1) throw ValueError("sampler: count must be >= 1");
    if (cfg.max_walk_iterations < 1) throw ValueError("sampler: iteration cap must be >= 1");
    if (cfg.seed_pixels < 1) throw ValueError("sampler: seed pixel count must be >= 1");
}

}  // namespace

std::vector<double> uniform_ball_point(std::size_t dims, double epsilon, RandomStream& rng) {
    if (dims == 0) throw ValueError("uniform_ball_point: zero dimensions");
    std::vector<double> dir(dims);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& v : dir) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
    } while (norm == 0.0);
    const double u = rng.uniform_open01();
    const double radius = epsilon * std::pow(u, 1.0 / static_cast<double>(dims));
    const double scale = radius / norm;
    for (double& v : dir) v *= scale;
    return dir;
}

PerturbationSet sample_uniform(const Image& x0, const SamplerConfig& cfg, RandomStream& rng) {
    validate_config(cfg);
    PerturbationSet set;
    set.anchor = x0;
    set.strategy = Strategy::Uniform;
    set.epsilon = cfg.epsilon;
    set.seed = rng.seed();
    set.stream_id = rng.stream_id();

    const std::size_t n = x0.dims();
    Tensor candidate(x0.pixels().shape());
    for (int s = 0; s < cfg.count; ++s) {
        SampleRecord rec;
        bool accepted = false;
        for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
            const std::vector<double> offset = uniform_ball_point(n, cfg.epsilon, rng);
            for (std::size_t i = 0; i < n; ++i) candidate[i] = x0.flat()[i] + offset[i];
            Image quantized = Image::quantize(candidate);
            const double dist = l2_distance(x0.pixels(), quantized.pixels());
            if (dist > 0.0) {
                rec.image = std::move(quantized);
                rec.distance = dist;
                rec.pre_quant_distance = l2_norm(offset);
                rec.target_norm = rec.pre_quant_distance;
                rec.regenerations = attempt;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw RetryBudgetError("uniform sampler: " + std::to_string(cfg.max_retries) +
                                   " draws all quantized back onto the anchor (epsilon=" +
                                   std::to_string(cfg.epsilon) + " too small?)");
        }
        set.samples.push_back(std::move(rec));
    }
    return set;
}

namespace {

struct SeedNoise {
    Tensor start;  // real-valued A_0
    double norm = 0.0;
};

/// Picks `pixel_count` distinct pixel positions and gives each new uniform
/// random channel values (redrawn until they differ from the original), then
/// shrinks the offset onto the ball of radius `max_norm` so the walk always
/// starts strictly inside the target sphere.
SeedNoise draw_seed_noise(const Image& x0, int pixel_count, double max_norm,
                          RandomStream& rng) {
    const auto total_pixels = static_cast<std::int64_t>(x0.pixel_count());
    if (pixel_count > total_pixels) {
        throw ValueError("seed noise: more pixels requested than the image has");
    }
    std::set<std::int64_t> positions;
    while (static_cast<int>(positions.size()) < pixel_count) {
        positions.insert(rng.uniform_int(0, total_pixels - 1));
    }

    const std::size_t w = x0.width();
    Tensor offset(x0.pixels().shape());
    for (std::int64_t pos : positions) {
        const auto h_idx = static_cast<std::size_t>(pos) / w;
        const auto w_idx = static_cast<std::size_t>(pos) % w;
        for (;;) {
            double delta[3];
            bool differs = false;
            for (int c = 0; c < 3; ++c) {
                const auto fresh = static_cast<double>(rng.uniform_int(0, 255));
                delta[c] = fresh - x0.at(h_idx, w_idx, static_cast<std::size_t>(c));
                if (delta[c] != 0.0) differs = true;
            }
            if (differs) {
                for (int c = 0; c < 3; ++c) {
                    offset.at3(h_idx, w_idx, static_cast<std::size_t>(c)) = delta[c];
                }
                break;
            }
        }
    }

    double norm = l2_norm(offset.values());
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (std::size_t i = 0; i < offset.size(); ++i) offset[i] *= scale;
        norm = max_norm;
    }
    SeedNoise seed;
    seed.start = Tensor(x0.pixels().shape());
    for (std::size_t i = 0; i < offset.size(); ++i) {
        seed.start[i] = x0.flat()[i] + offset[i];
    }
    seed.norm = norm;
    return seed;
}

}  // namespace

PerturbationSet sample_adversarial(const Image& x0, const ClassLogitModel& g,
                                   const SamplerConfig& cfg, RandomStream& rng) {
    validate_config(cfg);
    PerturbationSet set;
    set.anchor = x0;
    set.strategy = Strategy::Adversarial;
    set.epsilon = cfg.epsilon;
    set.seed = rng.seed();
    set.stream_id = rng.stream_id();

    Tensor grad;
    for (int s = 0; s < cfg.count; ++s) {
        SampleRecord rec;
        bool accepted = false;
        for (int attempt = 0; attempt < cfg.max_retries && !accepted; ++attempt) {
            const double d = cfg.epsilon * rng.uniform_open01();  // target norm in (0, eps)
            SeedNoise seed = draw_seed_noise(x0, cfg.seed_pixels, d / 2.0, rng);

            g.value_and_grad(seed.start, grad);
            if (l2_norm(grad.values()) == 0.0) continue;  // dead start, new noise

            Tensor current = std::move(seed.start);
            double current_dist = seed.norm;
            Tensor next(current.shape());
            int steps = 0;
            bool capped = true;
            double escape = 0.0;
            while (steps < cfg.max_walk_iterations) {
                for (std::size_t i = 0; i < current.size(); ++i) {
                    next[i] = current[i] - grad[i];
                }
                const double next_dist = l2_distance(x0.pixels(), next);
                ++steps;
                if (next_dist > d) {
                    escape = next_dist;
                    capped = false;
                    break;
                }
                std::swap(current, next);
                current_dist = next_dist;
                g.value_and_grad(current, grad);
                if (l2_norm(grad.values()) == 0.0) break;  // stalled inside the ball
            }

            Image quantized = Image::quantize(current);
            const double dist = l2_distance(x0.pixels(), quantized.pixels());
            if (dist == 0.0) continue;  // rounded back onto the anchor, redraw

            rec.image = std::move(quantized);
            rec.distance = dist;
            rec.pre_quant_distance = current_dist;
            rec.steps = steps;
            rec.target_norm = d;
            rec.escape_distance = escape;
            rec.capped = capped;
            rec.regenerations = attempt;
            accepted = true;
        }
        if (!accepted) {
            throw RetryBudgetError("adversarial sampler: no valid sample after " +
                                   std::to_string(cfg.max_retries) + " attempts");
        }
        set.samples.push_back(std::move(rec));
    }
    return set;
}

void save_perturbation_set(const PerturbationSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_image_png(dir / "anchor.png", set.anchor);

    nlohmann::json manifest;
    manifest["schema"] = "xaimeter-perturbations/1";
    manifest["strategy"] = strategy_name(set.strategy);
    manifest["epsilon"] = set.epsilon;
    manifest["seed"] = set.seed;
    manifest["stream_id"] = set.stream_id;
    manifest["samples"] = nlohmann::json::array();
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        const SampleRecord& rec = set.samples[i];
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04zu.png", i);
        write_image_png(dir / name, rec.image);
        nlohmann::json j;
        j["file"] = name;
        j["distance"] = rec.distance;
        j["pre_quant_distance"] = rec.pre_quant_distance;
        j["target_norm"] = rec.target_norm;
        j["escape_distance"] = rec.escape_distance;
        j["capped"] = rec.capped;
        j["regenerations"] = rec.regenerations;
        if (rec.steps) j["steps"] = *rec.steps;
        manifest["samples"].push_back(std::move(j));
    }
    std::ofstream os(dir / "manifest.json");
    if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
    os << manifest.dump(2) << "\n";
}

PerturbationSet load_perturbation_set(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw IoError("cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        is >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError((dir / "manifest.json").string() + ": " + e.what());
    }
    if (manifest.value("schema", "") != "xaimeter-perturbations/1") {
        throw SchemaError((dir / "manifest.json").string() + ": unknown schema");
    }

    PerturbationSet set;
    set.anchor = read_image_png(dir / "anchor.png");
    set.strategy = strategy_from_name(manifest.at("strategy").get<std::string>());
    set.epsilon = manifest.at("epsilon").get<double>();
    set.seed = manifest.at("seed").get<std::uint64_t>();
    set.stream_id = manifest.at("stream_id").get<std::uint64_t>();
    for (const auto& j : manifest.at("samples")) {
        SampleRecord rec;
        rec.image = read_image_png(dir / j.at("file").get<std::string>());
        rec.distance = j.at("distance").get<double>();
        rec.pre_quant_distance = j.at("pre_quant_distance").get<double>();
        rec.target_norm = j.at("target_norm").get<double>();
        rec.escape_distance = j.at("escape_distance").get<double>();
        rec.capped = j.at("capped").get<bool>();
        rec.regenerations = j.at("regenerations").get<int>();
        if (j.contains("steps")) rec.steps = j.at("steps").get<int>();
        const double recomputed = l2_distance(set.anchor.pixels(), rec.image.pixels());
        if (std::abs(recomputed - rec.distance) > 1e-9) {
            throw CorruptFileError(dir.string() + ": stored distance for " +
                                   j.at("file").get<std::string>() +
                                   " does not match the decoded image");
        }
        set.samples.push_back(std::move(rec));
    }
    return set;
}

}  // namespace xaimeter
