#include "xaimeter/score_table.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "xaimeter/errors.hpp"

namespace xaimeter {

ScoreTable::ScoreTable(std::vector<MetricId> metric_ids,
                       std::vector<ExplainerSpec> explainer_specs, int image_count,
                       TableMetadata metadata)
    : metrics(std::move(metric_ids)),
      explainers(std::move(explainer_specs)),
      n_images(image_count),
      meta(std::move(metadata)) {
    if (metrics.empty() || explainers.empty()) {
        throw ValueError("score table needs at least one metric and one explainer");
    }
    if (n_images < 1) throw ValueError("score table needs at least one image");
    raw.resize(metrics.size() * explainers.size() * static_cast<std::size_t>(n_images));
    meta.n_images = n_images;
}

CellStats ScoreTable::stats(std::size_t m, std::size_t e) const {
    CellStats st;
    double score_sum = 0.0, radius_sum = 0.0;
    int radius_count = 0;
    for (int img = 0; img < n_images; ++img) {
        const CellRaw& c = cell(m, e, static_cast<std::size_t>(img));
        if (c.defined()) {
            score_sum += c.score;
            ++st.n_defined;
        } else {
            ++st.n_failed;
        }
        if (std::isfinite(c.radius)) {
            radius_sum += c.radius;
            ++radius_count;
        }
    }
    if (st.n_defined > 0) st.mean_score = score_sum / st.n_defined;
    if (radius_count > 0) st.mean_radius = radius_sum / radius_count;
    return st;
}

std::size_t ScoreTable::metric_index(MetricId id) const {
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        if (metrics[i] == id) return i;
    }
    throw ValueError("metric " + metric_name(id) + " not in table");
}

std::size_t ScoreTable::explainer_index(const std::string& id) const {
    for (std::size_t i = 0; i < explainers.size(); ++i) {
        if (explainers[i].id() == id) return i;
    }
    throw ValueError("explainer " + id + " not in table");
}

namespace {

bool cells_equal(const CellRaw& a, const CellRaw& b) {
    const bool score_eq = (std::isnan(a.score) && std::isnan(b.score)) || a.score == b.score;
    const bool radius_eq =
        (std::isnan(a.radius) && std::isnan(b.radius)) || a.radius == b.radius;
    return score_eq && radius_eq && a.flags == b.flags;
}

std::vector<std::string> explainer_ids(const ScoreTable& t) {
    std::vector<std::string> ids;
    ids.reserve(t.explainers.size());
    for (const auto& e : t.explainers) ids.push_back(e.id());
    return ids;
}

}  // namespace

bool ScoreTable::operator==(const ScoreTable& other) const {
    if (metrics != other.metrics || n_images != other.n_images) return false;
    if (explainer_ids(*this) != explainer_ids(other)) return false;
    if (raw.size() != other.raw.size()) return false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!cells_equal(raw[i], other.raw[i])) return false;
    }
    return meta.strategy == other.meta.strategy && meta.seed == other.meta.seed &&
           meta.epsilon == other.meta.epsilon && meta.eta_sq == other.meta.eta_sq &&
           meta.samples == other.meta.samples &&
           meta.model_checksum == other.meta.model_checksum &&
           meta.dataset_name == other.meta.dataset_name;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "NaN";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& text) {
    if (text == "NaN") return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0') {
        throw CorruptFileError("bad numeric field: '" + text + "'");
    }
    return v;
}

void save_results(const ScoreTable& table, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    {
        std::ofstream csv(dir / "scores.csv");
        if (!csv) throw IoError("cannot write " + (dir / "scores.csv").string());
        csv << "metric,explainer,mean_score,mean_radius,n_defined,n_failed\n";
        for (std::size_t m = 0; m < table.metrics.size(); ++m) {
            for (std::size_t e = 0; e < table.explainers.size(); ++e) {
                const CellStats st = table.stats(m, e);
                csv << metric_name(table.metrics[m]) << ',' << table.explainers[e].id() << ','
                    << format_double(st.mean_score) << ',' << format_double(st.mean_radius)
                    << ',' << st.n_defined << ',' << st.n_failed << '\n';
            }
        }
    }

    {
        std::ofstream jsonl(dir / "raw.jsonl");
        if (!jsonl) throw IoError("cannot write " + (dir / "raw.jsonl").string());
        for (std::size_t m = 0; m < table.metrics.size(); ++m) {
            for (std::size_t e = 0; e < table.explainers.size(); ++e) {
                for (int img = 0; img < table.n_images; ++img) {
                    const CellRaw& c = table.cell(m, e, static_cast<std::size_t>(img));
                    nlohmann::json j;
                    j["image"] = img;
                    j["metric"] = metric_name(table.metrics[m]);
                    j["explainer"] = table.explainers[e].id();
                    // doubles go through format_double so NaN survives and
                    // values round-trip bit-exactly
                    j["score"] = format_double(c.score);
                    j["radius"] = format_double(c.radius);
                    if (!c.flags.empty()) j["flags"] = c.flags;
                    jsonl << j.dump() << '\n';
                }
            }
        }
    }

    {
        nlohmann::json meta;
        meta["schema"] = "xaimeter-results/1";
        meta["strategy"] = strategy_name(table.meta.strategy);
        meta["seed"] = table.meta.seed;
        meta["epsilon"] = table.meta.epsilon;
        meta["eta_sq"] = table.meta.eta_sq;
        meta["samples"] = table.meta.samples;
        meta["del_steps"] = table.meta.del_steps;
        meta["g_output"] = output_space_name(table.meta.g_output);
        meta["del_output"] = output_space_name(table.meta.del_output);
        meta["lip_normalize"] = table.meta.lip_normalize;
        meta["model_checksum"] = table.meta.model_checksum;
        meta["dataset"] = table.meta.dataset_name;
        meta["n_images"] = table.n_images;
        meta["metrics"] = nlohmann::json::array();
        for (MetricId id : table.metrics) meta["metrics"].push_back(metric_name(id));
        meta["explainers"] = nlohmann::json::array();
        for (const auto& e : table.explainers) meta["explainers"].push_back(e.id());
        std::ofstream os(dir / "metadata.json");
        if (!os) throw IoError("cannot write " + (dir / "metadata.json").string());
        os << meta.dump(2) << "\n";
    }
}

ScoreTable load_results(const std::filesystem::path& dir) {
    nlohmann::json meta;
    {
        std::ifstream is(dir / "metadata.json");
        if (!is) throw IoError("cannot open " + (dir / "metadata.json").string());
        try {
            is >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw CorruptFileError((dir / "metadata.json").string() + ": " + e.what());
        }
    }
    if (meta.value("schema", "") != "xaimeter-results/1") {
        throw SchemaError((dir / "metadata.json").string() + ": unknown results schema '" +
                          meta.value("schema", "") + "'");
    }

    try {
        TableMetadata tm;
        tm.strategy = strategy_from_name(meta.at("strategy").get<std::string>());
        tm.seed = meta.at("seed").get<std::uint64_t>();
        tm.epsilon = meta.at("epsilon").get<double>();
        tm.eta_sq = meta.at("eta_sq").get<double>();
        tm.samples = meta.at("samples").get<int>();
        tm.del_steps = meta.at("del_steps").get<int>();
        tm.g_output = output_space_from_name(meta.at("g_output").get<std::string>());
        tm.del_output = output_space_from_name(meta.at("del_output").get<std::string>());
        tm.lip_normalize = meta.at("lip_normalize").get<bool>();
        tm.model_checksum = meta.at("model_checksum").get<std::string>();
        tm.dataset_name = meta.at("dataset").get<std::string>();

        std::vector<MetricId> metric_ids;
        for (const auto& name : meta.at("metrics")) {
            metric_ids.push_back(metric_from_name(name.get<std::string>()));
        }
        std::vector<ExplainerSpec> specs;
        for (const auto& id : meta.at("explainers")) {
            specs.push_back(ExplainerSpec::parse(id.get<std::string>()));
        }
        ScoreTable table(std::move(metric_ids), std::move(specs),
                         meta.at("n_images").get<int>(), std::move(tm));

        std::ifstream jsonl(dir / "raw.jsonl");
        if (!jsonl) throw IoError("cannot open " + (dir / "raw.jsonl").string());
        std::vector<bool> seen(table.raw.size(), false);
        std::string line;
        while (std::getline(jsonl, line)) {
            if (line.empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line);
            const std::size_t m = table.metric_index(
                metric_from_name(j.at("metric").get<std::string>()));
            const std::size_t e = table.explainer_index(j.at("explainer").get<std::string>());
            const int img = j.at("image").get<int>();
            if (img < 0 || img >= table.n_images) {
                throw CorruptFileError("raw.jsonl: image index out of range");
            }
            const std::size_t idx = table.cell_index(m, e, static_cast<std::size_t>(img));
            if (seen[idx]) throw CorruptFileError("raw.jsonl: duplicate cell");
            seen[idx] = true;
            CellRaw& c = table.raw[idx];
            c.score = parse_double(j.at("score").get<std::string>());
            c.radius = parse_double(j.at("radius").get<std::string>());
            if (j.contains("flags")) c.flags = j.at("flags").get<std::vector<std::string>>();
        }
        for (bool s : seen) {
            if (!s) throw CorruptFileError("raw.jsonl: missing cells");
        }
        return table;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(dir.string() + ": bad results fields: " + e.what());
    }
}

}  // namespace xaimeter
