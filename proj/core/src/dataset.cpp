#include "xaimeter/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "xaimeter/errors.hpp"
#include "xaimeter/png_io.hpp"
#include "xaimeter/random.hpp"

namespace xaimeter {

bool BenchmarkDataset::has_gaze() const {
    return !entries.empty() &&
           std::all_of(entries.begin(), entries.end(),
                       [](const DatasetEntry& e) { return e.gaze.has_value(); });
}

bool BenchmarkDataset::has_labels() const {
    return !entries.empty() && std::all_of(entries.begin(), entries.end(),
                                           [](const DatasetEntry& e) { return e.label >= 0; });
}

std::size_t BenchmarkDataset::image_height() const {
    if (entries.empty()) throw ValueError("empty dataset");
    return entries.front().image.height();
}

std::size_t BenchmarkDataset::image_width() const {
    if (entries.empty()) throw ValueError("empty dataset");
    return entries.front().image.width();
}

namespace {

constexpr int kMinSize = 16;
constexpr int kMaxClasses = 4;

// class -> shape and base color; color co-varies with the shape so that the
// toy model separates classes quickly
const char* kShapeNames[kMaxClasses] = {"square", "circle", "cross", "triangle"};
const int kPalette[kMaxClasses][3] = {
    {210, 50, 50}, {50, 210, 50}, {60, 60, 220}, {220, 210, 50}};

bool inside_shape(int shape, int di, int dj, int radius) {
    switch (shape) {
        case 0:  // square
            return std::abs(di) <= radius && std::abs(dj) <= radius;
        case 1:  // circle
            return di * di + dj * dj <= radius * radius;
        case 2: {  // cross
            const int arm = std::max(1, (2 * radius) / 5);
            return (std::abs(di) <= arm && std::abs(dj) <= radius) ||
                   (std::abs(dj) <= arm && std::abs(di) <= radius);
        }
        case 3:  // upward triangle
            return di >= -radius && di <= radius &&
                   std::abs(dj) * 2 * radius <= (di + radius) * radius;
        default:
            return false;
    }
}

}  // namespace

BenchmarkDataset gen_synthetic_dataset(const SyntheticConfig& cfg) {
    if (cfg.n < 1) throw ValueError("gen-data: n must be >= 1");
    if (cfg.size < kMinSize) {
        throw ValueError("gen-data: size " + std::to_string(cfg.size) +
                         " too small for shapes (minimum " + std::to_string(kMinSize) + ")");
    }
    if (cfg.classes < 2 || cfg.classes > kMaxClasses) {
        throw ValueError("gen-data: classes must be in [2," + std::to_string(kMaxClasses) +
                         "]");
    }

    BenchmarkDataset dataset;
    dataset.name = "synthetic";
    dataset.seed = cfg.seed;
    dataset.classes = cfg.classes;

    const RandomStream root(cfg.seed, fnv1a64_str("dataset"));
    const int size = cfg.size;
    for (int idx = 0; idx < cfg.n; ++idx) {
        RandomStream rng = root.substream(static_cast<std::uint64_t>(idx));
        DatasetEntry entry;
        const int label = static_cast<int>(rng.uniform_int(0, cfg.classes - 1));
        entry.label = label;

        const int min_radius = 3;
        const int max_radius = std::max(min_radius + 1, size / 5);
        const int radius = static_cast<int>(rng.uniform_int(min_radius, max_radius));
        const int cy = static_cast<int>(rng.uniform_int(radius + 1, size - radius - 2));
        const int cx = static_cast<int>(rng.uniform_int(radius + 1, size - radius - 2));

        int color[3];
        for (int c = 0; c < 3; ++c) {
            const int jitter = static_cast<int>(rng.uniform_int(-25, 25));
            color[c] = std::clamp(kPalette[label][c] + jitter, 0, 255);
        }
        const int base_gray = static_cast<int>(rng.uniform_int(70, 170));

        Tensor px({static_cast<std::size_t>(size), static_cast<std::size_t>(size), 3});
        for (int i = 0; i < size; ++i) {
            for (int j = 0; j < size; ++j) {
                const bool in_shape = inside_shape(label, i - cy, j - cx, radius);
                for (int c = 0; c < 3; ++c) {
                    int v;
                    if (in_shape) {
                        v = color[c];
                    } else {
                        v = std::clamp(
                            base_gray + static_cast<int>(rng.uniform_int(-25, 25)), 0, 255);
                    }
                    px.at3(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                           static_cast<std::size_t>(c)) = v;
                }
            }
        }
        entry.image = Image::from_tensor(std::move(px));

        const double sigma = static_cast<double>(radius);
        Tensor gaze({static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
        for (int i = 0; i < size; ++i) {
            for (int j = 0; j < size; ++j) {
                const double d2 = static_cast<double>((i - cy) * (i - cy) + (j - cx) * (j - cx));
                gaze.at2(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                    std::exp(-d2 / (2.0 * sigma * sigma));
            }
        }
        const double total = gaze.sum();
        for (std::size_t k = 0; k < gaze.size(); ++k) gaze[k] /= total;
        entry.gaze = GazeMap::from_tensor(std::move(gaze));

        char id[32];
        std::snprintf(id, sizeof(id), "%04d", idx);
        entry.id = id;
        dataset.entries.push_back(std::move(entry));
    }
    return dataset;
}

void save_dataset(const BenchmarkDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["schema"] = "xaimeter-dataset/1";
    manifest["name"] = dataset.name;
    manifest["seed"] = dataset.seed;
    manifest["classes"] = dataset.classes;
    manifest["entries"] = nlohmann::json::array();
    for (const DatasetEntry& entry : dataset.entries) {
        const std::string img_name = "img_" + entry.id + ".png";
        write_image_png(dir / img_name, entry.image);
        nlohmann::json j;
        j["id"] = entry.id;
        j["image"] = img_name;
        j["label"] = entry.label;
        if (entry.gaze) {
            const std::string gaze_name = "gaze_" + entry.id + ".png";
            const Tensor& gv = entry.gaze->values();
            const double hi = gv.max_value();
            write_gray16_png(dir / gaze_name, gv, 0.0, hi);
            j["gaze"] = gaze_name;
            j["gaze_scale"] = hi;  // stored sample 65535 maps back to this value
        }
        manifest["entries"].push_back(std::move(j));
    }
    std::ofstream os(dir / "manifest.json");
    if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
    os << manifest.dump(2) << "\n";
}

BenchmarkDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw IoError("cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        is >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError((dir / "manifest.json").string() + ": " + e.what());
    }
    if (manifest.value("schema", "") != "xaimeter-dataset/1") {
        throw SchemaError((dir / "manifest.json").string() + ": unknown schema");
    }

    BenchmarkDataset dataset;
    try {
        dataset.name = manifest.at("name").get<std::string>();
        dataset.seed = manifest.at("seed").get<std::uint64_t>();
        dataset.classes = manifest.at("classes").get<int>();
        for (const auto& j : manifest.at("entries")) {
            DatasetEntry entry;
            entry.id = j.at("id").get<std::string>();
            entry.label = j.at("label").get<int>();
            entry.image = read_image_png(dir / j.at("image").get<std::string>());
            if (j.contains("gaze")) {
                Tensor raw = read_gray_png(dir / j.at("gaze").get<std::string>());
                const double scale = j.value("gaze_scale", 1.0) / 65535.0;
                for (std::size_t k = 0; k < raw.size(); ++k) raw[k] *= scale;
                entry.gaze = GazeMap::from_tensor(std::move(raw));
            }
            if (!dataset.entries.empty() &&
                (entry.image.height() != dataset.entries.front().image.height() ||
                 entry.image.width() != dataset.entries.front().image.width())) {
                throw SchemaError("dataset images have mixed sizes (" + entry.id + ")");
            }
            dataset.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError((dir / "manifest.json").string() + ": bad fields: " + e.what());
    }
    if (dataset.entries.empty()) throw SchemaError(dir.string() + ": dataset has no entries");
    return dataset;
}

BenchmarkDataset load_external_dataset(const std::filesystem::path& images_dir,
                                       const std::optional<std::filesystem::path>& gaze_dir) {
    if (!std::filesystem::is_directory(images_dir)) {
        throw IoError(images_dir.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(images_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValueError(images_dir.string() + " contains no .png files");

    BenchmarkDataset dataset;
    dataset.name = "external:" + images_dir.filename().string();
    for (const auto& file : files) {
        DatasetEntry entry;
        entry.id = file.stem().string();
        entry.image = read_image_png(file);
        if (gaze_dir) {
            const std::filesystem::path gaze_path = *gaze_dir / file.filename();
            if (!std::filesystem::exists(gaze_path)) {
                throw IoError("missing gaze map: " + gaze_path.string());
            }
            Tensor gaze = read_gray_png(gaze_path);
            if (gaze.shape()[0] != entry.image.height() ||
                gaze.shape()[1] != entry.image.width()) {
                throw ShapeError("gaze map " + gaze_path.string() +
                                 " does not match image size of " + file.string());
            }
            entry.gaze = GazeMap::from_tensor(std::move(gaze));
        }
        if (!dataset.entries.empty() &&
            (entry.image.height() != dataset.entries.front().image.height() ||
             entry.image.width() != dataset.entries.front().image.width())) {
            throw ShapeError("image sizes differ: " + file.string());
        }
        dataset.entries.push_back(std::move(entry));
    }
    return dataset;
}

}  // namespace xaimeter
