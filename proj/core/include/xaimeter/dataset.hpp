#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xaimeter/image.hpp"
#include "xaimeter/metrics.hpp"

namespace xaimeter {

struct DatasetEntry {
    Image image;
    std::optional<GazeMap> gaze;
    int label = -1;  // -1 = unlabeled (external data without a manifest)
    std::string id;
};

struct BenchmarkDataset {
    std::string name;
    std::uint64_t seed = 0;
    int classes = 0;
    std::vector<DatasetEntry> entries;

    bool has_gaze() const;
    bool has_labels() const;
    /// All entries share one size; validated on construction paths.
    std::size_t image_height() const;
    std::size_t image_width() const;
};

struct SyntheticConfig {
    int n = 50;
    int size = 32;
    int classes = 3;
    std::uint64_t seed = 7;
};

/// Images each contain one colored shape (class = shape kind) at a random
/// position over a textured background; the gaze map is an isotropic Gaussian
/// centered on the shape (sigma = shape radius) normalized to sum 1.
/// Deterministic given the seed.
BenchmarkDataset gen_synthetic_dataset(const SyntheticConfig& cfg);

/// Writes img_####.png + gaze_####.png + manifest.json.
void save_dataset(const BenchmarkDataset& dataset, const std::filesystem::path& dir);

/// Loads a directory previously written by save_dataset.
BenchmarkDataset load_dataset(const std::filesystem::path& dir);

/// Ingests externally supplied PNGs. Gaze maps, when a directory is given,
/// are matched by filename; a missing or size-mismatched file is an error
/// naming the offender. Entries are unlabeled.
BenchmarkDataset load_external_dataset(const std::filesystem::path& images_dir,
                                       const std::optional<std::filesystem::path>& gaze_dir);

}  // namespace xaimeter
