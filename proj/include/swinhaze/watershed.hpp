#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "swinhaze/image.hpp"

namespace swinhaze::watershed {

// Per-pixel region labels. 0 = unlabeled; regions are numbered 1..K.
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<int> labels;

    int at(int y, int x) const noexcept { return labels[static_cast<std::size_t>(y) * width + x]; }
    int max_label() const noexcept;
};

// Label map rescaled to [0, 1): (label - min) / (max - min + eps).
struct NormalizedMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    ImageBuffer to_image() const;
};

struct WatershedConfig {
    double sigma = 2.0;
    double eps = 1e-8;
};

// A plateau (maximal 4-connected set of equal values) is a seed when none of its
// pixels has a strictly lower 4-neighbour. Seeds are numbered in row-major order
// of each plateau's first scanned pixel.
LabelMap detect_minima(const ImageBuffer& smoothed);

// Greedy priority flood. The frontier holds (|I(p) - I(q)|, p, label(q)) for every
// unlabeled p with a labeled 4-neighbour q; the lexicographically smallest entry is
// committed first.
LabelMap propagate_labels(const ImageBuffer& smoothed, const LabelMap& seeds);

NormalizedMap normalize_labels(const LabelMap& labels, double eps);

// grayscale -> Gaussian blur -> minima -> propagation -> normalization.
NormalizedMap watershed_map(const ImageBuffer& img, const WatershedConfig& cfg = {});

// Whitespace-separated rows of values, one image row per line.
void write_text_grid(const NormalizedMap& map, const std::filesystem::path& path);

}  // namespace swinhaze::watershed
