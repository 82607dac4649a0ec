#include "swinhaze/watershed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <queue>
#include <string>
#include <tuple>

#include "swinhaze/error.hpp"
#include "swinhaze/imaging.hpp"

namespace swinhaze::watershed {

namespace {

constexpr std::array<std::array<int, 2>, 4> kNeighbours{{{-1, 0}, {0, -1}, {0, 1}, {1, 0}}};

void require_single_channel(const ImageBuffer& img) {
    if (img.channels() != 1) {
        fail(ErrorCode::InvalidChannels, "watershed stages expect a single-channel image");
    }
}

struct FrontierEntry {
    double cost;
    std::size_t pixel;
    int label;

    bool operator>(const FrontierEntry& other) const noexcept {
        return std::tie(cost, pixel, label) > std::tie(other.cost, other.pixel, other.label);
    }
};

}  // namespace

int LabelMap::max_label() const noexcept {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

ImageBuffer NormalizedMap::to_image() const {
    return ImageBuffer(height, width, 1, values);
}

LabelMap detect_minima(const ImageBuffer& smoothed) {
    require_single_channel(smoothed);
    const int h = smoothed.height();
    const int w = smoothed.width();
    const auto values = smoothed.data();
    LabelMap out{h, w, std::vector<int>(values.size(), 0)};

    std::vector<std::uint8_t> visited(values.size(), 0);
    std::vector<std::size_t> plateau;
    std::vector<std::size_t> stack;
    int next_label = 1;
    for (std::size_t start = 0; start < values.size(); ++start) {
        if (visited[start]) continue;
        const double level = values[start];
        plateau.clear();
        stack.assign(1, start);
        visited[start] = 1;
        bool has_lower = false;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            plateau.push_back(p);
            const int y = static_cast<int>(p / w);
            const int x = static_cast<int>(p % w);
            for (const auto& [dy, dx] : kNeighbours) {
                const int ny = y + dy;
                const int nx = x + dx;
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
                if (values[q] < level) {
                    has_lower = true;
                } else if (values[q] == level && !visited[q]) {
                    visited[q] = 1;
                    stack.push_back(q);
                }
            }
        }
        if (!has_lower) {
            for (std::size_t p : plateau) out.labels[p] = next_label;
            ++next_label;
        }
    }
    return out;
}

LabelMap propagate_labels(const ImageBuffer& smoothed, const LabelMap& seeds) {
    require_single_channel(smoothed);
    const int h = smoothed.height();
    const int w = smoothed.width();
    if (seeds.height != h || seeds.width != w) {
        fail(ErrorCode::ShapeMismatch, "seed map does not match the image");
    }
    if (std::none_of(seeds.labels.begin(), seeds.labels.end(), [](int l) { return l != 0; })) {
        fail(ErrorCode::NoSeeds, "propagation needs at least one seed");
    }
    const auto values = smoothed.data();
    LabelMap out = seeds;

    std::priority_queue<FrontierEntry, std::vector<FrontierEntry>, std::greater<>> frontier;
    auto push_neighbours = [&](std::size_t p) {
        const int y = static_cast<int>(p / w);
        const int x = static_cast<int>(p % w);
        for (const auto& [dy, dx] : kNeighbours) {
            const int ny = y + dy;
            const int nx = x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
            if (out.labels[q] == 0) {
                frontier.push({std::abs(values[q] - values[p]), q, out.labels[p]});
            }
        }
    };
    for (std::size_t p = 0; p < out.labels.size(); ++p) {
        if (out.labels[p] != 0) push_neighbours(p);
    }
    while (!frontier.empty()) {
        const FrontierEntry entry = frontier.top();
        frontier.pop();
        if (out.labels[entry.pixel] != 0) continue;
        out.labels[entry.pixel] = entry.label;
        push_neighbours(entry.pixel);
    }
    return out;
}

NormalizedMap normalize_labels(const LabelMap& labels, double eps) {
    if (!(eps > 0.0)) fail(ErrorCode::InvalidParameter, "normalization eps must be positive");
    if (labels.labels.empty() ||
        std::any_of(labels.labels.begin(), labels.labels.end(), [](int l) { return l == 0; })) {
        fail(ErrorCode::IncompleteLabeling, "label map still contains unlabeled pixels");
    }
    const auto [lo_it, hi_it] = std::minmax_element(labels.labels.begin(), labels.labels.end());
    const double lo = *lo_it;
    const double denom = (*hi_it - lo) + eps;
    NormalizedMap out{labels.height, labels.width, std::vector<double>(labels.labels.size())};
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        out.values[i] = (labels.labels[i] - lo) / denom;
    }
    return out;
}

NormalizedMap watershed_map(const ImageBuffer& img, const WatershedConfig& cfg) {
    if (!(cfg.sigma > 0.0) || !(cfg.eps > 0.0)) {
        fail(ErrorCode::InvalidParameter, "watershed sigma and eps must be positive");
    }
    ImageBuffer gray = to_unit_range(img);
    if (gray.channels() == 3) gray = imaging::to_grayscale(gray);
    const ImageBuffer smoothed = imaging::gaussian_blur(gray, cfg.sigma);
    const LabelMap seeds = detect_minima(smoothed);
    return normalize_labels(propagate_labels(smoothed, seeds), cfg.eps);
}

void write_text_grid(const NormalizedMap& map, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << std::setprecision(17);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            if (x) out << ' ';
            out << map.values[static_cast<std::size_t>(y) * map.width + x];
        }
        out << '\n';
    }
    if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace swinhaze::watershed
