#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace swinhaze {

// Value-range convention of an image: [0, 1] or [-1, 1].
enum class RangeTag { Unit, Signed };

// Row-major H x W x C raster of double samples (channel fastest).
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int height, int width, int channels, RangeTag range = RangeTag::Unit);
    ImageBuffer(int height, int width, int channels, std::vector<double> data,
                RangeTag range = RangeTag::Unit);

    static ImageBuffer filled(int height, int width, int channels, double value,
                              RangeTag range = RangeTag::Unit);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    RangeTag range() const noexcept { return range_; }
    void set_range(RangeTag range) noexcept { range_ = range; }

    double& at(int y, int x, int c = 0) noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int y, int x, int c = 0) const noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    bool same_shape(const ImageBuffer& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ &&
               channels_ == other.channels_;
    }

    // True when every sample lies inside the range interval widened by `slack`.
    bool within_range(double slack = 1e-6) const noexcept;

    // One channel as a single-channel image.
    ImageBuffer channel(int c) const;
    void set_channel(int c, const ImageBuffer& plane);

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    RangeTag range_ = RangeTag::Unit;
    std::vector<double> data_;
};

// x -> (x + 1) / 2 for signed images; unit images are returned unchanged.
ImageBuffer to_unit_range(const ImageBuffer& img);
// x -> 2x - 1 for unit images; signed images are returned unchanged.
ImageBuffer to_signed_range(const ImageBuffer& img);

// Binary per-pixel edge flags.
struct EdgeMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    std::uint8_t at(int y, int x) const noexcept {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    std::size_t count() const noexcept;
};

}  // namespace swinhaze
