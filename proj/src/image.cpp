#include "swinhaze/image.hpp"

#include <algorithm>
#include <string>

#include "swinhaze/error.hpp"

namespace swinhaze {

namespace {

void check_dims(int height, int width, int channels) {
    if (height < 1 || width < 1) {
        fail(ErrorCode::InvalidParameter,
             "image dimensions must be positive, got " + std::to_string(height) + "x" +
                 std::to_string(width));
    }
    if (channels != 1 && channels != 3) {
        fail(ErrorCode::InvalidChannels,
             "images carry 1 or 3 channels, got " + std::to_string(channels));
    }
}

}  // namespace

ImageBuffer::ImageBuffer(int height, int width, int channels, RangeTag range)
    : height_(height), width_(width), channels_(channels), range_(range) {
    check_dims(height, width, channels);
    data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
}

ImageBuffer::ImageBuffer(int height, int width, int channels, std::vector<double> data,
                         RangeTag range)
    : height_(height), width_(width), channels_(channels), range_(range),
      data_(std::move(data)) {
    check_dims(height, width, channels);
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
        fail(ErrorCode::ShapeMismatch, "sample count " + std::to_string(data_.size()) +
                                           " does not match " + std::to_string(height) + "x" +
                                           std::to_string(width) + "x" +
                                           std::to_string(channels));
    }
}

ImageBuffer ImageBuffer::filled(int height, int width, int channels, double value,
                                RangeTag range) {
    ImageBuffer img(height, width, channels, range);
    std::fill(img.data_.begin(), img.data_.end(), value);
    return img;
}

bool ImageBuffer::within_range(double slack) const noexcept {
    const double lo = (range_ == RangeTag::Unit ? 0.0 : -1.0) - slack;
    const double hi = 1.0 + slack;
    return std::all_of(data_.begin(), data_.end(),
                       [&](double v) { return v >= lo && v <= hi; });
}

ImageBuffer ImageBuffer::channel(int c) const {
    if (c < 0 || c >= channels_) {
        fail(ErrorCode::InvalidChannels, "channel index out of range");
    }
    ImageBuffer out(height_, width_, 1, range_);
    for (std::size_t i = 0; i < pixel_count(); ++i) {
        out.data_[i] = data_[i * channels_ + c];
    }
    return out;
}

void ImageBuffer::set_channel(int c, const ImageBuffer& plane) {
    if (c < 0 || c >= channels_ || plane.channels_ != 1 || plane.height_ != height_ ||
        plane.width_ != width_) {
        fail(ErrorCode::ShapeMismatch, "plane does not fit the target channel");
    }
    for (std::size_t i = 0; i < pixel_count(); ++i) {
        data_[i * channels_ + c] = plane.data_[i];
    }
}

ImageBuffer to_unit_range(const ImageBuffer& img) {
    if (img.range() == RangeTag::Unit) return img;
    ImageBuffer out = img;
    for (double& v : out.data()) v = (v + 1.0) * 0.5;
    out.set_range(RangeTag::Unit);
    return out;
}

ImageBuffer to_signed_range(const ImageBuffer& img) {
    if (img.range() == RangeTag::Signed) return img;
    ImageBuffer out = img;
    for (double& v : out.data()) v = 2.0 * v - 1.0;
    out.set_range(RangeTag::Signed);
    return out;
}

std::size_t EdgeMap::count() const noexcept {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

}  // namespace swinhaze
