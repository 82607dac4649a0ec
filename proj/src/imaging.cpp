#include "swinhaze/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <numbers>
#include <string>

#include "swinhaze/error.hpp"

namespace swinhaze::imaging {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_error_to_longjmp(png_structp png, png_const_charp) { std::longjmp(png_jmpbuf(png), 1); }
void png_warning_ignore(png_structp, png_const_charp) {}

void write_png_bytes(const std::filesystem::path& path, int height, int width, int channels,
                     const std::vector<std::uint8_t>& bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
        std::string reason = image.message;
        png_image_free(&image);
        fail(ErrorCode::IoError, "cannot write " + path.string() + ": " + reason);
    }
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        fail(ErrorCode::NotFound, "no such image: " + path.string());
    }
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) fail(ErrorCode::IoError, "cannot open " + path.string());

    std::array<png_byte, 8> signature{};
    if (std::fread(signature.data(), 1, signature.size(), file.get()) != signature.size() ||
        png_sig_cmp(signature.data(), 0, signature.size()) != 0) {
        fail(ErrorCode::UnsupportedFormat, "not a PNG file: " + path.string());
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             png_error_to_longjmp, png_warning_ignore);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::IoError, "libpng initialisation failed");
    }

    // Everything touched after setjmp lives outside the jump scope.
    std::vector<std::uint8_t> bytes;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int bit_depth = 0;
    int color_type = 0;
    bool has_trns = false;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::UnsupportedFormat, "corrupt PNG data in " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, static_cast<int>(signature.size()));
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr,
                 nullptr);
    has_trns = png_get_valid(png, info, PNG_INFO_tRNS) != 0;

    const bool supported_type = color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_RGB;
    if (!supported_type || bit_depth != 8 || has_trns) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::UnsupportedFormat,
             path.string() + ": only 8-bit grayscale or RGB PNG without alpha is supported "
                             "(color type " + std::to_string(color_type) + ", bit depth " +
                 std::to_string(bit_depth) + ")");
    }
    const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    bytes.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = bytes.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImageBuffer img(static_cast<int>(height), static_cast<int>(width), channels);
    auto samples = img.data();
    for (std::size_t i = 0; i < bytes.size(); ++i) samples[i] = bytes[i] / 255.0;
    return img;
}

std::uint8_t quantize(double unit_value) {
    const double scaled = std::floor(unit_value * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
    if (img.empty()) fail(ErrorCode::InvalidParameter, "cannot save an empty image");
    const ImageBuffer unit = to_unit_range(img);
    std::vector<std::uint8_t> bytes(unit.size());
    std::transform(unit.data().begin(), unit.data().end(), bytes.begin(), quantize);
    write_png_bytes(path, img.height(), img.width(), img.channels(), bytes);
}

void save_edge_map(const EdgeMap& edges, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes(edges.data.size());
    std::transform(edges.data.begin(), edges.data.end(), bytes.begin(),
                   [](std::uint8_t e) { return static_cast<std::uint8_t>(e ? 255 : 0); });
    write_png_bytes(path, edges.height, edges.width, 1, bytes);
}

ImageBuffer to_grayscale(const ImageBuffer& img) {
    if (img.channels() != 3) {
        fail(ErrorCode::InvalidChannels, "to_grayscale expects a 3-channel image");
    }
    ImageBuffer out(img.height(), img.width(), 1, img.range());
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        dst[i] = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    }
    return out;
}

int reflect_index(int i, int n) noexcept {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) fail(ErrorCode::InvalidParameter, "sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double w = std::exp(-(k * k) / (2.0 * sigma * sigma));
        taps[k + radius] = w;
        sum += w;
    }
    for (double& w : taps) w /= sum;
    return taps;
}

ImageBuffer separable_filter(const ImageBuffer& img, const std::vector<double>& taps) {
    const int h = img.height();
    const int w = img.width();
    const int c = img.channels();
    const int r = static_cast<int>(taps.size() / 2);
    ImageBuffer tmp(h, w, c, img.range());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k) acc += taps[k + r] * img.at(y, reflect_index(x + k, w), ch);
                tmp.at(y, x, ch) = acc;
            }
        }
    }
    ImageBuffer out(h, w, c, img.range());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k) acc += taps[k + r] * tmp.at(reflect_index(y + k, h), x, ch);
                out.at(y, x, ch) = acc;
            }
        }
    }
    return out;
}

ImageBuffer separable_filter_adjoint(const ImageBuffer& img, const std::vector<double>& taps) {
    const int h = img.height();
    const int w = img.width();
    const int c = img.channels();
    const int r = static_cast<int>(taps.size() / 2);
    // Transpose of (vertical o horizontal) = horizontal^T o vertical^T.
    ImageBuffer tmp(h, w, c, img.range());
    for (int y = 0; y < h; ++y) {
        for (int k = -r; k <= r; ++k) {
            const int src = reflect_index(y + k, h);
            for (int x = 0; x < w; ++x) {
                for (int ch = 0; ch < c; ++ch) tmp.at(src, x, ch) += taps[k + r] * img.at(y, x, ch);
            }
        }
    }
    ImageBuffer out(h, w, c, img.range());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int k = -r; k <= r; ++k) {
                const int src = reflect_index(x + k, w);
                for (int ch = 0; ch < c; ++ch) out.at(y, src, ch) += taps[k + r] * tmp.at(y, x, ch);
            }
        }
    }
    return out;
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
    return separable_filter(img, gaussian_kernel(sigma));
}

ImageBuffer gaussian_blur_adjoint(const ImageBuffer& img, double sigma) {
    return separable_filter_adjoint(img, gaussian_kernel(sigma));
}

namespace {

std::vector<double> box_taps(int radius) {
    if (radius < 1) fail(ErrorCode::InvalidParameter, "box radius must be at least 1");
    return std::vector<double>(2 * radius + 1, 1.0 / (2 * radius + 1));
}

}  // namespace

ImageBuffer box_mean(const ImageBuffer& img, int radius) {
    return separable_filter(img, box_taps(radius));
}

ImageBuffer box_mean_adjoint(const ImageBuffer& img, int radius) {
    return separable_filter_adjoint(img, box_taps(radius));
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_height, int out_width) {
    if (out_height < 1 || out_width < 1) {
        fail(ErrorCode::InvalidParameter, "resize target must be positive");
    }
    if (out_height == img.height() && out_width == img.width()) return img;
    const int c = img.channels();
    ImageBuffer out(out_height, out_width, c, img.range());
    const double sy = static_cast<double>(img.height()) / out_height;
    const double sx = static_cast<double>(img.width()) / out_width;
    for (int y = 0; y < out_height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < c; ++ch) {
                const double top = (1.0 - wx) * img.at(y0, x0, ch) + wx * img.at(y0, x1, ch);
                const double bottom = (1.0 - wx) * img.at(y1, x0, ch) + wx * img.at(y1, x1, ch);
                out.at(y, x, ch) = (1.0 - wy) * top + wy * bottom;
            }
        }
    }
    return out;
}

EdgeMap canny_edges(const ImageBuffer& img, const CannyOptions& options) {
    if (!(options.low < options.high)) {
        fail(ErrorCode::InvalidParameter, "canny thresholds require low < high");
    }
    ImageBuffer gray = to_unit_range(img.channels() == 3 ? to_grayscale(img) : img);
    if (gray.channels() != 1) fail(ErrorCode::InvalidChannels, "canny expects 1 or 3 channels");
    for (double& v : gray.data()) v *= 255.0;
    const ImageBuffer smooth = gaussian_blur(gray, options.sigma);

    const int h = smooth.height();
    const int w = smooth.width();
    std::vector<double> mag(static_cast<std::size_t>(h) * w);
    std::vector<std::uint8_t> sector(mag.size());
    auto px = [&](int y, int x) { return smooth.at(reflect_index(y, h), reflect_index(x, w)); };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                              (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
            const double gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                              (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            mag[i] = std::hypot(gx, gy);
            double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
            if (angle < 0) angle += 180.0;
            if (angle < 22.5 || angle >= 157.5) sector[i] = 0;
            else if (angle < 67.5) sector[i] = 1;
            else if (angle < 112.5) sector[i] = 2;
            else sector[i] = 3;
        }
    }

    // Neighbour steps along the gradient for each sector (dy, dx).
    constexpr std::array<std::array<int, 2>, 4> kStep{{{0, 1}, {1, 1}, {1, 0}, {1, -1}}};
    auto mag_at = [&](int y, int x) {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
        return mag[static_cast<std::size_t>(y) * w + x];
    };

    // 0 = none, 1 = weak, 2 = strong
    std::vector<std::uint8_t> level(mag.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double m = mag[i];
            if (m <= options.low) continue;
            const auto [dy, dx] = kStep[sector[i]];
            if (m > mag_at(y - dy, x - dx) && m >= mag_at(y + dy, x + dx)) {
                level[i] = m > options.high ? 2 : 1;
            }
        }
    }

    EdgeMap edges{h, w, std::vector<std::uint8_t>(mag.size(), 0)};
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < level.size(); ++i) {
        if (level[i] == 2) {
            edges.data[i] = 1;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int y = static_cast<int>(i / w);
        const int x = static_cast<int>(i % w);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int ny = y + dy;
                const int nx = x + dx;
                if ((dy == 0 && dx == 0) || ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
                if (level[j] == 1 && !edges.data[j]) {
                    edges.data[j] = 1;
                    stack.push_back(j);
                }
            }
        }
    }
    return edges;
}

}  // namespace swinhaze::imaging
