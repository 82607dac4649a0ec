#include <gtest/gtest.h>

#include <fstream>

#include "oracles.hpp"
#include "swinhaze/error.hpp"
#include "swinhaze/imaging.hpp"

using namespace swinhaze;

namespace {

double dot(const ImageBuffer& a, const ImageBuffer& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

}  // namespace

TEST(Imaging, ReflectIndexMatchesFolding) {
    for (int n = 1; n < 7; ++n)
        for (int i = -2 * n; i < 3 * n; ++i) EXPECT_EQ(imaging::reflect_index(i, n), oracle::mirror(i, n)) << i << ' ' << n;
}

TEST(Imaging, GaussianKernelIsNormalizedAndSymmetric) {
    const auto k = imaging::gaussian_kernel(1.4);
    ASSERT_EQ(k.size(), 2u * 5 + 1);
    double s = 0;
    for (double v : k) s += v;
    EXPECT_NEAR(s, 1.0, 1e-15);
    for (std::size_t i = 0; i < k.size(); ++i) EXPECT_DOUBLE_EQ(k[i], k[k.size() - 1 - i]);
}

TEST(Imaging, BoxMeanMatchesDirectSum) {
    std::mt19937_64 rng(3);
    for (int r = 1; r <= 3; ++r) {
        const auto img = oracle::random_image(rng, 7, 9, 3);
        const auto got = imaging::box_mean(img, r);
        const auto want = oracle::box_mean(img, r);
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-12);
    }
}

TEST(Imaging, AdjointsSatisfyInnerProductIdentity) {
    std::mt19937_64 rng(4);
    const auto x = oracle::random_image(rng, 10, 8, 3);
    const auto y = oracle::random_image(rng, 10, 8, 3);
    EXPECT_NEAR(dot(imaging::box_mean(x, 2), y), dot(x, imaging::box_mean_adjoint(y, 2)), 1e-11);
    EXPECT_NEAR(dot(imaging::gaussian_blur(x, 1.0), y), dot(x, imaging::gaussian_blur_adjoint(y, 1.0)), 1e-11);
}

TEST(Imaging, BilinearResizeMatchesFormula) {
    std::mt19937_64 rng(5);
    const auto img = oracle::random_image(rng, 9, 13, 3);
    for (auto [h, w] : {std::pair{4, 5}, {18, 26}, {9, 13}, {7, 20}}) {
        const auto got = imaging::resize_bilinear(img, h, w);
        const auto want = oracle::resize_bilinear(img, h, w);
        ASSERT_TRUE(got.same_shape(want));
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-12);
    }
}

TEST(Imaging, GrayscaleUsesBt601) {
    ImageBuffer img(1, 1, 3, {0.2, 0.4, 0.6});
    EXPECT_NEAR(imaging::to_grayscale(img).at(0, 0), 0.299 * 0.2 + 0.587 * 0.4 + 0.114 * 0.6, 1e-15);
}

TEST(Imaging, QuantizeRoundsHalfUpAndClamps) {
    EXPECT_EQ(imaging::quantize(0.0), 0);
    EXPECT_EQ(imaging::quantize(1.0), 255);
    EXPECT_EQ(imaging::quantize(-0.3), 0);
    EXPECT_EQ(imaging::quantize(1.7), 255);
    EXPECT_EQ(imaging::quantize(127.5 / 255.0), 128);
}

TEST(Imaging, PngRoundTripIsExactOnByteGrid) {
    const auto dir = oracle::temp_dir("png");
    ImageBuffer img(5, 4, 3);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>((i * 37) % 256) / 255.0;
    imaging::save_image(img, dir / "a.png");
    const auto back = imaging::load_image(dir / "a.png");
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_DOUBLE_EQ(back.data()[i], img.data()[i]);

    ImageBuffer signed_img = ImageBuffer::filled(2, 2, 1, -1.0, RangeTag::Signed);
    imaging::save_image(signed_img, dir / "s.png");
    EXPECT_EQ(imaging::load_image(dir / "s.png").at(0, 0), 0.0);
    std::filesystem::remove_all(dir);
}

TEST(Imaging, LoadErrorsNameThePath) {
    const auto dir = oracle::temp_dir("bad");
    try {
        imaging::load_image(dir / "missing.png");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
        EXPECT_NE(std::string(e.what()).find("missing.png"), std::string::npos);
    }
    std::ofstream(dir / "junk.png") << "not a png";
    try {
        imaging::load_image(dir / "junk.png");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnsupportedFormat);
        EXPECT_NE(std::string(e.what()).find("junk.png"), std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST(Canny, ConstantImageHasNoEdges) {
    for (double v : {0.0, 0.37, 1.0}) EXPECT_EQ(imaging::canny_edges(ImageBuffer::filled(20, 20, 3, v)).count(), 0u);
}

TEST(Canny, VerticalStepGivesOneThinLine) {
    ImageBuffer img(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 8; x < 16; ++x) img.at(y, x) = 1.0;
    const auto e = imaging::canny_edges(img);
    for (int y = 0; y < 16; ++y) {
        int on = 0;
        for (int x = 0; x < 16; ++x) {
            if (e.at(y, x)) {
                ++on;
                EXPECT_TRUE(x == 7 || x == 8) << y << ',' << x;
            }
        }
        EXPECT_EQ(on, 1) << "row " << y;
    }
}

TEST(Canny, WeakStepOnlyPassesWithLowerThresholds) {
    ImageBuffer img(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 8; x < 16; ++x) img.at(y, x) = 0.1;  // Sobel magnitude ~ 0.1 * 255 * 4 * smoothing
    EXPECT_EQ(imaging::canny_edges(img, {100, 200, 1.4}).count(), 0u);
    EXPECT_EQ(imaging::canny_edges(img, {10, 20, 1.4}).count(), 16u);
}

TEST(Canny, HysteresisKeepsWeakPixelsConnectedToStrongOnes) {
    // Step height fades along the edge, so only its top end is strong.
    ImageBuffer img(24, 16, 1);
    for (int y = 0; y < 24; ++y)
        for (int x = 8; x < 16; ++x) img.at(y, x) = 1.0 - 0.04 * y;
    auto rows_hit = [](const EdgeMap& e) {
        int rows = 0;
        for (int y = 0; y < e.height; ++y) {
            int on = 0;
            for (int x = 0; x < e.width; ++x) on += e.at(y, x);
            rows += on > 0;
        }
        return rows;
    };
    const auto loose = imaging::canny_edges(img, {30, 200, 1.0});
    const auto strict = imaging::canny_edges(img, {199, 200, 1.0});
    EXPECT_EQ(rows_hit(loose), 24);
    EXPECT_GT(rows_hit(strict), 0);
    EXPECT_LT(rows_hit(strict), 24);
}
