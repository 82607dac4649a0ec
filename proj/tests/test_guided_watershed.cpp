#include <gtest/gtest.h>

#include "oracles.hpp"
#include "swinhaze/error.hpp"
#include "swinhaze/guided_filter.hpp"
#include "swinhaze/imaging.hpp"
#include "swinhaze/watershed.hpp"

using namespace swinhaze;

TEST(Guided, DefaultRadiusScalesWithHeight) {
    EXPECT_EQ(guided::default_radius(256), 4);
    EXPECT_EQ(guided::default_radius(64), 1);
    EXPECT_EQ(guided::default_radius(8), 1);
    EXPECT_EQ(guided::default_radius(512), 8);
}

TEST(Guided, MatchesTwoPassOracle) {
    std::mt19937_64 rng(11);
    for (int r = 1; r <= 3; ++r)
        for (double eps : {1e-4, 1e-2}) {
            const auto g = oracle::random_image(rng, 9, 11, 3);
            const auto p = oracle::random_image(rng, 9, 11, 3);
            const auto coefs = guided::guided_coefficients(g, p, r, eps);
            const auto [a, b] = oracle::guided_coefficients(g, p, r, eps);
            for (std::size_t i = 0; i < a.size(); ++i) {
                EXPECT_NEAR(coefs.a.data()[i], a.data()[i], 1e-9);
                EXPECT_NEAR(coefs.b.data()[i], b.data()[i], 1e-9);
            }
            for (bool smooth : {false, true}) {
                const auto got = guided::guided_filter(g, p, r, eps, smooth);
                const auto want = oracle::guided_filter(g, p, r, eps, smooth);
                for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-9);
            }
        }
}

TEST(Guided, SelfGuidedWithHugeEpsApproachesBoxMean) {
    std::mt19937_64 rng(12);
    const auto img = oracle::random_image(rng, 8, 8, 1);
    const auto out = guided::guided_filter(img, img, 1, 1e9);
    const auto mean = oracle::box_mean(img, 1);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.data()[i], mean.data()[i], 1e-8);
}

TEST(Guided, ConstantWindowsGiveExactZeroSlope) {
    std::mt19937_64 rng(13);
    // Left half constant, right half noise; windows fully inside the left half are exact.
    ImageBuffer guide(10, 12, 1);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x) guide.at(y, x) = x < 6 ? 0.3 : std::uniform_real_distribution<>(0, 1)(rng);
    const auto ref = oracle::random_image(rng, 10, 12, 1);
    const auto c = guided::guided_coefficients(guide, ref, 2, 1e-4);
    const auto mu = imaging::box_mean(ref, 2);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x <= 3; ++x) {
            EXPECT_EQ(c.a.at(y, x), 0.0);
            EXPECT_EQ(c.b.at(y, x), mu.at(y, x));
        }
}

TEST(Guided, RejectsBadArguments) {
    const auto img = ImageBuffer::filled(4, 4, 1, 0.5);
    EXPECT_THROW(guided::guided_coefficients(img, img, 0, 1e-4), Error);
    EXPECT_THROW(guided::guided_coefficients(img, img, 1, 0.0), Error);
    EXPECT_THROW(guided::guided_coefficients(img, ImageBuffer::filled(4, 5, 1, 0.5), 1, 1e-4), Error);
}

namespace {

std::vector<double> values(const ImageBuffer& img) { return {img.data().begin(), img.data().end()}; }

}  // namespace

TEST(Watershed, MinimaMatchPlateauFlood) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        ImageBuffer img(7, 6, 1);
        for (double& v : img.data()) v = static_cast<double>(rng() % 4);  // many plateaus
        const auto got = watershed::detect_minima(img);
        EXPECT_EQ(got.labels, oracle::minima(values(img), 7, 6));
    }
}

TEST(Watershed, PropagationMatchesSequentialOracle) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        const auto img = oracle::random_image(rng, 9, 7, 1);
        const auto seeds = watershed::detect_minima(img);
        const auto got = watershed::propagate_labels(img, seeds);
        EXPECT_EQ(got.labels, oracle::flood(values(img), 9, 7, seeds.labels));
    }
}

TEST(Watershed, EveryPixelLabeledAndSeedsKept) {
    std::mt19937_64 rng(23);
    const auto img = oracle::random_image(rng, 12, 12, 1);
    const auto seeds = watershed::detect_minima(img);
    const auto lab = watershed::propagate_labels(img, seeds);
    for (std::size_t i = 0; i < lab.labels.size(); ++i) {
        EXPECT_GE(lab.labels[i], 1);
        if (seeds.labels[i]) EXPECT_EQ(lab.labels[i], seeds.labels[i]);
    }
    EXPECT_EQ(lab.max_label(), seeds.max_label());
}

TEST(Watershed, NormalizationRange) {
    watershed::LabelMap m{2, 2, {1, 2, 3, 3}};
    const auto n = watershed::normalize_labels(m, 1e-8);
    EXPECT_EQ(n.values[0], 0.0);
    EXPECT_NEAR(n.values[1], 1.0 / (2 + 1e-8), 1e-15);
    EXPECT_LT(n.values[3], 1.0);
    watershed::LabelMap single{1, 3, {1, 1, 1}};
    for (double v : watershed::normalize_labels(single, 1e-8).values) EXPECT_EQ(v, 0.0);
}

TEST(Watershed, ErrorCategories) {
    const auto img = ImageBuffer::filled(3, 3, 1, 0.0);
    watershed::LabelMap empty{3, 3, std::vector<int>(9, 0)};
    try {
        watershed::propagate_labels(img, empty);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoSeeds);
    }
    try {
        watershed::normalize_labels(empty, 1e-8);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IncompleteLabeling);
    }
    try {
        watershed::detect_minima(ImageBuffer::filled(3, 3, 3, 0.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidChannels);
    }
}

TEST(Watershed, MapOfConstantImageIsAllZero) {
    const auto m = watershed::watershed_map(ImageBuffer::filled(16, 16, 3, 0.4));
    for (double v : m.values) EXPECT_EQ(v, 0.0);
}

TEST(Watershed, TwoBasinsSplitBetweenThem) {
    ImageBuffer img(1, 9, 1, {0.0, 0.1, 0.2, 0.3, 0.4, 0.3, 0.2, 0.1, 0.0});
    const auto lab = watershed::propagate_labels(img, watershed::detect_minima(img));
    EXPECT_EQ(lab.labels, (std::vector<int>{1, 1, 1, 1, 1, 2, 2, 2, 2}));
}
