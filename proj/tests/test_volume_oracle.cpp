// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/error.hpp"
#include "gvkf/volume_oracle.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace gvkf {
namespace {

using test::kernel_at;

TEST(VolumeOracle, ConfigValidation) {
    EXPECT_NO_THROW(validate(QuadratureConfig{}));
    EXPECT_THROW(validate(QuadratureConfig{0.0, 10.0}), Error);
    EXPECT_THROW(validate(QuadratureConfig{1.0, 0.5}), Error);
}

TEST(VolumeOracle, ConstantDensityHasClosedFormTransmittance) {
    Medium m;
    m.density = [](double) { return 0.7; };
    m.color = [](double) { return Rgb{1.0, 0.5, 0.25}; };
    m.background = Rgb{0.0, 0.0, 1.0};
    const QuadratureConfig q{1e-2, 2.0};
    EXPECT_NEAR(transmittance_exact(m, 2.0, q), std::exp(-1.4), 1e-12);
    const auto v = render_volume(m, q);
    EXPECT_NEAR(v.transmittance, std::exp(-1.4), 1e-12);
    EXPECT_NEAR(v.color.r, 1.0 - std::exp(-1.4), 1e-12);
    EXPECT_NEAR(v.color.b, 0.25 * (1.0 - std::exp(-1.4)) + std::exp(-1.4), 1e-12);
}

TEST(VolumeOracle, NormalizedProfileIntegratesToAlpha) {
    const auto f = make_field({kernel_at(3.0, 10.0, 0.3)});
    const QuadratureConfig q{1e-3, 6.0};
    const auto m = medium_from_field(f, KernelProfile::NormalizedGaussian);
    EXPECT_NEAR(-std::log(transmittance_exact(m, 6.0, q)), 0.3, 1e-10);
}

TEST(VolumeOracle, SolidProfileIntegralHasErfClosedForm) {
    const double k = 4.0;
    const double alpha = 0.2;
    const auto f = make_field({kernel_at(3.0, k, alpha)});
    const QuadratureConfig q{1e-4, 5.0, QuadratureScheme::Trapezoid};
    // Integral over [0, 3] of alpha exp(-k (t-3)^2) plus alpha over [3, 5].
    const double pre = alpha * 0.5 * std::sqrt(std::numbers::pi / k) * std::erf(3.0 * std::sqrt(k));
    EXPECT_NEAR(-std::log(transmittance_exact(f, 5.0, q)), pre + 2.0 * alpha, 1e-7);
}

TEST(VolumeOracle, MixedColorIsDensityWeighted) {
    auto a = kernel_at(2.0, 1.0, 0.3);
    a.color = Rgb{1.0, 0.0, 0.0};
    auto b = kernel_at(2.0, 1.0, 0.1);
    b.color = Rgb{0.0, 1.0, 0.0};
    const auto f = make_field({a, b});
    const auto m = medium_from_field(f);
    const Rgb c = m.color(1.5);
    EXPECT_NEAR(c.r, 0.75, 1e-15);
    EXPECT_NEAR(c.g, 0.25, 1e-15);
    const auto empty = make_field({});
    EXPECT_EQ(medium_from_field(empty).color(1.0), Rgb{});
}

TEST(VolumeOracle, CoarseStepIsFlagged) {
    const auto f = make_field({kernel_at(2.0, 400.0, 0.5)});
    EXPECT_TRUE(render_volume(f, QuadratureConfig{0.1, 4.0}).coarse_step);
    EXPECT_FALSE(render_volume(f, QuadratureConfig{0.01, 4.0}).coarse_step);
}

TEST(VolumeOracle, EmptyFieldShowsBackground) {
    const auto f = make_field({}, Rgb{0.3, 0.2, 0.1});
    const auto v = render_volume(f, QuadratureConfig{});
    EXPECT_EQ(v.transmittance, 1.0);
    EXPECT_EQ(v.color, (Rgb{0.3, 0.2, 0.1}));
}

TEST(VolumeOracle, SmallOpacityAgreesWithBlendedLimit) {
    test::Rng rng(21);
    for (int i = 0; i < 10; ++i) {
        std::vector<RayKernel> ks;
        double sum = 0.0;
        for (int j = 0; j < 5; ++j) {
            ks.push_back(kernel_at(test::uni(rng, 2.0, 8.0), test::uni(rng, 2.0, 40.0),
                                   test::uni(rng, 0.0, 0.04), j));
            sum += ks.back().alpha;
        }
        const auto f = make_field(ks, {}, 12.0);
        const auto m = medium_from_field(f, KernelProfile::NormalizedGaussian);
        const double exact = cdf_exact(m, 12.0, QuadratureConfig{1e-3, 12.0});
        EXPECT_LE(std::abs(cdf_phi_limit(f) - exact), sum * sum + 1e-4);
    }
}

} // namespace
} // namespace gvkf
