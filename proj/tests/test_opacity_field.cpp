// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/opacity_field.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace gvkf {
namespace {

using test::kernel_at;
using test::Rng;

TEST(OpacityField, KernelIsGaussianBeforePeakAndSolidAfter) {
    const auto k = kernel_at(2.0, 4.0, 0.5);
    EXPECT_NEAR(kernel_value(k, 1.5), std::exp(-4.0 * 0.25), 1e-15);
    EXPECT_EQ(kernel_value(k, 2.0), 1.0);
    EXPECT_EQ(kernel_value(k, 7.0), 1.0);
}

TEST(OpacityField, SingleKernelPhiIsAlphaTimesKernel) {
    const auto f = make_field({kernel_at(2.0, 4.0, 0.5)});
    EXPECT_NEAR(cdf_phi(f, 1.5), 0.5 * std::exp(-1.0), 1e-15);
    EXPECT_NEAR(cdf_phi(f, 3.0), 0.5, 1e-15);
    EXPECT_NEAR(rho(f, 1.5), 0.5 * std::exp(-1.0), 1e-15);
}

TEST(OpacityField, TwoKernelsHandComputed) {
    const auto f = make_field({kernel_at(1.0, 1.0, 0.5), kernel_at(2.0, 1.0, 0.4)});
    // Past both peaks: 0.5 + 0.4 * 0.5.
    EXPECT_NEAR(cdf_phi(f, 5.0), 0.7, 1e-15);
    EXPECT_NEAR(cdf_phi_limit(f), 0.7, 1e-15);
    // Between peaks: a1 = 0.5, a2 = 0.4 exp(-0.25).
    const double a2 = 0.4 * std::exp(-0.25);
    EXPECT_NEAR(cdf_phi(f, 1.5), 0.5 + a2 * 0.5, 1e-15);
}

TEST(OpacityField, SumFormEqualsProductForm) {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto f = test::random_field(rng, 1, 50);
        for (int j = 0; j < 50; ++j) {
            const double t = test::uni(rng, 0.0, 10.0);
            EXPECT_NEAR(cdf_phi(f, t), cdf_phi_product(f, t), 1e-12);
        }
    }
}

TEST(OpacityField, PhiIsMonotoneAndBounded) {
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const auto f = test::random_field(rng, 1, 50);
        const double limit = cdf_phi_limit(f);
        double prev = 0.0;
        for (int j = 0; j < 1024; ++j) {
            const double phi = cdf_phi(f, 10.0 * j / 1023.0);
            EXPECT_GE(phi, prev - 1e-15);
            EXPECT_GE(phi, 0.0);
            EXPECT_LE(phi, limit + 1e-12);
            prev = phi;
        }
    }
}

TEST(OpacityField, FullyOpaqueKernelSaturates) {
    const auto f = make_field({kernel_at(1.0, 2.0, 1.0), kernel_at(3.0, 2.0, 0.5)});
    EXPECT_EQ(cdf_phi(f, 2.0), 1.0);
    EXPECT_EQ(cdf_phi_limit(f), 1.0);
    const auto w = blend_weights(f);
    EXPECT_EQ(w[1], 0.0);
}

TEST(OpacityField, EmptyFieldIsTransparent) {
    const RayField f = make_field({}, Rgb{0.2, 0.3, 0.4});
    EXPECT_EQ(cdf_phi(f, 5.0), 0.0);
    EXPECT_EQ(rho(f, 5.0), 0.0);
    EXPECT_TRUE(std::isinf(render_depth(f)));
    const auto c = render_ray(f);
    EXPECT_EQ(c.opacity, 0.0);
    EXPECT_EQ(c.color, (Rgb{0.2, 0.3, 0.4}));
}

TEST(OpacityField, SortIsByDepthThenSource) {
    auto a = kernel_at(2.0, 1.0, 0.1, 5);
    auto b = kernel_at(2.0, 1.0, 0.1, 1);
    auto c = kernel_at(1.0, 1.0, 0.1, 9);
    const auto f = make_field({a, b, c});
    EXPECT_EQ(f.kernels[0].source, 9u);
    EXPECT_EQ(f.kernels[1].source, 1u);
    EXPECT_EQ(f.kernels[2].source, 5u);
}

TEST(OpacityField, RenderRayCompositesFrontToBack) {
    auto a = kernel_at(1.0, 1.0, 0.5, 0);
    a.color = Rgb{1.0, 0.0, 0.0};
    auto b = kernel_at(2.0, 1.0, 0.5, 1);
    b.color = Rgb{0.0, 1.0, 0.0};
    const auto f = make_field({a, b}, Rgb{0.0, 0.0, 1.0});
    const auto c = render_ray(f, 0.0);
    EXPECT_NEAR(c.color.r, 0.5, 1e-15);
    EXPECT_NEAR(c.color.g, 0.25, 1e-15);
    EXPECT_NEAR(c.color.b, 0.25, 1e-15);
    EXPECT_NEAR(c.opacity, 0.75, 1e-15);
    EXPECT_NEAR(render_depth(f), (0.5 * 1.0 + 0.25 * 2.0) / 0.75, 1e-15);
}

TEST(OpacityField, BuildRayFieldCullsNearFarAndFaint) {
    std::vector<GaussianPrimitive> gs(4);
    gs[0].position = Vec3(0, 0, 2);   // kept
    gs[1].position = Vec3(0, 0, -2);  // behind the origin
    gs[2].position = Vec3(0, 0, 50);  // beyond the far bound
    gs[3].position = Vec3(0, 0, 4);
    gs[3].opacity = 1e-5;             // below min_alpha
    for (auto &g : gs) {
        g.scale = Vec3::Constant(0.2);
    }
    std::vector<PreparedGaussian> pg;
    for (const auto &g : gs) {
        pg.push_back(prepare(g));
    }
    const auto f = build_ray_field(pg, make_ray(Vec3::Zero(), Vec3::UnitZ(), 10.0), CullOptions{});
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f.kernels[0].source, 0u);

    const std::vector<std::size_t> only{3};
    CullOptions loose;
    loose.min_alpha = 0.0;
    const auto g = build_ray_field(pg, make_ray(Vec3::Zero(), Vec3::UnitZ(), 10.0), loose, {}, only);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g.kernels[0].source, 3u);
}

TEST(OpacityField, InfluenceSphereRejectsDistantRays) {
    GaussianPrimitive g;
    g.position = Vec3(1.0, 0.0, 2.0);
    g.scale = Vec3::Constant(0.1);
    const std::vector<PreparedGaussian> pg{prepare(g)};
    CullOptions opts;
    opts.min_alpha = 0.0;
    EXPECT_TRUE(build_ray_field(pg, make_ray(Vec3::Zero(), Vec3::UnitZ(), 10.0), opts).empty());
}

} // namespace
} // namespace gvkf
