// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/error.hpp"
#include "gvkf/scenes.hpp"
#include "gvkf/trainer.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace gvkf {
namespace {

using test::kernel_at;

std::vector<GaussianPrimitive> three_gaussians() {
    std::vector<GaussianPrimitive> gs(3);
    gs[0].position = Vec3(-0.3, 0.0, 0.0);
    gs[0].scale = Vec3(0.2, 0.15, 0.1);
    gs[0].opacity = 0.8;
    gs[0].color = Rgb{0.9, 0.2, 0.1};
    gs[1].position = Vec3(0.3, 0.1, 0.1);
    gs[1].scale = Vec3(0.15, 0.2, 0.15);
    gs[1].opacity = 0.7;
    gs[1].color = Rgb{0.1, 0.8, 0.3};
    gs[2].position = Vec3(0.0, -0.3, -0.1);
    gs[2].scale = Vec3(0.25, 0.1, 0.1);
    gs[2].opacity = 0.9;
    gs[2].color = Rgb{0.2, 0.3, 0.9};
    return gs;
}

std::vector<TargetView> views_of(const SparseVoxelGrid &scene, int count) {
    std::vector<TargetView> views;
    for (int v = 0; v < count; ++v) {
        Camera c = default_camera(16, 16, 2.5);
        const double a = 0.5 * v;
        c.position = Vec3(2.5 * std::sin(a), 0.3, 2.5 * std::cos(a));
        views.push_back({c, render_image(scene, c, RenderOptions{}).color});
    }
    return views;
}

TEST(Trainer, LossConfigValidation) {
    EXPECT_NO_THROW(validate(LossConfig{}));
    LossConfig c;
    c.lambda_dssim = 1.5;
    EXPECT_THROW(validate(c), Error);
    c = LossConfig{};
    c.ssim_window = 4;
    EXPECT_THROW(validate(c), Error);
    c = LossConfig{};
    c.lambda_dist = -1.0;
    EXPECT_THROW(validate(c), Error);
}

TEST(Trainer, L1IsMeanAbsoluteDifference) {
    ImageBuffer a(2, 1, 3, 0.5);
    ImageBuffer b(2, 1, 3, 0.5);
    b.at(0, 0, 0) = 0.8;
    b.at(1, 0, 2) = 0.2;
    EXPECT_NEAR(loss_l1(a, b), 0.6 / 6.0, 1e-15);
    EXPECT_THROW(loss_l1(a, ImageBuffer(1, 2, 3)), Error);
}

TEST(Trainer, SsimOfConstantImagesHasClosedForm) {
    const LossConfig cfg;
    const ImageBuffer a(16, 16, 1, 0.3);
    const ImageBuffer b(16, 16, 1, 0.6);
    const double c1 = 0.01 * 0.01;
    const double expect = (2.0 * 0.3 * 0.6 + c1) / (0.09 + 0.36 + c1);
    EXPECT_NEAR(ssim(a, b, cfg), expect, 1e-12);
    EXPECT_NEAR(ssim(a, a, cfg), 1.0, 1e-12);
    EXPECT_NEAR(loss_dssim(a, b, cfg), 0.5 * (1.0 - expect), 1e-12);
}

TEST(Trainer, SsimRejectsSmallOrMismatchedImages) {
    EXPECT_THROW(ssim(ImageBuffer(8, 8, 1), ImageBuffer(8, 8, 1)), Error);
    EXPECT_THROW(ssim(ImageBuffer(16, 16, 1), ImageBuffer(16, 16, 3)), Error);
}

TEST(Trainer, DepthDistortionHandComputed) {
    const auto f = make_field({kernel_at(1.0, 1.0, 0.5), kernel_at(3.0, 1.0, 0.5)});
    // w = (0.5, 0.25), |dt| = 2.
    EXPECT_NEAR(loss_depth_distortion(f), 0.25, 1e-15);
    EXPECT_NEAR(loss_depth_distortion(f, 2.0), 0.125, 1e-15);
    EXPECT_EQ(loss_depth_distortion(make_field({kernel_at(1.0, 1.0, 0.5)})), 0.0);
}

TEST(Trainer, ViewLossCombinesTerms) {
    RenderOutputs r;
    r.color = ImageBuffer(16, 16, 3, 0.4);
    r.statistic = ImageBuffer(16, 16, 1, 0.02);
    const ImageBuffer target(16, 16, 3, 0.5);
    const LossConfig cfg;
    const auto l = view_loss(r, target, cfg);
    EXPECT_NEAR(l.l1, 0.1, 1e-15);
    EXPECT_NEAR(l.distortion, 0.02, 1e-15);
    EXPECT_NEAR(l.total, 0.8 * l.l1 + 0.2 * l.dssim + 0.1 * 0.02, 1e-15);
}

TEST(Trainer, ColorGradientMatchesFiniteDifference) {
    auto gs = three_gaussians();
    const auto views = views_of(grid_from_gaussians(gs, 0.5), 1);
    for (auto &g : gs) {
        g.color = Rgb{0.5, 0.5, 0.5};
    }
    const RenderOptions ro;
    const auto grad = l1_color_gradient(prepare_all(gs), views[0].camera, views[0].image, ro);
    const double h = 1e-6;
    for (std::size_t i = 0; i < gs.size(); ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            auto plus = gs;
            auto minus = gs;
            plus[i].color[c] += h;
            minus[i].color[c] -= h;
            const double lp = loss_l1(render_gaussians(prepare_all(plus), views[0].camera, ro).color, views[0].image);
            const double lm = loss_l1(render_gaussians(prepare_all(minus), views[0].camera, ro).color, views[0].image);
            const double fd = (lp - lm) / (2.0 * h);
            EXPECT_NEAR(grad[i][c], fd, 0.05 * std::abs(fd) + 1e-9) << i << "," << c;
        }
    }
}

TEST(Trainer, ParameterGroupsPerMode) {
    EXPECT_EQ(parameter_groups(SceneMode::Direct).size(), 4u);
    EXPECT_EQ(parameter_groups(SceneMode::Neural),
              (std::vector<ParamGroup>{ParamGroup::Feature, ParamGroup::Offset}));
}

TEST(Trainer, ZeroIterationsIsIdentity) {
    const auto scene = grid_from_gaussians(three_gaussians(), 0.5);
    const auto r = fit(scene, {}, FitOptions{});
    EXPECT_EQ(r.scene.gaussians.size(), 3u);
    EXPECT_EQ(r.scene.gaussians[1].position, scene.gaussians[1].position);
    EXPECT_TRUE(r.history.empty());
}

TEST(Trainer, FitRejectsMissingTargetsAndBadOptions) {
    const auto scene = grid_from_gaussians(three_gaussians(), 0.5);
    FitOptions o;
    o.iterations = 5;
    try {
        fit(scene, {}, o);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
    }
    o.iterations = -1;
    EXPECT_THROW(fit(scene, views_of(scene, 1), o), Error);
    o.iterations = 5;
    auto views = views_of(scene, 1);
    views[0].image = ImageBuffer(8, 8, 3);
    EXPECT_THROW(fit(scene, views, o), Error);
}

TEST(Trainer, NanTargetIsNumericFailure) {
    const auto scene = grid_from_gaussians(three_gaussians(), 0.5);
    auto views = views_of(scene, 1);
    views[0].image.at(3, 3, 0) = std::numeric_limits<double>::quiet_NaN();
    FitOptions o;
    o.iterations = 2;
    try {
        fit(scene, views, o);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::NumericFailure);
    }
}

TEST(Trainer, ShortFitReducesLossAndKeepsInvariants) {
    const auto truth = grid_from_gaussians(three_gaussians(), 0.5);
    const auto views = views_of(truth, 2);
    auto start = three_gaussians();
    for (auto &g : start) {
        g.color = Rgb{0.5, 0.5, 0.5};
        g.opacity = 0.5;
    }
    FitOptions o;
    o.iterations = 40;
    int calls = 0;
    o.on_iteration = [&](int, double) { ++calls; };
    const auto r = fit(grid_from_gaussians(start, 0.5), views, o);
    EXPECT_EQ(calls, 40);
    ASSERT_EQ(r.history.size(), 40u);
    for (std::size_t i = 1; i < r.history.size(); ++i) {
        EXPECT_LE(r.history[i], r.history[i - 1]);
    }
    EXPECT_LT(r.history.back(), 0.8 * r.raw_history.front());
    for (const auto &g : r.scene.gaussians) {
        EXPECT_NO_THROW(validate(g));
    }
}

TEST(Trainer, FitIsDeterministicAcrossThreads) {
    const auto truth = grid_from_gaussians(three_gaussians(), 0.5);
    const auto views = views_of(truth, 1);
    auto start = three_gaussians();
    start[0].color = Rgb{0.4, 0.4, 0.4};
    FitOptions o;
    o.iterations = 8;
    const auto a = fit(grid_from_gaussians(start, 0.5), views, o);
    o.threads = 4;
    const auto b = fit(grid_from_gaussians(start, 0.5), views, o);
    EXPECT_EQ(a.raw_history, b.raw_history);
}

} // namespace
} // namespace gvkf
