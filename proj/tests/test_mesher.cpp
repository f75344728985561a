// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/error.hpp"
#include "gvkf/mesher.hpp"
#include "gvkf/renderer.hpp"
#include "gvkf/scenes.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

namespace gvkf {
namespace {

ScalarGrid sphere_grid(int n, double radius) {
    const double h = 2.0 / (n - 1);
    return sample_function(Vec3::Constant(-1.0), h, {n, n, n},
                           [radius](const Vec3 &p) { return p.norm() - radius; });
}

TEST(Mesher, AnalyticSphereIsClosedManifoldAndOutward) {
    const auto grid = sphere_grid(33, 0.7);
    auto mesh = marching_cubes(grid);
    const auto topo = test::topology(mesh);
    EXPECT_EQ(topo.bad_edges, 0u);
    EXPECT_EQ(topo.components, 1u);
    const double v = 4.0 / 3.0 * std::numbers::pi * 0.7 * 0.7 * 0.7;
    EXPECT_NEAR(topo.signed_volume, v, 0.02 * v);
    for (const auto &p : mesh.vertices) {
        EXPECT_NEAR(p.norm(), 0.7, 0.01);
    }
    compute_normals(mesh);
    ASSERT_EQ(mesh.normals.size(), mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        EXPECT_NEAR(mesh.normals[i].norm(), 1.0, 1e-12);
        EXPECT_GT(mesh.normals[i].dot(mesh.vertices[i].normalized()), 0.95);
    }
}

TEST(Mesher, SingleInsideCornerMakesOneTriangle) {
    auto grid = sample_function(Vec3::Zero(), 1.0, {2, 2, 2}, [](const Vec3 &) { return 1.0; });
    grid.at(0, 0, 0) = -1.0;
    const auto mesh = marching_cubes(grid);
    ASSERT_EQ(mesh.faces.size(), 1u);
    ASSERT_EQ(mesh.vertices.size(), 3u);
    for (const auto &p : mesh.vertices) {
        EXPECT_NEAR(p.sum(), 0.5, 1e-12);
    }
    // Outward means pointing away from the inside corner.
    const auto &f = mesh.faces[0];
    const Vec3 n = (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    EXPECT_GT(n.dot(Vec3::Ones()), 0.0);
}

TEST(Mesher, UniformGridHasNoSurface) {
    const auto grid = sample_function(Vec3::Zero(), 1.0, {4, 4, 4}, [](const Vec3 &) { return 2.0; });
    EXPECT_TRUE(marching_cubes(grid).faces.empty());
}

TEST(Mesher, ValuesAtIsoDoNotCreateCornerVertices) {
    auto grid = sample_function(Vec3::Zero(), 1.0, {3, 3, 3},
                                [](const Vec3 &p) { return p.x() - 1.0; });
    const auto mesh = marching_cubes(grid);
    EXPECT_FALSE(mesh.faces.empty());
    EXPECT_EQ(test::topology(mesh).bad_edges, 8u); // open plane boundary
    for (const auto &p : mesh.vertices) {
        // Corner samples at iso count as outside, so vertices sit just before x = 1.
        EXPECT_LT(p.x(), 1.0);
        EXPECT_GT(p.x(), 1.0 - 1e-5);
    }
}

TEST(Mesher, RejectsMalformedGrids) {
    ScalarGrid g;
    g.dims = {2, 2, 2};
    g.values.assign(7, 0.0);
    EXPECT_THROW(marching_cubes(g), Error);
    g.values.assign(8, std::numeric_limits<double>::quiet_NaN());
    EXPECT_THROW(marching_cubes(g), Error);
}

TEST(Mesher, SamplingValidatesOptions) {
    const auto prepared = prepare_all(single_scene());
    const Aabb box = scene_bounds(prepared);
    SdfSamplingOptions o;
    o.resolution = kMinResolution - 1;
    EXPECT_THROW(sample_sdf_grid(prepared, box, o), Error);
    o.resolution = kMaxResolution + 1;
    EXPECT_THROW(sample_sdf_grid(prepared, box, o), Error);
    o.resolution = 16;
    o.mu = 0.0;
    EXPECT_THROW(sample_sdf_grid(prepared, box, o), Error);
    o.mu = 8.0;
    try {
        sample_sdf_grid(prepared, Aabb{Vec3::Zero(), Vec3(1.0, 0.0, 1.0)}, o);
        FAIL() << "expected InvalidBounds";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidBounds);
    }
}

TEST(Mesher, EmptySceneSamplesPositiveSentinel) {
    SdfSamplingOptions o;
    o.resolution = 8;
    const auto grid = sample_sdf_grid({}, Aabb{Vec3::Zero(), Vec3::Ones()}, o);
    for (double v : grid.values) {
        EXPECT_EQ(v, grid.sentinel());
    }
    EXPECT_TRUE(marching_cubes(grid).faces.empty());
}

TEST(Mesher, BoundsCoverInfluenceWithPadding) {
    const auto prepared = prepare_all(single_scene());
    const Aabb b = scene_bounds(prepared, 3.0, 0.1);
    const double r = 3.0 * 0.2;
    EXPECT_NEAR(b.hi.x(), r + 0.1 * 2.0 * r, 1e-12);
    EXPECT_NEAR(b.lo.z(), -r - 0.1 * 2.0 * r, 1e-12);
    const Aabb empty = scene_bounds({});
    EXPECT_EQ(empty.hi - empty.lo, Vec3::Ones());
}

TEST(Mesher, SingleOpaqueGaussianGivesClosedBlob) {
    const auto prepared = prepare_all(single_scene());
    SdfSamplingOptions o;
    o.resolution = 32;
    const auto mesh = marching_cubes(sample_sdf_grid(prepared, scene_bounds(prepared), o));
    const auto topo = test::topology(mesh);
    EXPECT_FALSE(mesh.faces.empty());
    EXPECT_EQ(topo.bad_edges, 0u);
    EXPECT_EQ(topo.components, 1u);
    EXPECT_GT(topo.signed_volume, 0.0);
    for (const auto &p : mesh.vertices) {
        EXPECT_LT(p.norm(), 0.6);
    }
}

TEST(Mesher, DenseSphereShellReconstructsUnitSphere) {
    SphereSceneOptions so;
    so.count = 10000;
    const auto prepared = prepare_all(sphere_scene(so));
    SdfSamplingOptions o;
    o.resolution = 64;
    o.threads = 4;
    const auto mesh = marching_cubes(sample_sdf_grid(prepared, scene_bounds(prepared), o));
    const auto topo = test::topology(mesh);
    EXPECT_EQ(topo.bad_edges, 0u);
    EXPECT_EQ(topo.components, 1u);
    double mean = 0.0;
    double worst = 0.0;
    for (const auto &p : mesh.vertices) {
        const double d = std::abs(p.norm() - 1.0);
        mean += d;
        worst = std::max(worst, d);
    }
    mean /= static_cast<double>(mesh.vertices.size());
    EXPECT_LE(mean, 0.05);
    EXPECT_LE(worst, 0.15);
}

TEST(Mesher, ThreadCountDoesNotChangeSamples) {
    SphereSceneOptions so;
    so.count = 500;
    so.scale = 0.05;
    const auto prepared = prepare_all(sphere_scene(so));
    SdfSamplingOptions o;
    o.resolution = 24;
    const auto a = sample_sdf_grid(prepared, scene_bounds(prepared), o);
    o.threads = 4;
    const auto b = sample_sdf_grid(prepared, scene_bounds(prepared), o);
    EXPECT_EQ(a.values, b.values);
}

TEST(Mesher, AggregationRulesAgreeOnConvexBlob) {
    const auto prepared = prepare_all(single_scene());
    const Aabb box = scene_bounds(prepared);
    for (auto agg : {ProbeAggregation::MaxOverSix, ProbeAggregation::VoteOverSix,
                     ProbeAggregation::MinAbsOverThree}) {
        SdfSamplingOptions o;
        o.resolution = 16;
        o.aggregation = agg;
        const auto grid = sample_sdf_grid(prepared, box, o);
        // Centre of the blob is inside, corners outside.
        EXPECT_LT(grid.at(8, 8, 8), 0.0);
        EXPECT_GT(grid.at(0, 0, 0), 0.0);
    }
}

} // namespace
} // namespace gvkf
