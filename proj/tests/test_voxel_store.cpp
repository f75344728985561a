// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/error.hpp"
#include "gvkf/voxel_store.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <utility>
#include <vector>

namespace gvkf {
namespace {

using Norms = std::vector<std::pair<VoxelKey, double>>;

SparseVoxelGrid single_voxel_grid() {
    GaussianPrimitive g;
    g.position = Vec3(0.3, 0.3, 0.3);
    g.scale = Vec3::Constant(0.05);
    return grid_from_gaussians({g}, 1.0);
}

TEST(VoxelStore, KeysAndCentersAtDepth) {
    SparseVoxelGrid grid;
    grid.base_voxel_size = 0.5;
    EXPECT_EQ(grid.edge_length(2), 0.125);
    const VoxelKey k = grid.key_for(Vec3(-0.01, 0.26, 1.0), 1);
    EXPECT_EQ(k.cell, (std::array<std::int64_t, 3>{-1, 1, 4}));
    EXPECT_EQ(grid.center_of(k), Vec3(-0.125, 0.375, 1.125));
}

TEST(VoxelStore, InitFromPointsCapsOffsetsAndSeedsFeatures) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 15; ++i) {
        pts.emplace_back(0.01 * i, 0.02, 0.03);
    }
    pts.emplace_back(5.0, 5.0, 5.0);
    const auto grid = init_from_points(pts, 1.0, 9);
    ASSERT_EQ(grid.voxels.size(), 2u);
    const auto &first = grid.voxels.at(grid.key_for(pts[0], 0));
    EXPECT_EQ(first.offsets.size(), kMaxOffsets);
    EXPECT_NEAR(first.offsets[1].x(), 0.01 - 0.5, 1e-15);
    EXPECT_EQ(first.feature.size(), kFeatureDim);
    for (double f : first.feature) {
        EXPECT_GE(f, -0.1);
        EXPECT_LE(f, 0.1);
    }
    const auto again = init_from_points(pts, 1.0, 9);
    EXPECT_EQ(again.voxels.begin()->second.feature, grid.voxels.begin()->second.feature);
}

TEST(VoxelStore, InitRejectsEmptyAndBadSize) {
    EXPECT_THROW(init_from_points({}, 1.0), Error);
    const std::vector<Vec3> p{Vec3::Zero()};
    EXPECT_THROW(init_from_points(p, 0.0), Error);
}

TEST(VoxelStore, DecoderShapes) {
    const auto d = DecoderSet::seeded(1);
    EXPECT_EQ(d.alpha.input_dim(), kFeatureDim + 3);
    EXPECT_EQ(d.alpha.output_dim(), kMaxOffsets);
    EXPECT_EQ(d.rotation.output_dim(), 4 * kMaxOffsets);
    EXPECT_EQ(d.scale.output_dim(), 3 * kMaxOffsets);
    EXPECT_EQ(d.color.output_dim(), 3 * kMaxOffsets);
    EXPECT_THROW(d.scale.forward(Eigen::VectorXd::Zero(3)), Error);
}

TEST(VoxelStore, NeuralDecodingNeedsCamera) {
    const std::vector<Vec3> p{Vec3(0.1, 0.1, 0.1), Vec3(0.2, 0.3, 0.1)};
    const auto grid = init_from_points(p, 0.5, 3);
    EXPECT_THROW(generate_gaussians(grid), Error);
    const auto out = generate_gaussians(grid, Vec3(0.0, 0.0, 3.0));
    EXPECT_EQ(out.gaussians.size(), out.owners.size());
    EXPECT_LE(out.gaussians.size(), 2u);
    for (const auto &g : out.gaussians) {
        EXPECT_NO_THROW(validate(g));
        EXPECT_LE(g.scale.maxCoeff(), 0.5);
    }
}

TEST(VoxelStore, DirectModeReturnsPrimitivesVerbatim) {
    const auto grid = single_voxel_grid();
    const auto out = generate_gaussians(grid);
    ASSERT_EQ(out.gaussians.size(), 1u);
    EXPECT_EQ(out.gaussians[0].position, grid.gaussians[0].position);
    EXPECT_EQ(out.owners[0], grid.voxels.begin()->first);
}

TEST(VoxelStore, RegisterRejectsUnknownKeyWithoutSideEffects) {
    auto grid = single_voxel_grid();
    const VoxelKey known = grid.voxels.begin()->first;
    VoxelKey unknown;
    unknown.cell = {9, 9, 9};
    const Norms batch{{known, 1.0}, {unknown, 1.0}};
    EXPECT_THROW(register_gradients(grid, batch), Error);
    EXPECT_EQ(grid.voxels.at(known).gradient_count, 0u);
    const Norms negative{{known, -1.0}};
    EXPECT_THROW(register_gradients(grid, negative), Error);
}

TEST(VoxelStore, RegisterKeepsRunningMeanAndCountsUsageOncePerCall) {
    auto grid = single_voxel_grid();
    const VoxelKey key = grid.voxels.begin()->first;
    const Norms batch{{key, 1e-4}, {key, 3e-4}};
    register_gradients(grid, batch);
    const auto &v = grid.voxels.at(key);
    EXPECT_NEAR(v.accumulated_gradient, 2e-4, 1e-18);
    EXPECT_EQ(v.usage_count, 1u);
    EXPECT_EQ(v.gradient_count, 2u);
}

TEST(VoxelStore, SubdivisionMakesEightChildrenCoveringParent) {
    auto grid = single_voxel_grid();
    const VoxelKey key = grid.voxels.begin()->first;
    const Vec3 parent_center = grid.center_of(key);
    const Norms batch{{key, 3e-4}};
    register_gradients(grid, batch);
    const auto rep = evaluate_voxels(grid);
    EXPECT_EQ(rep.subdivided, 1u);
    ASSERT_EQ(grid.voxels.size(), 8u);
    Vec3 lo = Vec3::Constant(1e9);
    Vec3 hi = Vec3::Constant(-1e9);
    double volume = 0.0;
    for (const auto &[k, v] : grid.voxels) {
        EXPECT_EQ(k.depth, 1);
        const double e = grid.edge_length(1);
        lo = lo.cwiseMin(v.center - Vec3::Constant(0.5 * e));
        hi = hi.cwiseMax(v.center + Vec3::Constant(0.5 * e));
        volume += e * e * e;
        EXPECT_EQ(v.usage_count, 0u);
    }
    EXPECT_EQ(lo, parent_center - Vec3::Constant(0.5));
    EXPECT_EQ(hi, parent_center + Vec3::Constant(0.5));
    EXPECT_EQ(volume, 1.0);
    // The primitive at (0.3, 0.3, 0.3) belongs to the low octant.
    VoxelKey low;
    low.depth = 1;
    EXPECT_EQ(grid.voxels.at(low).gaussians.size(), 1u);
}

TEST(VoxelStore, ThresholdIsStrict) {
    auto grid = single_voxel_grid();
    const Norms batch{{grid.voxels.begin()->first, kSubdivideThreshold}};
    register_gradients(grid, batch);
    EXPECT_EQ(evaluate_voxels(grid).subdivided, 0u);
    EXPECT_EQ(grid.voxels.size(), 1u);
}

TEST(VoxelStore, DepthNeverExceedsLimit) {
    auto grid = single_voxel_grid();
    for (int round = 0; round < 6; ++round) {
        Norms batch;
        for (const auto &[k, v] : grid.voxels) {
            batch.emplace_back(k, 1.0);
        }
        register_gradients(grid, batch);
        evaluate_voxels(grid);
    }
    EXPECT_EQ(grid.voxels.size(), 512u);
    for (const auto &[k, v] : grid.voxels) {
        EXPECT_LE(k.depth, kMaxDepth);
    }
}

TEST(VoxelStore, PruningRemovesUnusedVoxelsAndTheirPrimitives) {
    std::vector<GaussianPrimitive> gs(10);
    for (int i = 0; i < 10; ++i) {
        gs[i].position = Vec3(i + 0.5, 0.5, 0.5);
        gs[i].scale = Vec3::Constant(0.1);
    }
    auto grid = grid_from_gaussians(gs, 1.0);
    ASSERT_EQ(grid.voxels.size(), 10u);
    Norms batch;
    for (int i : {0, 2, 3, 7}) {
        batch.emplace_back(grid.key_for(gs[i].position, 0), 0.0);
    }
    register_gradients(grid, batch);
    const auto rep = evaluate_voxels(grid);
    EXPECT_EQ(rep.pruned, 6u);
    EXPECT_EQ(rep.subdivided, 0u);
    ASSERT_EQ(grid.voxels.size(), 4u);
    ASSERT_EQ(grid.gaussians.size(), 4u);
    std::vector<double> xs;
    for (const auto &g : grid.gaussians) {
        xs.push_back(g.position.x());
    }
    EXPECT_EQ(xs, (std::vector<double>{0.5, 2.5, 3.5, 7.5}));
    for (const auto &[k, v] : grid.voxels) {
        ASSERT_EQ(v.gaussians.size(), 1u);
        EXPECT_EQ(grid.key_for(grid.gaussians[v.gaussians[0]].position, 0), k);
    }
}

} // namespace
} // namespace gvkf
