// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gvkf/gaussian.hpp"

#include <Eigen/Dense>

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace gvkf {

inline constexpr std::size_t kFeatureDim = 32;
inline constexpr std::size_t kMaxOffsets = 10;
inline constexpr int kMaxDepth = 3;
inline constexpr double kSubdivideThreshold = 2.0e-4;
inline constexpr int kEvaluationInterval = 500;
inline constexpr std::uint64_t kDefaultSeed = 42;

/// Integer cell coordinates at a given octree depth. At depth d the edge
/// length is base_voxel_size / 2^d.
struct VoxelKey {
    std::array<std::int64_t, 3> cell{};
    int depth = 0;

    friend auto operator<=>(const VoxelKey &, const VoxelKey &) = default;
};

struct FeatureVoxel {
    Vec3 center = Vec3::Zero();
    int depth = 0;
    std::vector<double> feature;     ///< kFeatureDim entries (neural mode)
    std::vector<Vec3> offsets;       ///< in units of the voxel edge, each in [-1/2, 1/2]
    std::vector<std::size_t> gaussians; ///< indices into explicit list (direct mode)

    double accumulated_gradient = 0.0; ///< running mean of registered norms
    double gradient_sum = 0.0;
    std::size_t gradient_count = 0;
    std::size_t usage_count = 0;
};

/// Small fully-connected network: affine layers with ReLU between them.
struct Mlp {
    struct Layer {
        Eigen::MatrixXd weight; ///< out x in
        Eigen::VectorXd bias;
    };
    std::vector<Layer> layers;

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    Eigen::VectorXd forward(const Eigen::VectorXd &x) const;

    /// Widths {in, h1, ..., out}; Xavier-uniform weights from a 64-bit
    /// Mersenne twister, zero biases.
    static Mlp seeded(std::span<const std::size_t> widths, std::uint64_t seed);
};

/// The four shared decoders. Alpha and color also take the normalised
/// camera-to-voxel direction (3 extra inputs).
struct DecoderSet {
    Mlp alpha;    ///< 35 -> 32 -> 32 -> 10, tanh
    Mlp rotation; ///< 32 -> 32 -> 32 -> 40, normalised per quaternion
    Mlp scale;    ///< 32 -> 32 -> 32 -> 30, sigmoid * voxel edge
    Mlp color;    ///< 35 -> 32 -> 32 -> 30, sigmoid

    static DecoderSet seeded(std::uint64_t seed);
};

enum class SceneMode { Direct, Neural };

struct SparseVoxelGrid {
    SceneMode mode = SceneMode::Direct;
    double base_voxel_size = 0.01;
    std::map<VoxelKey, FeatureVoxel> voxels;
    DecoderSet decoders;
    /// Explicit primitives (direct mode), in file order.
    std::vector<GaussianPrimitive> gaussians;

    double edge_length(int depth) const;
    VoxelKey key_for(const Vec3 &p, int depth) const;
    Vec3 center_of(const VoxelKey &key) const;
};

/// Neural-mode grid: one voxel per occupied cell, up to kMaxOffsets offsets
/// taken from the points in input order, features uniform in [-0.1, 0.1].
/// Throws ErrorKind::EmptyInput for no points.
SparseVoxelGrid init_from_points(std::span<const Vec3> points, double voxel_size,
                                 std::uint64_t seed = kDefaultSeed);

/// Direct-mode grid: primitives are kept verbatim and attached to the depth-0
/// voxel containing their position.
SparseVoxelGrid grid_from_gaussians(std::vector<GaussianPrimitive> gaussians,
                                    double voxel_size);

struct GeneratedGaussians {
    std::vector<GaussianPrimitive> gaussians;
    std::vector<VoxelKey> owners;
};

/// Direct mode returns the explicit list unchanged. Neural mode decodes every
/// voxel (map order) and omits primitives whose decoded opacity is <= 0;
/// throws ErrorKind::MissingCamera without a camera position.
GeneratedGaussians generate_gaussians(const SparseVoxelGrid &grid,
                                      std::optional<Vec3> camera_position = std::nullopt);

/// Adds gradient norms to each voxel's running mean. Every voxel named in the
/// batch counts as used once for this call. Throws ErrorKind::InvalidId
/// (before touching the grid) on an unknown key or a negative norm.
void register_gradients(SparseVoxelGrid &grid,
                        std::span<const std::pair<VoxelKey, double>> norms);

struct EvaluationReport {
    std::size_t subdivided = 0;
    std::size_t pruned = 0;
};

/// Removes voxels with no usage in the window, splits voxels whose mean
/// gradient exceeds kSubdivideThreshold (below kMaxDepth) into 8 children,
/// then resets all gradient and usage counters.
EvaluationReport evaluate_voxels(SparseVoxelGrid &grid);

} // namespace gvkf
