// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/voxel_store.hpp"

#include "gvkf/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace gvkf {

namespace {

double uniform01(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64 &rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr std::array<std::size_t, 4> kAlphaWidths{kFeatureDim + 3, 32, 32, kMaxOffsets};
constexpr std::array<std::size_t, 4> kRotationWidths{kFeatureDim, 32, 32, 4 * kMaxOffsets};
constexpr std::array<std::size_t, 4> kScaleWidths{kFeatureDim, 32, 32, 3 * kMaxOffsets};
constexpr std::array<std::size_t, 4> kColorWidths{kFeatureDim + 3, 32, 32, 3 * kMaxOffsets};

} // namespace

std::size_t Mlp::input_dim() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
}

std::size_t Mlp::output_dim() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows());
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd &x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim()) {
        throw Error(ErrorKind::ShapeMismatch, "decoder input has the wrong dimension");
    }
    Eigen::VectorXd h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].weight * h + layers[i].bias;
        if (i + 1 < layers.size()) {
            h = h.cwiseMax(0.0);
        }
    }
    return h;
}

Mlp Mlp::seeded(std::span<const std::size_t> widths, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Mlp mlp;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const auto in = static_cast<Eigen::Index>(widths[i]);
        const auto out = static_cast<Eigen::Index>(widths[i + 1]);
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
        for (Eigen::Index r = 0; r < out; ++r) {
            for (Eigen::Index c = 0; c < in; ++c) {
                layer.weight(r, c) = uniform(rng, -limit, limit);
            }
        }
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

DecoderSet DecoderSet::seeded(std::uint64_t seed) {
    DecoderSet d;
    d.alpha = Mlp::seeded(kAlphaWidths, seed + 1);
    d.rotation = Mlp::seeded(kRotationWidths, seed + 2);
    d.scale = Mlp::seeded(kScaleWidths, seed + 3);
    d.color = Mlp::seeded(kColorWidths, seed + 4);
    return d;
}

double SparseVoxelGrid::edge_length(int depth) const {
    return std::ldexp(base_voxel_size, -depth);
}

VoxelKey SparseVoxelGrid::key_for(const Vec3 &p, int depth) const {
    const double edge = edge_length(depth);
    VoxelKey key;
    key.depth = depth;
    for (int i = 0; i < 3; ++i) {
        key.cell[i] = static_cast<std::int64_t>(std::floor(p[i] / edge));
    }
    return key;
}

Vec3 SparseVoxelGrid::center_of(const VoxelKey &key) const {
    const double edge = edge_length(key.depth);
    return Vec3((static_cast<double>(key.cell[0]) + 0.5) * edge,
                (static_cast<double>(key.cell[1]) + 0.5) * edge,
                (static_cast<double>(key.cell[2]) + 0.5) * edge);
}

SparseVoxelGrid init_from_points(std::span<const Vec3> points, double voxel_size,
                                 std::uint64_t seed) {
    if (points.empty()) {
        throw Error(ErrorKind::EmptyInput, "cannot initialise a voxel grid from no points");
    }
    if (!(voxel_size > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "voxel size must be positive");
    }
    SparseVoxelGrid grid;
    grid.mode = SceneMode::Neural;
    grid.base_voxel_size = voxel_size;
    grid.decoders = DecoderSet::seeded(seed);

    for (const auto &p : points) {
        const VoxelKey key = grid.key_for(p, 0);
        auto [it, inserted] = grid.voxels.try_emplace(key);
        FeatureVoxel &vox = it->second;
        if (inserted) {
            vox.center = grid.center_of(key);
            vox.depth = 0;
        }
        if (vox.offsets.size() < kMaxOffsets) {
            Vec3 off = (p - vox.center) / voxel_size;
            vox.offsets.push_back(off.cwiseMax(-0.5).cwiseMin(0.5));
        }
    }

    std::mt19937_64 rng(seed);
    for (auto &[key, vox] : grid.voxels) {
        vox.feature.resize(kFeatureDim);
        for (double &f : vox.feature) {
            f = uniform(rng, -0.1, 0.1);
        }
    }
    return grid;
}

SparseVoxelGrid grid_from_gaussians(std::vector<GaussianPrimitive> gaussians, double voxel_size) {
    if (!(voxel_size > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "voxel size must be positive");
    }
    SparseVoxelGrid grid;
    grid.mode = SceneMode::Direct;
    grid.base_voxel_size = voxel_size;
    grid.gaussians = std::move(gaussians);
    for (std::size_t i = 0; i < grid.gaussians.size(); ++i) {
        validate(grid.gaussians[i]);
        const VoxelKey key = grid.key_for(grid.gaussians[i].position, 0);
        auto [it, inserted] = grid.voxels.try_emplace(key);
        if (inserted) {
            it->second.center = grid.center_of(key);
        }
        it->second.gaussians.push_back(i);
    }
    return grid;
}

GeneratedGaussians generate_gaussians(const SparseVoxelGrid &grid,
                                      std::optional<Vec3> camera_position) {
    GeneratedGaussians out;
    if (grid.mode == SceneMode::Direct) {
        out.gaussians = grid.gaussians;
        out.owners.resize(grid.gaussians.size());
        for (const auto &[key, vox] : grid.voxels) {
            for (std::size_t idx : vox.gaussians) {
                out.owners[idx] = key;
            }
        }
        return out;
    }
    if (!camera_position) {
        throw Error(ErrorKind::MissingCamera, "neural-mode decoding needs a camera");
    }

    for (const auto &[key, vox] : grid.voxels) {
        if (vox.offsets.empty()) {
            continue;
        }
        const double edge = grid.edge_length(vox.depth);
        Eigen::VectorXd feat = Eigen::Map<const Eigen::VectorXd>(
            vox.feature.data(), static_cast<Eigen::Index>(vox.feature.size()));
        Vec3 dir = vox.center - *camera_position;
        const double n = dir.norm();
        dir = n > 0.0 ? Vec3(dir / n) : Vec3::Zero();
        Eigen::VectorXd conditioned(feat.size() + 3);
        conditioned << feat, dir;

        const Eigen::VectorXd a = grid.decoders.alpha.forward(conditioned);
        const Eigen::VectorXd r = grid.decoders.rotation.forward(feat);
        const Eigen::VectorXd s = grid.decoders.scale.forward(feat);
        const Eigen::VectorXd c = grid.decoders.color.forward(conditioned);

        for (std::size_t j = 0; j < vox.offsets.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double opacity = std::tanh(a(jj));
            if (!(opacity > 0.0)) {
                continue;
            }
            GaussianPrimitive g;
            g.position = vox.center + vox.offsets[j] * edge;
            g.rotation = Quat(1.0 + r(4 * jj), r(4 * jj + 1), r(4 * jj + 2), r(4 * jj + 3));
            if (g.rotation.norm() < 1e-12) {
                g.rotation = Quat::Identity();
            }
            g.rotation.normalize();
            g.scale = Vec3(sigmoid(s(3 * jj)), sigmoid(s(3 * jj + 1)), sigmoid(s(3 * jj + 2))) * edge;
            g.scale = g.scale.cwiseMax(1e-6 * edge);
            g.opacity = std::min(opacity, 1.0);
            g.color = Rgb{sigmoid(c(3 * jj)), sigmoid(c(3 * jj + 1)), sigmoid(c(3 * jj + 2))};
            out.gaussians.push_back(g);
            out.owners.push_back(key);
        }
    }
    return out;
}

void register_gradients(SparseVoxelGrid &grid,
                        std::span<const std::pair<VoxelKey, double>> norms) {
    for (const auto &[key, norm] : norms) {
        if (!grid.voxels.contains(key)) {
            throw Error(ErrorKind::InvalidId, "gradient registered for an unknown voxel");
        }
        if (!(norm >= 0.0)) {
            throw Error(ErrorKind::InvalidId, "gradient norm must be non-negative");
        }
    }
    std::set<VoxelKey> touched;
    for (const auto &[key, norm] : norms) {
        FeatureVoxel &vox = grid.voxels.at(key);
        vox.gradient_sum += norm;
        vox.gradient_count += 1;
        vox.accumulated_gradient = vox.gradient_sum / static_cast<double>(vox.gradient_count);
        touched.insert(key);
    }
    for (const auto &key : touched) {
        grid.voxels.at(key).usage_count += 1;
    }
}

namespace {

void reset_counters(FeatureVoxel &vox) {
    vox.accumulated_gradient = 0.0;
    vox.gradient_sum = 0.0;
    vox.gradient_count = 0;
    vox.usage_count = 0;
}

// Drops explicit primitives no voxel refers to and rewrites indices.
void compact_gaussians(SparseVoxelGrid &grid) {
    std::vector<std::size_t> remap(grid.gaussians.size(), SIZE_MAX);
    std::vector<bool> keep(grid.gaussians.size(), false);
    for (const auto &[key, vox] : grid.voxels) {
        for (std::size_t idx : vox.gaussians) {
            keep[idx] = true;
        }
    }
    std::vector<GaussianPrimitive> kept;
    for (std::size_t i = 0; i < grid.gaussians.size(); ++i) {
        if (keep[i]) {
            remap[i] = kept.size();
            kept.push_back(grid.gaussians[i]);
        }
    }
    grid.gaussians = std::move(kept);
    for (auto &[key, vox] : grid.voxels) {
        for (std::size_t &idx : vox.gaussians) {
            idx = remap[idx];
        }
    }
}

} // namespace

EvaluationReport evaluate_voxels(SparseVoxelGrid &grid) {
    EvaluationReport report;

    for (auto it = grid.voxels.begin(); it != grid.voxels.end();) {
        if (it->second.usage_count == 0) {
            it = grid.voxels.erase(it);
            ++report.pruned;
        } else {
            ++it;
        }
    }

    std::vector<VoxelKey> to_split;
    for (const auto &[key, vox] : grid.voxels) {
        if (vox.accumulated_gradient > kSubdivideThreshold && key.depth < kMaxDepth) {
            to_split.push_back(key);
        }
    }
    for (const VoxelKey &key : to_split) {
        FeatureVoxel parent = std::move(grid.voxels.at(key));
        grid.voxels.erase(key);
        std::array<VoxelKey, 8> child_keys;
        for (int c = 0; c < 8; ++c) {
            VoxelKey ck;
            ck.depth = key.depth + 1;
            for (int axis = 0; axis < 3; ++axis) {
                ck.cell[axis] = 2 * key.cell[axis] + ((c >> axis) & 1);
            }
            child_keys[c] = ck;
            auto [it, inserted] = grid.voxels.try_emplace(ck);
            if (inserted) {
                it->second.center = grid.center_of(ck);
                it->second.depth = ck.depth;
                it->second.feature = parent.feature;
                it->second.offsets = parent.offsets;
            }
        }
        for (std::size_t idx : parent.gaussians) {
            const Vec3 &p = grid.gaussians[idx].position;
            int c = 0;
            for (int axis = 0; axis < 3; ++axis) {
                c |= (p[axis] >= parent.center[axis] ? 1 : 0) << axis;
            }
            grid.voxels.at(child_keys[c]).gaussians.push_back(idx);
        }
        ++report.subdivided;
    }

    for (auto &[key, vox] : grid.voxels) {
        std::sort(vox.gaussians.begin(), vox.gaussians.end());
        reset_counters(vox);
    }
    if (grid.mode == SceneMode::Direct && report.pruned > 0) {
        compact_gaussians(grid);
    }
    return report;
}

} // namespace gvkf
