// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gvkf/gaussian.hpp"
#include "gvkf/surface_mapping.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace gvkf {

struct Aabb {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
};

/// Bounding box of the primitives' influence spheres, grown by
/// `pad_fraction` of the largest extent on every side. A unit cube around the
/// origin for an empty scene.
Aabb scene_bounds(std::span<const PreparedGaussian> gaussians, double influence_sigmas = 3.0,
                  double pad_fraction = 0.1);

struct ScalarGrid {
    Vec3 origin = Vec3::Zero();
    double spacing = 1.0;
    std::array<int, 3> dims{2, 2, 2};
    std::vector<double> values;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims[1]) +
                static_cast<std::size_t>(j)) *
                   static_cast<std::size_t>(dims[0]) +
               static_cast<std::size_t>(i);
    }
    double &at(int i, int j, int k) { return values[index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }
    Vec3 point(int i, int j, int k) const {
        return origin + spacing * Vec3(i, j, k);
    }
    /// Magnitude of the empty-space sentinel: 10 * spacing * max(dims).
    double sentinel() const;
};

/// Builds a grid of the given shape filled by f(point).
template <typename Fn>
ScalarGrid sample_function(const Vec3 &origin, double spacing, std::array<int, 3> dims, Fn &&f) {
    ScalarGrid g{origin, spacing, dims, {}};
    g.values.resize(static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
                    static_cast<std::size_t>(dims[2]));
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                g.at(i, j, k) = f(g.point(i, j, k));
            }
        }
    }
    return g;
}

/// How the per-probe ray-local distances at one sample are combined.
enum class ProbeAggregation {
    /// Six probes (+-x, +-y, +-z); keep the largest D. A sample counts as
    /// inside only if every probe has passed a surface before reaching it.
    MaxOverSix,
    /// Six probes; keep the third largest D. A sample counts as inside when at
    /// least four probes agree, so a probe leaking through a gap in a sparse
    /// shell cannot carve the interior on its own.
    VoteOverSix,
    /// Three probes (+x, +y, +z); keep the D of smallest magnitude.
    MinAbsOverThree,
};

struct SdfSamplingOptions {
    int resolution = 64;
    double mu = 8.0;
    SigmaMode sigma_mode = SigmaMode::PerRay;
    ProbeAggregation aggregation = ProbeAggregation::MaxOverSix;
    unsigned threads = 1;
    double min_alpha = 1.0e-4;
    double influence_sigmas = 3.0;
};

inline constexpr int kMinResolution = 4;
inline constexpr int kMaxResolution = 1024;

/// Samples D on a regular grid over `bounds`. The largest bounds extent gets
/// `resolution` samples; the spacing is shared by all axes. Every grid line
/// is probed by axis-aligned rays entering from just outside the bounds; D at
/// a sample comes from Phi at its ray parameter mapped through
/// sdf_from_cdf with that ray's u0. Rays with no kernels report the positive
/// sentinel; values are clamped to +-sentinel.
/// Throws ErrorKind::InvalidBounds for degenerate bounds and
/// ErrorKind::InvalidParameter for a resolution outside
/// [kMinResolution, kMaxResolution].
ScalarGrid sample_sdf_grid(std::span<const PreparedGaussian> gaussians, const Aabb &bounds,
                           const SdfSamplingOptions &opts);

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<Vec3> normals; ///< optional, per vertex
};

/// 256-case marching cubes, linear edge interpolation, vertices shared through
/// edge keys. Samples below `iso` are inside; faces wind counter-clockwise
/// seen from outside. Samples exactly at `iso` are nudged outward by a
/// millionth of the spacing so no vertex lands on a grid corner.
TriangleMesh marching_cubes(const ScalarGrid &grid, double iso = 0.0);

/// Area-weighted vertex normals.
void compute_normals(TriangleMesh &mesh);

} // namespace gvkf
