// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/mesher.hpp"

#include "gvkf/error.hpp"
#include "gvkf/opacity_field.hpp"
#include "gvkf/parallel.hpp"
#include "mc_tables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <unordered_map>

namespace gvkf {

Aabb scene_bounds(std::span<const PreparedGaussian> gaussians, double influence_sigmas,
                  double pad_fraction) {
    if (gaussians.empty()) {
        return Aabb{Vec3::Constant(-0.5), Vec3::Constant(0.5)};
    }
    Aabb box{Vec3::Constant(std::numeric_limits<double>::infinity()),
             Vec3::Constant(-std::numeric_limits<double>::infinity())};
    for (const auto &g : gaussians) {
        const Vec3 r = Vec3::Constant(influence_sigmas * g.max_scale);
        box.lo = box.lo.cwiseMin(g.prim.position - r);
        box.hi = box.hi.cwiseMax(g.prim.position + r);
    }
    const double pad = pad_fraction * (box.hi - box.lo).maxCoeff();
    box.lo -= Vec3::Constant(pad);
    box.hi += Vec3::Constant(pad);
    return box;
}

double ScalarGrid::sentinel() const {
    return 10.0 * spacing * static_cast<double>(*std::max_element(dims.begin(), dims.end()));
}

namespace {

struct Probe {
    int axis;
    int sign; // +1 travels towards +axis
};

// Candidate primitives per grid line for one probe axis.
struct LineBins {
    int axis = 0;
    int u_axis = 1;
    int v_axis = 2;
    int nu = 0;
    int nv = 0;
    std::vector<std::vector<std::size_t>> bins;
};

LineBins bin_lines(std::span<const PreparedGaussian> gaussians, const ScalarGrid &grid, int axis,
                   double influence_sigmas) {
    LineBins b;
    b.axis = axis;
    b.u_axis = (axis + 1) % 3;
    b.v_axis = (axis + 2) % 3;
    b.nu = grid.dims[b.u_axis];
    b.nv = grid.dims[b.v_axis];
    b.bins.resize(static_cast<std::size_t>(b.nu) * static_cast<std::size_t>(b.nv));
    for (std::size_t gi = 0; gi < gaussians.size(); ++gi) {
        const auto &g = gaussians[gi];
        const double r = influence_sigmas * g.max_scale;
        const double pu = (g.prim.position[b.u_axis] - grid.origin[b.u_axis]) / grid.spacing;
        const double pv = (g.prim.position[b.v_axis] - grid.origin[b.v_axis]) / grid.spacing;
        const double rr = r / grid.spacing;
        const int u0 = std::max(0, static_cast<int>(std::ceil(pu - rr)));
        const int u1 = std::min(b.nu - 1, static_cast<int>(std::floor(pu + rr)));
        const int v0 = std::max(0, static_cast<int>(std::ceil(pv - rr)));
        const int v1 = std::min(b.nv - 1, static_cast<int>(std::floor(pv + rr)));
        for (int v = v0; v <= v1; ++v) {
            for (int u = u0; u <= u1; ++u) {
                b.bins[static_cast<std::size_t>(v) * static_cast<std::size_t>(b.nu) +
                       static_cast<std::size_t>(u)]
                    .push_back(gi);
            }
        }
    }
    return b;
}

struct LineRay {
    Ray ray;
    double entry = 0.0; // coordinate of the ray origin along the probe axis
};

LineRay line_ray(const ScalarGrid &grid, const LineBins &b, int u, int v, int sign) {
    Vec3 origin = grid.origin;
    origin[b.u_axis] += grid.spacing * u;
    origin[b.v_axis] += grid.spacing * v;
    const double lo = grid.origin[b.axis];
    const double hi = lo + grid.spacing * (grid.dims[b.axis] - 1);
    const double entry = sign > 0 ? lo - grid.spacing : hi + grid.spacing;
    origin[b.axis] = entry;
    Vec3 dir = Vec3::Zero();
    dir[b.axis] = static_cast<double>(sign);
    const double length = (hi - lo) + 2.0 * grid.spacing;
    return LineRay{make_ray(origin, dir, length), entry};
}

RayField line_field(std::span<const PreparedGaussian> gaussians, const LineBins &b,
                    const LineRay &lr, int u, int v, const SdfSamplingOptions &opts) {
    const auto &cand = b.bins[static_cast<std::size_t>(v) * static_cast<std::size_t>(b.nu) +
                              static_cast<std::size_t>(u)];
    if (cand.empty()) {
        return RayField{};
    }
    CullOptions cull;
    cull.near = 0.0;
    cull.min_alpha = opts.min_alpha;
    cull.influence_sigmas = opts.influence_sigmas;
    return build_ray_field(gaussians, lr.ray, cull, {}, cand);
}

std::vector<Probe> probes_for(ProbeAggregation agg) {
    if (agg == ProbeAggregation::MinAbsOverThree) {
        return {{0, 1}, {1, 1}, {2, 1}};
    }
    return {{0, 1}, {0, -1}, {1, 1}, {1, -1}, {2, 1}, {2, -1}};
}

double median_sigma_sq(std::span<const PreparedGaussian> gaussians, const ScalarGrid &grid,
                       const std::vector<LineBins> &bins, const std::vector<Probe> &probes,
                       const SdfSamplingOptions &opts) {
    std::vector<double> all;
    for (const Probe &p : probes) {
        const LineBins &b = bins[static_cast<std::size_t>(p.axis)];
        const std::size_t lines = static_cast<std::size_t>(b.nu) * static_cast<std::size_t>(b.nv);
        std::vector<double> per_line(lines, std::numeric_limits<double>::quiet_NaN());
        parallel_for(lines, opts.threads, [&](std::size_t l0, std::size_t l1) {
            for (std::size_t l = l0; l < l1; ++l) {
                const int u = static_cast<int>(l % static_cast<std::size_t>(b.nu));
                const int v = static_cast<int>(l / static_cast<std::size_t>(b.nu));
                const LineRay lr = line_ray(grid, b, u, v, p.sign);
                const RayField field = line_field(gaussians, b, lr, u, v, opts);
                if (auto s2 = ray_sigma_sq(field)) {
                    per_line[l] = *s2;
                }
            }
        });
        for (double s : per_line) {
            if (!std::isnan(s)) {
                all.push_back(s);
            }
        }
    }
    if (all.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const auto mid = all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2);
    std::nth_element(all.begin(), mid, all.end());
    return *mid;
}

} // namespace

ScalarGrid sample_sdf_grid(std::span<const PreparedGaussian> gaussians, const Aabb &bounds,
                           const SdfSamplingOptions &opts) {
    if (opts.resolution < kMinResolution || opts.resolution > kMaxResolution) {
        throw Error(ErrorKind::InvalidParameter, "grid resolution must lie in [4, 1024]");
    }
    if (!(opts.mu > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "smooth factor mu must be positive");
    }
    const Vec3 extent = bounds.hi - bounds.lo;
    if (!bounds.lo.allFinite() || !bounds.hi.allFinite() || !(extent.minCoeff() > 0.0)) {
        throw Error(ErrorKind::InvalidBounds, "mesh bounds must have positive finite extent");
    }

    ScalarGrid grid;
    grid.origin = bounds.lo;
    grid.spacing = extent.maxCoeff() / static_cast<double>(opts.resolution - 1);
    for (int a = 0; a < 3; ++a) {
        grid.dims[a] = std::clamp(static_cast<int>(std::ceil(extent[a] / grid.spacing - 1e-9)) + 1,
                                  2, opts.resolution);
    }
    const double sentinel = grid.sentinel();
    const bool min_abs = opts.aggregation == ProbeAggregation::MinAbsOverThree;
    // Six-probe rules keep the `rank + 1` largest values per sample and report
    // the smallest of them.
    const std::size_t rank = opts.aggregation == ProbeAggregation::VoteOverSix ? 2 : 0;
    const std::size_t count = static_cast<std::size_t>(grid.dims[0]) * grid.dims[1] * grid.dims[2];
    std::vector<double> top(min_abs ? 0 : count * (rank + 1),
                            -std::numeric_limits<double>::infinity());
    grid.values.assign(count, std::numeric_limits<double>::quiet_NaN());

    std::vector<LineBins> bins;
    for (int a = 0; a < 3; ++a) {
        bins.push_back(bin_lines(gaussians, grid, a, opts.influence_sigmas));
    }
    const auto probes = probes_for(opts.aggregation);

    std::optional<double> global_s2;
    if (opts.sigma_mode == SigmaMode::Global) {
        const double s2 = median_sigma_sq(gaussians, grid, bins, probes, opts);
        if (std::isfinite(s2)) {
            global_s2 = s2;
        }
    }

    // Within one probe every line owns a disjoint set of samples, so lines can
    // run in parallel; probes run in a fixed order.
    for (const Probe &p : probes) {
        const LineBins &b = bins[static_cast<std::size_t>(p.axis)];
        const std::size_t lines = static_cast<std::size_t>(b.nu) * static_cast<std::size_t>(b.nv);
        parallel_for(lines, opts.threads, [&](std::size_t l0, std::size_t l1) {
            std::array<int, 3> ijk{};
            for (std::size_t l = l0; l < l1; ++l) {
                const int u = static_cast<int>(l % static_cast<std::size_t>(b.nu));
                const int v = static_cast<int>(l / static_cast<std::size_t>(b.nu));
                const LineRay lr = line_ray(grid, b, u, v, p.sign);
                const RayField field = line_field(gaussians, b, lr, u, v, opts);
                std::optional<SurfaceSolve> solve;
                if (!field.empty() && (opts.sigma_mode == SigmaMode::PerRay || global_s2)) {
                    solve = solve_surface(field, opts.mu, global_s2);
                }
                ijk[b.u_axis] = u;
                ijk[b.v_axis] = v;
                for (int s = 0; s < grid.dims[b.axis]; ++s) {
                    ijk[b.axis] = s;
                    double d = sentinel;
                    if (solve) {
                        const double coord = grid.origin[b.axis] + grid.spacing * s;
                        const double t = std::abs(coord - lr.entry);
                        d = std::clamp(sdf_along_ray(field, *solve, t).distance, -sentinel,
                                       sentinel);
                    }
                    const std::size_t idx = grid.index(ijk[0], ijk[1], ijk[2]);
                    if (min_abs) {
                        double &slot = grid.values[idx];
                        if (std::isnan(slot) || std::abs(d) < std::abs(slot)) {
                            slot = d;
                        }
                        continue;
                    }
                    double *best = &top[idx * (rank + 1)];
                    for (std::size_t r = 0; r <= rank; ++r) {
                        if (d > best[r]) {
                            std::swap(d, best[r]);
                        }
                    }
                }
            }
        });
    }
    if (!min_abs) {
        for (std::size_t i = 0; i < count; ++i) {
            grid.values[i] = top[i * (rank + 1) + rank];
        }
    }
    return grid;
}

namespace {

// Cube corner offsets in table order.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
// Edge -> (corner a, corner b); corner a is the lower end along the edge axis.
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6},
                                     {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
constexpr int kEdgeAxis[12] = {0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2};

} // namespace

TriangleMesh marching_cubes(const ScalarGrid &grid, double iso) {
    TriangleMesh mesh;
    const auto [nx, ny, nz] = grid.dims;
    if (nx < 2 || ny < 2 || nz < 2 ||
        grid.values.size() != static_cast<std::size_t>(nx) * ny * nz) {
        throw Error(ErrorKind::ShapeMismatch, "scalar grid shape does not match its values");
    }
    for (double v : grid.values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::InvalidParameter, "scalar grid contains non-finite values");
        }
    }
    const double nudge = 1e-6 * grid.spacing;
    auto value = [&](int i, int j, int k) {
        const double v = grid.at(i, j, k);
        return v == iso ? iso + nudge : v;
    };

    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    auto vertex_for = [&](int i, int j, int k, int edge) -> std::uint32_t {
        const int *a = kCorner[kEdgeCorners[edge][0]];
        const int *b = kCorner[kEdgeCorners[edge][1]];
        const int ai = i + a[0], aj = j + a[1], ak = k + a[2];
        const std::uint64_t key = static_cast<std::uint64_t>(grid.index(ai, aj, ak)) * 3u +
                                  static_cast<std::uint64_t>(kEdgeAxis[edge]);
        if (auto it = edge_vertex.find(key); it != edge_vertex.end()) {
            return it->second;
        }
        const double va = value(ai, aj, ak);
        const double vb = value(i + b[0], j + b[1], k + b[2]);
        const double t = (iso - va) / (vb - va);
        const Vec3 pa = grid.point(ai, aj, ak);
        const Vec3 pb = grid.point(i + b[0], j + b[1], k + b[2]);
        const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(pa + t * (pb - pa));
        edge_vertex.emplace(key, id);
        return id;
    };

    const double min_area = 1e-12 * grid.spacing * grid.spacing;
    for (int k = 0; k + 1 < nz; ++k) {
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    if (value(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < iso) {
                        cube |= 1 << c;
                    }
                }
                if (detail::kMcEdgeTable[cube] == 0) {
                    continue;
                }
                const auto &tri = detail::kMcTriTable[cube];
                for (int n = 0; tri[n] != -1; n += 3) {
                    const std::uint32_t a = vertex_for(i, j, k, tri[n]);
                    const std::uint32_t b = vertex_for(i, j, k, tri[n + 1]);
                    const std::uint32_t c = vertex_for(i, j, k, tri[n + 2]);
                    const Vec3 &pa = mesh.vertices[a];
                    const double area =
                        0.5 * (mesh.vertices[b] - pa).cross(mesh.vertices[c] - pa).norm();
                    if (!(area > min_area)) {
                        continue;
                    }
                    mesh.faces.push_back({a, c, b});
                }
            }
        }
    }
    return mesh;
}

void compute_normals(TriangleMesh &mesh) {
    mesh.normals.assign(mesh.vertices.size(), Vec3::Zero());
    for (const auto &f : mesh.faces) {
        const Vec3 &a = mesh.vertices[f[0]];
        const Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
        for (std::uint32_t idx : f) {
            mesh.normals[idx] += n;
        }
    }
    for (auto &n : mesh.normals) {
        const double len = n.norm();
        if (len > 0.0) {
            n /= len;
        }
    }
}

} // namespace gvkf
