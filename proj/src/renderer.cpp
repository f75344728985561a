// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/renderer.hpp"

#include "gvkf/error.hpp"
#include "gvkf/parallel.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace gvkf {

void validate(const Camera &cam) {
    if (!cam.position.allFinite() || !cam.look_at.allFinite() || !cam.up.allFinite()) {
        throw Error(ErrorKind::InvalidParameter, "camera vectors must be finite");
    }
    if ((cam.look_at - cam.position).norm() < 1e-12) {
        throw Error(ErrorKind::InvalidParameter, "camera look_at must differ from position");
    }
    const Vec3 fwd = (cam.look_at - cam.position).normalized();
    if (cam.up.norm() < 1e-12 || fwd.cross(cam.up).norm() < 1e-9 * cam.up.norm()) {
        throw Error(ErrorKind::InvalidParameter, "camera up must not be parallel to the view axis");
    }
    if (!(cam.fov_y > 0.0 && cam.fov_y < 180.0)) {
        throw Error(ErrorKind::InvalidParameter, "camera fov_y must lie in (0,180) degrees");
    }
    if (cam.width <= 0 || cam.height <= 0) {
        throw Error(ErrorKind::InvalidParameter, "camera resolution must be positive");
    }
    if (!(cam.near > 0.0 && cam.near < cam.far)) {
        throw Error(ErrorKind::InvalidParameter, "camera needs 0 < near < far");
    }
}

namespace {

struct CameraFrame {
    Vec3 forward;
    Vec3 right;
    Vec3 up;
    double tan_half_y;
    double aspect;
};

CameraFrame frame_of(const Camera &cam) {
    CameraFrame f;
    f.forward = (cam.look_at - cam.position).normalized();
    f.right = f.forward.cross(cam.up).normalized();
    f.up = f.right.cross(f.forward);
    f.tan_half_y = std::tan(0.5 * cam.fov_y * std::numbers::pi / 180.0);
    f.aspect = static_cast<double>(cam.width) / static_cast<double>(cam.height);
    return f;
}

Ray ray_from_frame(const Camera &cam, const CameraFrame &f, int px, int py) {
    const double sx = (2.0 * (px + 0.5) / cam.width - 1.0) * f.tan_half_y * f.aspect;
    const double sy = (1.0 - 2.0 * (py + 0.5) / cam.height) * f.tan_half_y;
    return make_ray(cam.position, f.forward + sx * f.right + sy * f.up, cam.far);
}

} // namespace

Ray generate_ray(const Camera &cam, int px, int py) {
    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) {
        throw Error(ErrorKind::IndexOutOfRange, "pixel outside the image");
    }
    return ray_from_frame(cam, frame_of(cam), px, py);
}

std::vector<PreparedGaussian> prepare_all(std::span<const GaussianPrimitive> gaussians) {
    std::vector<PreparedGaussian> out;
    out.reserve(gaussians.size());
    for (const auto &g : gaussians) {
        out.push_back(prepare(g));
    }
    return out;
}

namespace {

CullOptions cull_options(const Camera &cam, const RenderOptions &opts) {
    CullOptions c;
    c.near = cam.near;
    c.min_alpha = opts.min_alpha;
    c.influence_sigmas = opts.influence_sigmas;
    return c;
}

} // namespace

RayField pixel_field(std::span<const PreparedGaussian> gaussians, const Camera &cam, int px,
                     int py, const RenderOptions &opts) {
    return build_ray_field(gaussians, generate_ray(cam, px, py), cull_options(cam, opts),
                           opts.background);
}

RenderOutputs render_gaussians(std::span<const PreparedGaussian> gaussians, const Camera &cam,
                               const RenderOptions &opts) {
    validate(cam);
    const CameraFrame frame = frame_of(cam);
    const CullOptions cull = cull_options(cam, opts);
    const int w = cam.width;
    const int h = cam.height;

    RenderOutputs out;
    out.color = ImageBuffer(w, h, 3);
    out.depth = ImageBuffer(w, h, 1);
    out.normal = ImageBuffer(w, h, 3);
    if (opts.ray_statistic) {
        out.statistic = ImageBuffer(w, h, 1);
    }
    std::vector<std::atomic<unsigned char>> visible(gaussians.size());
    for (auto &v : visible) {
        v.store(0, std::memory_order_relaxed);
    }
    std::vector<Vec3> dirs(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));

    parallel_for(static_cast<std::size_t>(h), opts.threads, [&](std::size_t y0, std::size_t y1) {
        for (std::size_t yy = y0; yy < y1; ++yy) {
            const int y = static_cast<int>(yy);
            for (int x = 0; x < w; ++x) {
                const Ray ray = ray_from_frame(cam, frame, x, y);
                dirs[yy * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] = ray.direction;
                const RayField field = build_ray_field(gaussians, ray, cull, opts.background);
                for (const auto &kern : field.kernels) {
                    visible[kern.source].store(1, std::memory_order_relaxed);
                }
                const RayColor c = render_ray(field, opts.termination_threshold);
                out.color.at(x, y, 0) = c.color.r;
                out.color.at(x, y, 1) = c.color.g;
                out.color.at(x, y, 2) = c.color.b;
                out.depth.at(x, y, 0) = render_depth(field);
                if (opts.ray_statistic) {
                    out.statistic.at(x, y, 0) = opts.ray_statistic(field);
                }
            }
        }
    });

    // Normals from central differences of the back-projected depth map.
    auto point_at = [&](int x, int y) -> std::optional<Vec3> {
        if (x < 0 || x >= w || y < 0 || y >= h) {
            return std::nullopt;
        }
        const double d = out.depth.at(x, y, 0);
        if (!std::isfinite(d)) {
            return std::nullopt;
        }
        return cam.position + d * dirs[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                                       static_cast<std::size_t>(x)];
    };
    auto diff = [](const std::optional<Vec3> &a, const std::optional<Vec3> &b,
                   const std::optional<Vec3> &c) -> std::optional<Vec3> {
        if (a && b) {
            return *b - *a;
        }
        if (c && b) {
            return *b - *c;
        }
        if (a && c) {
            return *c - *a;
        }
        return std::nullopt;
    };
    parallel_for(static_cast<std::size_t>(h), opts.threads, [&](std::size_t y0, std::size_t y1) {
        for (std::size_t yy = y0; yy < y1; ++yy) {
            const int y = static_cast<int>(yy);
            for (int x = 0; x < w; ++x) {
                const auto centre = point_at(x, y);
                if (!centre) {
                    continue;
                }
                const auto dx = diff(point_at(x - 1, y), point_at(x + 1, y), centre);
                const auto dy = diff(point_at(x, y - 1), point_at(x, y + 1), centre);
                if (!dx || !dy) {
                    continue;
                }
                Vec3 n = dx->cross(*dy);
                if (n.norm() < 1e-20) {
                    continue;
                }
                n.normalize();
                const Vec3 &dir = dirs[yy * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
                if (n.dot(dir) > 0.0) {
                    n = -n;
                }
                for (int c = 0; c < 3; ++c) {
                    out.normal.at(x, y, c) = 0.5 * (n[c] + 1.0);
                }
            }
        }
    });

    out.visible.resize(gaussians.size());
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        out.visible[i] = visible[i].load(std::memory_order_relaxed) != 0;
    }
    return out;
}

RenderOutputs render_image(const SparseVoxelGrid &scene, const Camera &cam,
                           const RenderOptions &opts) {
    const GeneratedGaussians gen = generate_gaussians(scene, cam.position);
    const auto prepared = prepare_all(gen.gaussians);
    return render_gaussians(prepared, cam, opts);
}

} // namespace gvkf
