// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/scenes.hpp"

#include "gvkf/error.hpp"

#include <cmath>
#include <numbers>

namespace gvkf {

std::vector<GaussianPrimitive> sphere_scene(const SphereSceneOptions &opts) {
    if (opts.count == 0 || !(opts.radius > 0.0) || !(opts.scale > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "sphere scene needs count, radius and scale > 0");
    }
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double n = static_cast<double>(opts.count);
    std::vector<GaussianPrimitive> out;
    out.reserve(opts.count);
    for (std::size_t i = 0; i < opts.count; ++i) {
        const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double phi = golden * static_cast<double>(i);
        GaussianPrimitive g;
        g.position = opts.radius * Vec3(r * std::cos(phi), y, r * std::sin(phi));
        g.scale = Vec3::Constant(opts.scale);
        g.opacity = opts.opacity;
        g.color = opts.color;
        out.push_back(g);
    }
    return out;
}

std::vector<GaussianPrimitive> wall_scene(int per_side, double half, double depth,
                                          double opacity) {
    if (per_side < 1 || !(half > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "wall scene needs per_side >= 1 and half > 0");
    }
    const double step = 2.0 * half / per_side;
    std::vector<GaussianPrimitive> out;
    for (int j = 0; j < per_side; ++j) {
        for (int i = 0; i < per_side; ++i) {
            GaussianPrimitive g;
            g.position = Vec3(-half + (i + 0.5) * step, -half + (j + 0.5) * step, depth);
            g.scale = Vec3(step, step, 0.05 * step);
            g.opacity = opacity;
            g.color = Rgb{0.9, 0.5, 0.2};
            out.push_back(g);
        }
    }
    return out;
}

std::vector<GaussianPrimitive> single_scene() {
    GaussianPrimitive g;
    g.scale = Vec3::Constant(0.2);
    g.opacity = 0.9;
    g.color = Rgb{1.0, 0.2, 0.1};
    return {g};
}

Camera default_camera(int width, int height, double distance) {
    Camera cam;
    cam.position = Vec3(0.0, 0.0, distance);
    cam.look_at = Vec3::Zero();
    cam.up = Vec3(0.0, 1.0, 0.0);
    cam.width = width;
    cam.height = height;
    return cam;
}

} // namespace gvkf
