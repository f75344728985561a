// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gvkf/gaussian.hpp"
#include "gvkf/renderer.hpp"

#include <cstddef>
#include <vector>

namespace gvkf {

struct SphereSceneOptions {
    std::size_t count = 2000;
    double radius = 1.0;
    double scale = 0.02;
    double opacity = 0.95;
    Rgb color{0.8, 0.8, 0.8};
};

/// Isotropic primitives on a Fibonacci lattice over a sphere centred at the
/// origin.
std::vector<GaussianPrimitive> sphere_scene(const SphereSceneOptions &opts = {});

/// Flat primitives tiling the square [-half, half]^2 in the plane z = depth,
/// thin along z.
std::vector<GaussianPrimitive> wall_scene(int per_side = 16, double half = 0.5,
                                          double depth = 2.0, double opacity = 0.95);

/// One primitive at the origin.
std::vector<GaussianPrimitive> single_scene();

/// Camera at (0, 0, distance) looking at the origin.
Camera default_camera(int width = 64, int height = 64, double distance = 3.0);

} // namespace gvkf
