// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gvkf/gaussian.hpp"
#include "gvkf/image.hpp"
#include "gvkf/opacity_field.hpp"
#include "gvkf/voxel_store.hpp"

#include <functional>
#include <span>
#include <vector>

namespace gvkf {

/// Pinhole camera. Pixel (0,0) is the top-left corner of the image.
struct Camera {
    Vec3 position = Vec3::Zero();
    Vec3 look_at = Vec3(0.0, 0.0, 1.0);
    Vec3 up = Vec3(0.0, 1.0, 0.0);
    double fov_y = 60.0; ///< degrees
    int width = 64;
    int height = 64;
    double near = 0.01;
    double far = 100.0;
};

/// Throws ErrorKind::InvalidParameter when an invariant fails.
void validate(const Camera &cam);

/// Ray through the centre of pixel (px, py); throws
/// ErrorKind::IndexOutOfRange outside the image.
Ray generate_ray(const Camera &cam, int px, int py);

struct RenderOptions {
    Rgb background{};
    unsigned threads = 1;
    double termination_threshold = 1.0e-4;
    double min_alpha = 1.0e-4;
    double influence_sigmas = 3.0;
    /// Optional per-ray scalar written into RenderOutputs::statistic.
    std::function<double(const RayField &)> ray_statistic;
};

struct RenderOutputs {
    ImageBuffer color;  ///< rgb
    ImageBuffer depth;  ///< gray, +inf where nothing was hit
    ImageBuffer normal; ///< rgb, (n + 1) / 2 in camera-facing world space; 0 if undefined
    ImageBuffer statistic; ///< gray, only when RenderOptions::ray_statistic is set
    /// visible[i] is true if primitive i contributed a kernel to some pixel.
    std::vector<bool> visible;
};

std::vector<PreparedGaussian> prepare_all(std::span<const GaussianPrimitive> gaussians);

/// Kernel set of one pixel, culled with the camera's near plane and far bound.
RayField pixel_field(std::span<const PreparedGaussian> gaussians, const Camera &cam, int px,
                     int py, const RenderOptions &opts);

RenderOutputs render_gaussians(std::span<const PreparedGaussian> gaussians, const Camera &cam,
                               const RenderOptions &opts);

/// Generates the primitives for `cam` (neural mode conditions on it) and
/// renders them.
RenderOutputs render_image(const SparseVoxelGrid &scene, const Camera &cam,
                           const RenderOptions &opts);

} // namespace gvkf
