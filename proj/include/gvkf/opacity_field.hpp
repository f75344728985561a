// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gvkf/gaussian.hpp"

#include <limits>
#include <span>
#include <vector>

namespace gvkf {

/// Ordered kernel set on one ray. Kernels are sorted ascending by t, ties
/// broken by source index.
struct RayField {
    std::vector<RayKernel> kernels;
    Rgb background{};
    double t_max = std::numeric_limits<double>::infinity();

    std::size_t size() const { return kernels.size(); }
    bool empty() const { return kernels.empty(); }
};

/// Sorts kernels into canonical order (t ascending, then source index).
void sort_kernels(std::vector<RayKernel> &kernels);

RayField make_field(std::vector<RayKernel> kernels, Rgb background = {},
                    double t_max = std::numeric_limits<double>::infinity());

struct CullOptions {
    double near = 1.0e-4;
    double min_alpha = 1.0e-4;
    /// Sphere-of-influence radius in units of the largest scale axis.
    double influence_sigmas = 3.0;
};

/// Builds the kernel set for one ray: sphere-of-influence test, ray-Gaussian
/// transform, culling (alpha below threshold, t at or before the near plane,
/// t beyond the far bound) and canonical sort. `indices` restricts the
/// candidate set; an empty span means "all".
RayField build_ray_field(std::span<const PreparedGaussian> gaussians, const Ray &ray,
                         const CullOptions &opts, Rgb background = {},
                         std::span<const std::size_t> indices = {});

/// Solid-after-peak kernel, argument is t - t_i:
/// exp(-k x^2) for x < 0, 1 for x >= 0.
double kernel_value(const RayKernel &kern, double t);

/// Opacity density: sum_i alpha_i K_i(t - t_i).
double rho(const RayField &field, double t);

/// Hit CDF as the front-to-back blended sum
/// sum_i a_i prod_{j<i} (1 - a_j), a_i = alpha_i K_i(t - t_i).
double cdf_phi(const RayField &field, double t);

/// Same quantity via 1 - prod_i (1 - a_i). Independent of kernel order.
double cdf_phi_product(const RayField &field, double t);

/// Upper bound of cdf_phi over t: 1 - prod_i (1 - alpha_i).
double cdf_phi_limit(const RayField &field);

struct RayColor {
    Rgb color{};
    double opacity = 0.0;
};

/// Front-to-back compositing with per-kernel weight alpha_i K_i(0) = alpha_i
/// and the background term. Stops once transmittance drops below
/// `termination_threshold` (pass 0 for exhaustive compositing).
RayColor render_ray(const RayField &field, double termination_threshold = 1.0e-4);

/// Blending weights w_i = alpha_i prod_{j<i} (1 - alpha_j).
std::vector<double> blend_weights(const RayField &field);

/// Blended depth sum w_i t_i / sum w_i; +infinity for an empty field.
double render_depth(const RayField &field);

} // namespace gvkf
