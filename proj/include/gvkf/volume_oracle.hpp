// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

// Dense-quadrature classical volume rendering. Slow on purpose; it is the
// reference the blended opacity field is checked against.

#pragma once

#include "gvkf/opacity_field.hpp"

#include <functional>

namespace gvkf {

enum class QuadratureScheme { Midpoint, Trapezoid };

struct QuadratureConfig {
    double step = 1.0e-3;
    double far = 10.0;
    QuadratureScheme scheme = QuadratureScheme::Midpoint;
};

/// Throws ErrorKind::InvalidParameter unless step > 0 and far > step.
void validate(const QuadratureConfig &cfg);

/// How the kernels of a RayField become a continuous density.
enum class KernelProfile {
    /// alpha_i K_i(t - t_i), solid after the peak.
    Solid,
    /// Full Gaussian normalised to unit mass and scaled by alpha_i:
    /// alpha_i sqrt(k_i/pi) exp(-k_i (t - t_i)^2). Integrates to alpha_i.
    NormalizedGaussian,
};

/// A continuous medium along one ray: density rho(t), color c(t), background.
struct Medium {
    std::function<double(double)> density;
    std::function<Rgb(double)> color;
    Rgb background{};
};

/// The returned medium refers to `field`, which must outlive it.
/// Color rule: c(t) is the density-weighted mean of the kernel colors, so the
/// emitted radiance rho(t) c(t) is the sum of the per-kernel emissions. Black
/// where the density vanishes.
Medium medium_from_field(const RayField &field, KernelProfile profile = KernelProfile::Solid);

/// T(t) = exp(-integral_0^t rho).
double transmittance_exact(const Medium &medium, double t, const QuadratureConfig &cfg);
double transmittance_exact(const RayField &field, double t, const QuadratureConfig &cfg);

/// 1 - transmittance_exact.
double cdf_exact(const Medium &medium, double t, const QuadratureConfig &cfg);
double cdf_exact(const RayField &field, double t, const QuadratureConfig &cfg);

struct VolumeRender {
    Rgb color{};
    double transmittance = 1.0;
    /// Set when step * sqrt(k_i) > 1 for some kernel (under-resolved).
    bool coarse_step = false;
};

/// Discrete compositing over uniform samples on [0, far]:
/// alpha_j = 1 - exp(-sigma_j step), C = sum T_j alpha_j c_j + T_end c_bg.
/// Midpoint samples sigma and c at interval centres; trapezoid averages the
/// endpoint densities and uses the centre color.
VolumeRender render_volume(const Medium &medium, const QuadratureConfig &cfg);
VolumeRender render_volume(const RayField &field, const QuadratureConfig &cfg,
                           KernelProfile profile = KernelProfile::Solid);

} // namespace gvkf
