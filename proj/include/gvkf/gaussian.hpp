// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>

namespace gvkf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    double &operator[](std::size_t i) { return i == 0 ? r : (i == 1 ? g : b); }
    double operator[](std::size_t i) const { return i == 0 ? r : (i == 1 ? g : b); }
    friend bool operator==(const Rgb &, const Rgb &) = default;
};

/// One anisotropic 3D Gaussian. `opacity` is the stored base opacity (beta);
/// the per-ray blending coefficient is derived from it in ray_gaussian_transform.
struct GaussianPrimitive {
    Vec3 position = Vec3::Zero();
    Quat rotation = Quat::Identity();
    Vec3 scale = Vec3::Ones();
    double opacity = 1.0;
    Rgb color{};
};

/// Throws ErrorKind::InvalidParameter if any invariant of the primitive is
/// violated (unit quaternion, positive scale, opacity in (0,1], color in [0,1]).
void validate(const GaussianPrimitive &g);

/// Symmetric positive-definite 3x3 covariance with its cached inverse.
struct Covariance3 {
    Mat3 matrix;
    Mat3 inverse;
};

/// Sigma = Rot(q) * diag(s)^2 * Rot(q)^T. The inverse is assembled from the
/// same factorisation, so no general matrix inversion happens.
Covariance3 covariance_from_rs(const Quat &rotation, const Vec3 &scale);

/// A primitive bundled with its covariance; what the renderer and mesher
/// iterate over.
struct PreparedGaussian {
    GaussianPrimitive prim;
    Covariance3 cov;
    double max_scale = 0.0;
};

PreparedGaussian prepare(const GaussianPrimitive &g);

/// beta * exp(-1/2 (x-p)^T Sigma^-1 (x-p))
double evaluate_3d(const PreparedGaussian &g, const Vec3 &x);

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
    double t_max = 1.0e6;
};

/// Normalises `direction`; throws ErrorKind::InvalidRay on a degenerate
/// direction or a non-positive far bound.
Ray make_ray(const Vec3 &origin, const Vec3 &direction, double t_max);

/// The 1D kernel one Gaussian induces on one ray.
struct RayKernel {
    double t = 0.0;         ///< ray parameter of peak influence
    double k = 0.0;         ///< 1D sharpness, 1/2 v^T Sigma^-1 v
    double g_max = 0.0;     ///< peak of the ray-restricted unit-height Gaussian
    double alpha = 0.0;     ///< blending coefficient, opacity * g_max
    double base_opacity = 0.0;
    Rgb color{};
    std::size_t source = 0; ///< index of the generating primitive
    bool behind = false;    ///< t <= 0
};

RayKernel ray_gaussian_transform(const PreparedGaussian &g, const Ray &ray,
                                 std::size_t source = 0);

} // namespace gvkf
