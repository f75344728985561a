// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

// Near-surface opacity model and the opacity -> signed distance mapping.
//
// Near a surface the density along a ray is modelled as a normal pdf
// rho(u) = exp(-u^2 / 2 s2) / sqrt(2 pi s2), with u = -D the negated signed
// distance and s2 = sum_i 1 / (2 pi a_i^2). The hit pdf Phi'(u) peaks at the
// unique root u0 < 0 of rho(u) + u / s2 = 0, i.e. before the surface. The
// CDF is then approximated by the logistic 1 / (1 + exp(-mu (u - u0))), whose
// inverse gives D(Phi) = ln(1/Phi - 1) / mu - u0.

#pragma once

#include "gvkf/opacity_field.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gvkf {

/// s2 = sum_i 1 / (2 pi a_i^2). Throws ErrorKind::InvalidParameter on an empty
/// list or any a_i <= 0.
double sigma_sq(std::span<const double> alphas);

/// Normal pdf with variance s2 evaluated at u.
double normal_density(double u, double s2);

/// rho(u) + u / s2; strictly increasing on u < 0, positive at 0.
double u0_residual(double u, double s2);

/// Root u0 < 0 of rho(u) = -u / s2. Bisection on [-10 sigma, 0] followed by
/// Newton polish. Throws ErrorKind::SolverFailure if 200 bisection steps do
/// not meet `tol` on the residual.
double solve_u0(double s2, double tol = 1.0e-10);

/// Logistic CDF 1 / (1 + exp(-mu (u - u0))).
double logistic_cdf(double u, double mu, double u0);

struct SdfSample {
    double distance = 0.0;
    bool clamped = false; ///< phi was outside (eps, 1 - eps) and got clamped
};

inline constexpr double kPhiClamp = 1.0e-7;

/// D = ln(1/phi - 1) / mu - u0.
SdfSample sdf_from_cdf(double phi, double mu, double u0);

/// Phi level whose image under sdf_from_cdf is exactly 0: 1 / (1 + exp(mu u0)).
double surface_phi(double mu, double u0);

struct SurfaceDiagnostics {
    std::vector<double> u;
    std::vector<double> h;           ///< -rho^2 + rho'
    std::vector<double> phi_prime;   ///< T(u) rho(u), integral from u.front()
    std::vector<double> phi_second;  ///< h(u) T(u)
    int sign_changes = 0;            ///< sign changes of h across the grid
    bool positive_to_negative = false;
    bool inconclusive = false;       ///< grid does not bracket a sign change
    double crossing = 0.0;           ///< linear estimate of the h zero, if any
};

/// Samples h, Phi', Phi'' on a sorted grid. The running integral inside
/// T(u) = exp(-int rho) starts at the first grid point (trapezoid rule).
SurfaceDiagnostics h_diagnostic(double s2, std::span<const double> u_grid);

enum class SigmaMode { PerRay, Global };

struct SurfaceSolve {
    double sigma_sq = 0.0;
    double u0 = 0.0;
    double mu = 8.0;
    std::optional<double> t_star; ///< ray parameter of D = 0, when reached
    std::size_t kernel_count = 0; ///< kernels used for sigma_sq
};

/// Kernels lighter than this fraction of the heaviest blending weight are
/// left out of the surface window.
inline constexpr double kWindowWeightFraction = 0.1;

/// Coefficients feeding sigma_sq for one ray: the effective alpha of each
/// kernel near the heaviest-weighted kernel, normalised to a unit-mass density
/// peak (alpha sqrt(k / pi)). A kernel is kept if its t lies within three 1D
/// standard deviations (3/sqrt(2k)) of the heaviest kernel and its blending
/// weight is at least kWindowWeightFraction of the heaviest. Returns an empty
/// list for an empty field.
std::vector<double> surface_alphas(const RayField &field);

/// Per-ray variance, or nullopt for an empty field.
std::optional<double> ray_sigma_sq(const RayField &field);

/// Solves u0 for the ray (or uses `global_sigma_sq` when given) and locates
/// t* by bisection on the monotone Phi(t). Returns nullopt for an empty field.
std::optional<SurfaceSolve> solve_surface(const RayField &field, double mu,
                                          std::optional<double> global_sigma_sq = {},
                                          double tol = 1.0e-10);

/// D(t) on the ray for a given solve.
SdfSample sdf_along_ray(const RayField &field, const SurfaceSolve &solve, double t);

} // namespace gvkf
