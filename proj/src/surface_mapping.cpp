// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/surface_mapping.hpp"

#include "gvkf/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gvkf {

double sigma_sq(std::span<const double> alphas) {
    if (alphas.empty()) {
        throw Error(ErrorKind::InvalidParameter, "sigma_sq needs at least one coefficient");
    }
    double sum = 0.0;
    for (double a : alphas) {
        if (!(a > 0.0)) {
            throw Error(ErrorKind::InvalidParameter, "sigma_sq coefficients must be positive");
        }
        sum += 1.0 / (2.0 * std::numbers::pi * a * a);
    }
    return sum;
}

double normal_density(double u, double s2) {
    return std::exp(-u * u / (2.0 * s2)) / std::sqrt(2.0 * std::numbers::pi * s2);
}

double u0_residual(double u, double s2) { return normal_density(u, s2) + u / s2; }

double solve_u0(double s2, double tol) {
    if (!(s2 > 0.0) || !std::isfinite(s2)) {
        throw Error(ErrorKind::InvalidParameter, "sigma_sq must be positive and finite");
    }
    if (!(tol > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "solver tolerance must be positive");
    }
    const double sigma = std::sqrt(s2);
    double lo = -10.0 * sigma; // residual < 0
    double hi = 0.0;           // residual > 0
    double u = 0.5 * (lo + hi);
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
        u = 0.5 * (lo + hi);
        const double f = u0_residual(u, s2);
        if (std::abs(f) <= 0.01 * tol) {
            converged = true;
            break;
        }
        if (f < 0.0) {
            lo = u;
        } else {
            hi = u;
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(u)) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw Error(ErrorKind::SolverFailure, "u0 bisection did not converge in 200 iterations");
    }
    // Newton polish, kept inside the bracket.
    for (int iter = 0; iter < 5; ++iter) {
        const double rho = normal_density(u, s2);
        const double f = rho + u / s2;
        const double df = (1.0 - u * rho) / s2;
        const double next = u - f / df;
        if (!(next > lo && next < hi) || next == u) {
            break;
        }
        u = next;
    }
    if (!(u < 0.0) || std::abs(u0_residual(u, s2)) > tol) {
        throw Error(ErrorKind::SolverFailure, "u0 residual above tolerance");
    }
    return u;
}

double logistic_cdf(double u, double mu, double u0) {
    return 1.0 / (1.0 + std::exp(-mu * (u - u0)));
}

SdfSample sdf_from_cdf(double phi, double mu, double u0) {
    SdfSample out;
    if (!(phi > kPhiClamp)) {
        phi = kPhiClamp;
        out.clamped = true;
    } else if (!(phi < 1.0 - kPhiClamp)) {
        phi = 1.0 - kPhiClamp;
        out.clamped = true;
    }
    out.distance = std::log(1.0 / phi - 1.0) / mu - u0;
    return out;
}

double surface_phi(double mu, double u0) { return 1.0 / (1.0 + std::exp(mu * u0)); }

SurfaceDiagnostics h_diagnostic(double s2, std::span<const double> u_grid) {
    SurfaceDiagnostics d;
    const std::size_t n = u_grid.size();
    d.u.assign(u_grid.begin(), u_grid.end());
    d.h.resize(n);
    d.phi_prime.resize(n);
    d.phi_second.resize(n);

    double integral = 0.0;
    double prev_rho = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = u_grid[i];
        const double rho = normal_density(u, s2);
        if (i > 0) {
            integral += 0.5 * (rho + prev_rho) * (u - u_grid[i - 1]);
        }
        prev_rho = rho;
        const double trans = std::exp(-integral);
        const double h = -rho * (rho + u / s2);
        d.h[i] = h;
        d.phi_prime[i] = trans * rho;
        d.phi_second[i] = trans * h;
    }

    int last_sign = 0;
    std::size_t last_index = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int s = (d.h[i] > 0.0) - (d.h[i] < 0.0);
        if (s == 0) {
            continue;
        }
        if (last_sign != 0 && s != last_sign) {
            ++d.sign_changes;
            if (d.sign_changes == 1) {
                d.positive_to_negative = last_sign > 0;
                const double h0 = d.h[last_index];
                const double h1 = d.h[i];
                const double u0 = d.u[last_index];
                const double u1 = d.u[i];
                d.crossing = u0 + (u1 - u0) * h0 / (h0 - h1);
            }
        }
        last_sign = s;
        last_index = i;
    }
    d.inconclusive = d.sign_changes == 0;
    return d;
}

std::vector<double> surface_alphas(const RayField &field) {
    std::vector<double> out;
    if (field.empty()) {
        return out;
    }
    const auto w = blend_weights(field);
    std::size_t best = 0;
    for (std::size_t i = 1; i < w.size(); ++i) {
        if (w[i] > w[best]) {
            best = i;
        }
    }
    const RayKernel &peak = field.kernels[best];
    if (!(peak.alpha > 0.0)) {
        return out;
    }
    const double reach = 3.0 / std::sqrt(2.0 * peak.k);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const RayKernel &kern = field.kernels[i];
        if (std::abs(kern.t - peak.t) <= reach && w[i] >= kWindowWeightFraction * w[best]) {
            out.push_back(kern.alpha * std::sqrt(kern.k / std::numbers::pi));
        }
    }
    return out;
}

std::optional<double> ray_sigma_sq(const RayField &field) {
    const auto alphas = surface_alphas(field);
    if (alphas.empty()) {
        return std::nullopt;
    }
    return sigma_sq(alphas);
}

std::optional<SurfaceSolve> solve_surface(const RayField &field, double mu,
                                          std::optional<double> global_sigma_sq, double tol) {
    if (!(mu > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "smooth factor mu must be positive");
    }
    if (field.empty()) {
        return std::nullopt;
    }
    SurfaceSolve s;
    s.mu = mu;
    if (global_sigma_sq) {
        s.sigma_sq = *global_sigma_sq;
        s.kernel_count = surface_alphas(field).size();
    } else {
        const auto alphas = surface_alphas(field);
        if (alphas.empty()) {
            return std::nullopt;
        }
        s.sigma_sq = sigma_sq(alphas);
        s.kernel_count = alphas.size();
    }
    s.u0 = solve_u0(s.sigma_sq, tol);

    const double level = surface_phi(mu, s.u0);
    if (cdf_phi(field, field.kernels.back().t) >= level) {
        double lo = 0.0;
        double hi = field.kernels.back().t;
        for (int iter = 0; iter < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (cdf_phi(field, mid) >= level) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        s.t_star = hi;
    }
    return s;
}

SdfSample sdf_along_ray(const RayField &field, const SurfaceSolve &solve, double t) {
    return sdf_from_cdf(cdf_phi(field, t), solve.mu, solve.u0);
}

} // namespace gvkf
