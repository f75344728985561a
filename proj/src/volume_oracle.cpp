// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/volume_oracle.hpp"

#include "gvkf/error.hpp"

#include <cmath>
#include <numbers>

namespace gvkf {

void validate(const QuadratureConfig &cfg) {
    if (!(cfg.step > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "quadrature step must be positive");
    }
    if (!(cfg.far > cfg.step)) {
        throw Error(ErrorKind::InvalidParameter, "quadrature far bound must exceed the step");
    }
}

namespace {

double profile_value(const RayKernel &kern, double t, KernelProfile profile) {
    if (profile == KernelProfile::Solid) {
        return kern.alpha * kernel_value(kern, t);
    }
    const double x = t - kern.t;
    return kern.alpha * std::sqrt(kern.k / std::numbers::pi) * std::exp(-kern.k * x * x);
}

// Integral of the density over [a, b] split into ceil((b-a)/step) equal cells.
double integrate(const std::function<double(double)> &f, double a, double b,
                 const QuadratureConfig &cfg) {
    if (!(b > a)) {
        return 0.0;
    }
    const auto n = static_cast<long>(std::ceil((b - a) / cfg.step - 1e-9));
    const double h = (b - a) / static_cast<double>(std::max(n, 1L));
    double sum = 0.0;
    if (cfg.scheme == QuadratureScheme::Midpoint) {
        for (long i = 0; i < n; ++i) {
            sum += f(a + (static_cast<double>(i) + 0.5) * h);
        }
        return sum * h;
    }
    sum = 0.5 * (f(a) + f(b));
    for (long i = 1; i < n; ++i) {
        sum += f(a + static_cast<double>(i) * h);
    }
    return sum * h;
}

} // namespace

Medium medium_from_field(const RayField &field, KernelProfile profile) {
    Medium m;
    m.background = field.background;
    m.density = [&field, profile](double t) {
        double sum = 0.0;
        for (const auto &kern : field.kernels) {
            sum += profile_value(kern, t, profile);
        }
        return sum;
    };
    m.color = [&field, profile](double t) {
        Rgb sum{};
        double total = 0.0;
        for (const auto &kern : field.kernels) {
            const double v = profile_value(kern, t, profile);
            sum.r += v * kern.color.r;
            sum.g += v * kern.color.g;
            sum.b += v * kern.color.b;
            total += v;
        }
        if (total > 0.0) {
            sum.r /= total;
            sum.g /= total;
            sum.b /= total;
        }
        return sum;
    };
    return m;
}

double transmittance_exact(const Medium &medium, double t, const QuadratureConfig &cfg) {
    validate(cfg);
    if (t <= 0.0) {
        return 1.0;
    }
    return std::exp(-integrate(medium.density, 0.0, t, cfg));
}

double transmittance_exact(const RayField &field, double t, const QuadratureConfig &cfg) {
    return transmittance_exact(medium_from_field(field), t, cfg);
}

double cdf_exact(const Medium &medium, double t, const QuadratureConfig &cfg) {
    return 1.0 - transmittance_exact(medium, t, cfg);
}

double cdf_exact(const RayField &field, double t, const QuadratureConfig &cfg) {
    return 1.0 - transmittance_exact(field, t, cfg);
}

VolumeRender render_volume(const Medium &medium, const QuadratureConfig &cfg) {
    validate(cfg);
    const auto n = static_cast<long>(std::ceil(cfg.far / cfg.step - 1e-9));
    const double h = cfg.far / static_cast<double>(n);

    VolumeRender out;
    double trans = 1.0;
    double left = medium.density(0.0);
    for (long i = 0; i < n; ++i) {
        const double a = static_cast<double>(i) * h;
        const double mid = a + 0.5 * h;
        double sigma = 0.0;
        if (cfg.scheme == QuadratureScheme::Midpoint) {
            sigma = medium.density(mid);
        } else {
            const double right = medium.density(a + h);
            sigma = 0.5 * (left + right);
            left = right;
        }
        const double alpha = 1.0 - std::exp(-sigma * h);
        if (alpha > 0.0) {
            const Rgb c = medium.color(mid);
            const double w = trans * alpha;
            out.color.r += w * c.r;
            out.color.g += w * c.g;
            out.color.b += w * c.b;
            trans *= 1.0 - alpha;
        }
    }
    out.color.r += trans * medium.background.r;
    out.color.g += trans * medium.background.g;
    out.color.b += trans * medium.background.b;
    out.transmittance = trans;
    return out;
}

VolumeRender render_volume(const RayField &field, const QuadratureConfig &cfg,
                           KernelProfile profile) {
    VolumeRender out = render_volume(medium_from_field(field, profile), cfg);
    for (const auto &kern : field.kernels) {
        if (cfg.step * std::sqrt(kern.k) > 1.0) {
            out.coarse_step = true;
            break;
        }
    }
    return out;
}

} // namespace gvkf
