// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/opacity_field.hpp"

#include <algorithm>
#include <cmath>

namespace gvkf {

void sort_kernels(std::vector<RayKernel> &kernels) {
    std::stable_sort(kernels.begin(), kernels.end(), [](const RayKernel &a, const RayKernel &b) {
        if (a.t != b.t) {
            return a.t < b.t;
        }
        return a.source < b.source;
    });
}

RayField make_field(std::vector<RayKernel> kernels, Rgb background, double t_max) {
    sort_kernels(kernels);
    return RayField{std::move(kernels), background, t_max};
}

namespace {

bool within_influence(const PreparedGaussian &g, const Ray &ray, double radius) {
    const Vec3 d = g.prim.position - ray.origin;
    const double along = d.dot(ray.direction);
    const double perp2 = d.squaredNorm() - along * along;
    return perp2 <= radius * radius;
}

void try_add(std::vector<RayKernel> &out, const PreparedGaussian &g, std::size_t idx,
             const Ray &ray, const CullOptions &opts) {
    if (!within_influence(g, ray, opts.influence_sigmas * g.max_scale)) {
        return;
    }
    RayKernel kern = ray_gaussian_transform(g, ray, idx);
    if (kern.t <= opts.near || kern.t > ray.t_max || kern.alpha < opts.min_alpha) {
        return;
    }
    out.push_back(kern);
}

} // namespace

RayField build_ray_field(std::span<const PreparedGaussian> gaussians, const Ray &ray,
                         const CullOptions &opts, Rgb background,
                         std::span<const std::size_t> indices) {
    std::vector<RayKernel> kernels;
    if (indices.empty()) {
        for (std::size_t i = 0; i < gaussians.size(); ++i) {
            try_add(kernels, gaussians[i], i, ray, opts);
        }
    } else {
        for (std::size_t i : indices) {
            try_add(kernels, gaussians[i], i, ray, opts);
        }
    }
    return make_field(std::move(kernels), background, ray.t_max);
}

double kernel_value(const RayKernel &kern, double t) {
    const double x = t - kern.t;
    if (x >= 0.0) {
        return 1.0;
    }
    return std::exp(-kern.k * x * x);
}

double rho(const RayField &field, double t) {
    double sum = 0.0;
    for (const auto &kern : field.kernels) {
        sum += kern.alpha * kernel_value(kern, t);
    }
    return sum;
}

double cdf_phi(const RayField &field, double t) {
    double sum = 0.0;
    double trans = 1.0;
    for (const auto &kern : field.kernels) {
        const double a = kern.alpha * kernel_value(kern, t);
        sum += a * trans;
        trans *= 1.0 - a;
    }
    return sum;
}

double cdf_phi_product(const RayField &field, double t) {
    double trans = 1.0;
    for (const auto &kern : field.kernels) {
        trans *= 1.0 - kern.alpha * kernel_value(kern, t);
    }
    return 1.0 - trans;
}

double cdf_phi_limit(const RayField &field) {
    double trans = 1.0;
    for (const auto &kern : field.kernels) {
        trans *= 1.0 - kern.alpha;
    }
    return 1.0 - trans;
}

RayColor render_ray(const RayField &field, double termination_threshold) {
    RayColor out;
    double trans = 1.0;
    for (const auto &kern : field.kernels) {
        if (trans < termination_threshold) {
            break;
        }
        const double w = kern.alpha * trans;
        out.color.r += w * kern.color.r;
        out.color.g += w * kern.color.g;
        out.color.b += w * kern.color.b;
        trans *= 1.0 - kern.alpha;
    }
    out.color.r += trans * field.background.r;
    out.color.g += trans * field.background.g;
    out.color.b += trans * field.background.b;
    out.opacity = 1.0 - trans;
    return out;
}

std::vector<double> blend_weights(const RayField &field) {
    std::vector<double> w;
    w.reserve(field.size());
    double trans = 1.0;
    for (const auto &kern : field.kernels) {
        w.push_back(kern.alpha * trans);
        trans *= 1.0 - kern.alpha;
    }
    return w;
}

double render_depth(const RayField &field) {
    if (field.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    const auto w = blend_weights(field);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        num += w[i] * field.kernels[i].t;
        den += w[i];
    }
    if (!(den > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return num / den;
}

} // namespace gvkf
