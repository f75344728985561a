// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/gaussian.hpp"

#include "gvkf/error.hpp"

#include <cmath>
#include <sstream>

namespace gvkf {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::SingularCovariance: return "singular-covariance";
    case ErrorKind::InvalidRay: return "invalid-ray";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::MissingCamera: return "missing-camera";
    case ErrorKind::InvalidId: return "invalid-id";
    case ErrorKind::SolverFailure: return "solver-failure";
    case ErrorKind::IndexOutOfRange: return "index-out-of-range";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::InvalidBounds: return "invalid-bounds";
    case ErrorKind::FileError: return "file-error";
    case ErrorKind::ParseError: return "parse-error";
    case ErrorKind::NumericFailure: return "numeric-failure";
    }
    return "unknown";
}

namespace {

constexpr double kMaxCondition = 1.0e12;

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

} // namespace

void validate(const GaussianPrimitive &g) {
    if (!g.position.allFinite()) {
        throw Error(ErrorKind::InvalidParameter, "gaussian position is not finite");
    }
    if (std::abs(g.rotation.norm() - 1.0) > 1e-9) {
        throw Error(ErrorKind::InvalidParameter, "gaussian rotation is not a unit quaternion");
    }
    if (!(g.scale.minCoeff() > 0.0) || !g.scale.allFinite()) {
        throw Error(ErrorKind::InvalidParameter, "gaussian scale must be positive");
    }
    if (!(g.opacity > 0.0 && g.opacity <= 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "gaussian opacity must lie in (0,1]");
    }
    if (!in_unit_interval(g.color.r) || !in_unit_interval(g.color.g) ||
        !in_unit_interval(g.color.b)) {
        throw Error(ErrorKind::InvalidParameter, "gaussian color must lie in [0,1]");
    }
}

Covariance3 covariance_from_rs(const Quat &rotation, const Vec3 &scale) {
    if (!(scale.minCoeff() > 0.0) || !scale.allFinite()) {
        throw Error(ErrorKind::InvalidParameter, "covariance scale must be positive");
    }
    const double cond = (scale.maxCoeff() / scale.minCoeff()) *
                        (scale.maxCoeff() / scale.minCoeff());
    if (cond > kMaxCondition) {
        std::ostringstream msg;
        msg << "covariance condition number " << cond << " exceeds " << kMaxCondition;
        throw Error(ErrorKind::SingularCovariance, msg.str());
    }
    const Mat3 rot = rotation.normalized().toRotationMatrix();
    const Vec3 var = scale.cwiseProduct(scale);
    Covariance3 cov;
    cov.matrix = rot * var.asDiagonal() * rot.transpose();
    cov.inverse = rot * var.cwiseInverse().asDiagonal() * rot.transpose();
    // Symmetrise away the last ulp of rounding.
    cov.matrix = 0.5 * (cov.matrix + cov.matrix.transpose()).eval();
    cov.inverse = 0.5 * (cov.inverse + cov.inverse.transpose()).eval();
    return cov;
}

PreparedGaussian prepare(const GaussianPrimitive &g) {
    validate(g);
    PreparedGaussian out;
    out.prim = g;
    out.cov = covariance_from_rs(g.rotation, g.scale);
    out.max_scale = g.scale.maxCoeff();
    return out;
}

double evaluate_3d(const PreparedGaussian &g, const Vec3 &x) {
    const Vec3 d = x - g.prim.position;
    return g.prim.opacity * std::exp(-0.5 * d.dot(g.cov.inverse * d));
}

Ray make_ray(const Vec3 &origin, const Vec3 &direction, double t_max) {
    const double n = direction.norm();
    if (!(n > 1e-12) || !std::isfinite(n)) {
        throw Error(ErrorKind::InvalidRay, "ray direction is degenerate");
    }
    if (!(t_max > 0.0)) {
        throw Error(ErrorKind::InvalidRay, "ray far bound must be positive");
    }
    return Ray{origin, direction / n, t_max};
}

RayKernel ray_gaussian_transform(const PreparedGaussian &g, const Ray &ray, std::size_t source) {
    const Vec3 &v = ray.direction;
    if (!(v.norm() > 1e-12)) {
        throw Error(ErrorKind::InvalidRay, "ray direction is degenerate");
    }
    const Vec3 p = g.prim.position - ray.origin;
    const Vec3 inv_v = g.cov.inverse * v;
    const double vv = v.dot(inv_v);
    const double pv = p.dot(inv_v);

    RayKernel kern;
    kern.t = pv / vv;
    kern.k = 0.5 * vv;
    const Vec3 r = v * kern.t - p;
    kern.g_max = std::exp(-0.5 * r.dot(g.cov.inverse * r));
    kern.alpha = g.prim.opacity * kern.g_max;
    kern.base_opacity = g.prim.opacity;
    kern.color = g.prim.color;
    kern.source = source;
    kern.behind = kern.t <= 0.0;
    return kern;
}

} // namespace gvkf
