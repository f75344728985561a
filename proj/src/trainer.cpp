// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/trainer.hpp"

#include "gvkf/error.hpp"
#include "gvkf/mesher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gvkf {

void validate(const LossConfig &cfg) {
    if (!(cfg.lambda_dssim >= 0.0 && cfg.lambda_dssim <= 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "lambda_dssim must lie in [0,1]");
    }
    if (!(cfg.lambda_dist >= 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "lambda_dist must be non-negative");
    }
    if (cfg.ssim_window < 1 || cfg.ssim_window % 2 == 0) {
        throw Error(ErrorKind::InvalidParameter, "ssim_window must be a positive odd size");
    }
    if (!(cfg.ssim_sigma > 0.0) || !(cfg.ssim_k1 > 0.0) || !(cfg.ssim_k2 > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "ssim sigma and constants must be positive");
    }
}

double loss_l1(const ImageBuffer &rendered, const ImageBuffer &target) {
    if (!rendered.same_shape(target)) {
        throw Error(ErrorKind::ShapeMismatch, "L1 loss needs images of the same shape");
    }
    if (rendered.size() == 0) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        sum += std::abs(rendered.data()[i] - target.data()[i]);
    }
    return sum / static_cast<double>(rendered.size());
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size));
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (double &v : w) {
        v /= sum;
    }
    return w;
}

// Separable filter over the valid region of one channel.
std::vector<double> filter_valid(const std::vector<double> &img, int w, int h,
                                 const std::vector<double> &k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1;
    const int oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                s += k[static_cast<std::size_t>(i)] *
                     img[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                         static_cast<std::size_t>(x + i)];
            }
            tmp[static_cast<std::size_t>(y) * static_cast<std::size_t>(ow) +
                static_cast<std::size_t>(x)] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                s += k[static_cast<std::size_t>(i)] *
                     tmp[static_cast<std::size_t>(y + i) * static_cast<std::size_t>(ow) +
                         static_cast<std::size_t>(x)];
            }
            out[static_cast<std::size_t>(y) * static_cast<std::size_t>(ow) +
                static_cast<std::size_t>(x)] = s;
        }
    }
    return out;
}

} // namespace

double ssim(const ImageBuffer &a, const ImageBuffer &b, const LossConfig &cfg) {
    validate(cfg);
    if (!a.same_shape(b)) {
        throw Error(ErrorKind::ShapeMismatch, "SSIM needs images of the same shape");
    }
    if (a.width() < cfg.ssim_window || a.height() < cfg.ssim_window) {
        throw Error(ErrorKind::ShapeMismatch, "image is smaller than the SSIM window");
    }
    const auto k = gaussian_window(cfg.ssim_window, cfg.ssim_sigma);
    const double c1 = (cfg.ssim_k1) * (cfg.ssim_k1);
    const double c2 = (cfg.ssim_k2) * (cfg.ssim_k2);
    const int w = a.width();
    const int h = a.height();
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < a.channels(); ++c) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (int py = 0; py < h; ++py) {
            for (int px = 0; px < w; ++px) {
                const std::size_t i = static_cast<std::size_t>(py) * static_cast<std::size_t>(w) +
                                      static_cast<std::size_t>(px);
                x[i] = a.at(px, py, c);
                y[i] = b.at(px, py, c);
                xx[i] = x[i] * x[i];
                yy[i] = y[i] * y[i];
                xy[i] = x[i] * y[i];
            }
        }
        const auto mx = filter_valid(x, w, h, k);
        const auto my = filter_valid(y, w, h, k);
        const auto sxx = filter_valid(xx, w, h, k);
        const auto syy = filter_valid(yy, w, h, k);
        const auto sxy = filter_valid(xy, w, h, k);
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                     ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return count > 0 ? total / static_cast<double>(count) : 1.0;
}

double loss_dssim(const ImageBuffer &rendered, const ImageBuffer &target, const LossConfig &cfg) {
    return 0.5 * (1.0 - ssim(rendered, target, cfg));
}

double loss_depth_distortion(const RayField &field, double t_scale) {
    if (field.size() < 2) {
        return 0.0;
    }
    const auto w = blend_weights(field);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        for (std::size_t j = i + 1; j < w.size(); ++j) {
            sum += w[i] * w[j] * std::abs(field.kernels[i].t - field.kernels[j].t);
        }
    }
    return sum / t_scale;
}

LossBreakdown view_loss(const RenderOutputs &rendered, const ImageBuffer &target,
                        const LossConfig &cfg) {
    LossBreakdown out;
    out.l1 = loss_l1(rendered.color, target);
    if (cfg.lambda_dssim > 0.0) {
        out.dssim = loss_dssim(rendered.color, target, cfg);
    }
    if (cfg.lambda_dist > 0.0 && rendered.statistic.size() > 0) {
        double sum = 0.0;
        for (double v : rendered.statistic.data()) {
            sum += v;
        }
        out.distortion = sum / static_cast<double>(rendered.statistic.size());
    }
    out.total = (1.0 - cfg.lambda_dssim) * out.l1 + cfg.lambda_dssim * out.dssim +
                cfg.lambda_dist * out.distortion;
    return out;
}

std::vector<std::array<double, 3>> l1_color_gradient(std::span<const PreparedGaussian> gaussians,
                                                     const Camera &cam, const ImageBuffer &target,
                                                     const RenderOptions &opts) {
    validate(cam);
    if (target.width() != cam.width || target.height() != cam.height || target.channels() != 3) {
        throw Error(ErrorKind::ShapeMismatch, "target does not match the camera resolution");
    }
    std::vector<std::array<double, 3>> grad(gaussians.size(), {0.0, 0.0, 0.0});
    const double norm = 1.0 / (3.0 * static_cast<double>(cam.width) * cam.height);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const RayField field = pixel_field(gaussians, cam, x, y, opts);
            const RayColor c = render_ray(field, opts.termination_threshold);
            std::array<double, 3> sign{};
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double r = c.color[ch] - target.at(x, y, static_cast<int>(ch));
                sign[ch] = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
            }
            double trans = 1.0;
            for (const auto &kern : field.kernels) {
                if (trans < opts.termination_threshold) {
                    break;
                }
                const double w = kern.alpha * trans;
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    grad[kern.source][ch] += norm * sign[ch] * w;
                }
                trans *= 1.0 - kern.alpha;
            }
        }
    }
    return grad;
}

std::vector<ParamGroup> parameter_groups(SceneMode mode) {
    if (mode == SceneMode::Direct) {
        return {ParamGroup::Color, ParamGroup::Opacity, ParamGroup::Position, ParamGroup::Scale};
    }
    return {ParamGroup::Feature, ParamGroup::Offset};
}

namespace {

std::vector<double> get_params(const SparseVoxelGrid &s, ParamGroup group) {
    std::vector<double> p;
    switch (group) {
    case ParamGroup::Color:
        for (const auto &g : s.gaussians) {
            p.insert(p.end(), {g.color.r, g.color.g, g.color.b});
        }
        break;
    case ParamGroup::Opacity:
        for (const auto &g : s.gaussians) {
            p.push_back(g.opacity);
        }
        break;
    case ParamGroup::Position:
        for (const auto &g : s.gaussians) {
            p.insert(p.end(), {g.position.x(), g.position.y(), g.position.z()});
        }
        break;
    case ParamGroup::Scale:
        for (const auto &g : s.gaussians) {
            p.insert(p.end(), {g.scale.x(), g.scale.y(), g.scale.z()});
        }
        break;
    case ParamGroup::Feature:
        for (const auto &[key, vox] : s.voxels) {
            p.insert(p.end(), vox.feature.begin(), vox.feature.end());
        }
        break;
    case ParamGroup::Offset:
        for (const auto &[key, vox] : s.voxels) {
            for (const auto &o : vox.offsets) {
                p.insert(p.end(), {o.x(), o.y(), o.z()});
            }
        }
        break;
    }
    return p;
}

struct Limits {
    double lo;
    double hi;
};

Limits limits_for(ParamGroup group, double extent) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (group) {
    case ParamGroup::Color:
        return {0.0, 1.0};
    case ParamGroup::Opacity:
        return {1.0e-4, 1.0};
    case ParamGroup::Scale:
        return {1.0e-6 * extent, inf};
    case ParamGroup::Offset:
        return {-0.5, 0.5};
    default:
        return {-inf, inf};
    }
}

void set_params(SparseVoxelGrid &s, ParamGroup group, const std::vector<double> &p) {
    std::size_t i = 0;
    switch (group) {
    case ParamGroup::Color:
        for (auto &g : s.gaussians) {
            g.color = Rgb{p[i], p[i + 1], p[i + 2]};
            i += 3;
        }
        break;
    case ParamGroup::Opacity:
        for (auto &g : s.gaussians) {
            g.opacity = p[i++];
        }
        break;
    case ParamGroup::Position:
        for (auto &g : s.gaussians) {
            g.position = Vec3(p[i], p[i + 1], p[i + 2]);
            i += 3;
        }
        break;
    case ParamGroup::Scale:
        for (auto &g : s.gaussians) {
            g.scale = Vec3(p[i], p[i + 1], p[i + 2]);
            i += 3;
        }
        break;
    case ParamGroup::Feature:
        for (auto &[key, vox] : s.voxels) {
            for (double &f : vox.feature) {
                f = p[i++];
            }
        }
        break;
    case ParamGroup::Offset:
        for (auto &[key, vox] : s.voxels) {
            for (auto &o : vox.offsets) {
                o = Vec3(p[i], p[i + 1], p[i + 2]);
                i += 3;
            }
        }
        break;
    }
}

double step_for(ParamGroup group, const StepSizes &steps, double extent) {
    switch (group) {
    case ParamGroup::Color:
        return steps.color;
    case ParamGroup::Opacity:
        return steps.opacity;
    case ParamGroup::Position:
        return steps.position * extent;
    case ParamGroup::Scale:
        return steps.scale * extent;
    case ParamGroup::Feature:
        return steps.feature;
    case ParamGroup::Offset:
        return steps.offset;
    }
    return 0.0;
}

struct Evaluation {
    double loss = 0.0;
    GeneratedGaussians generated;
    std::vector<bool> visible;
};

class Objective {
  public:
    Objective(const FitOptions &opts, double extent) : opts_(opts) {
        render_.background = opts.background;
        render_.threads = opts.threads;
        if (opts.loss.lambda_dist > 0.0) {
            render_.ray_statistic = [extent](const RayField &f) {
                return loss_depth_distortion(f, extent);
            };
        }
    }

    Evaluation evaluate(const SparseVoxelGrid &scene, const TargetView &view) const {
        Evaluation e;
        e.generated = generate_gaussians(scene, view.camera.position);
        const auto prepared = prepare_all(e.generated.gaussians);
        RenderOutputs out = render_gaussians(prepared, view.camera, render_);
        e.loss = view_loss(out, view.image, opts_.loss).total;
        e.visible = std::move(out.visible);
        return e;
    }

    double loss(const SparseVoxelGrid &scene, const TargetView &view) const {
        return evaluate(scene, view).loss;
    }

  private:
    const FitOptions &opts_;
    RenderOptions render_;
};

double scene_extent(const SparseVoxelGrid &scene, const TargetView &view) {
    const auto gen = generate_gaussians(scene, view.camera.position);
    const auto prepared = prepare_all(gen.gaussians);
    if (prepared.empty()) {
        return 1.0;
    }
    const Aabb box = scene_bounds(prepared, 3.0, 0.0);
    const double e = (box.hi - box.lo).maxCoeff();
    return e > 0.0 ? e : 1.0;
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long t = 0;
};

[[noreturn]] void nan_failure(int iteration) {
    throw Error(ErrorKind::NumericFailure, "NaN loss at iteration " + std::to_string(iteration));
}

} // namespace

FitResult fit(const SparseVoxelGrid &scene, std::span<const TargetView> targets,
              const FitOptions &opts) {
    validate(opts.loss);
    if (opts.iterations < 0) {
        throw Error(ErrorKind::InvalidParameter, "iteration count must be non-negative");
    }
    if (!(opts.fd_step > 0.0) || opts.evaluation_interval <= 0) {
        throw Error(ErrorKind::InvalidParameter, "fd_step and evaluation_interval must be positive");
    }
    FitResult result;
    result.scene = scene;
    if (opts.iterations == 0) {
        return result;
    }
    if (targets.empty()) {
        throw Error(ErrorKind::EmptyInput, "fitting needs at least one target view");
    }
    for (const auto &t : targets) {
        validate(t.camera);
        if (t.image.width() != t.camera.width || t.image.height() != t.camera.height ||
            t.image.channels() != 3) {
            throw Error(ErrorKind::ShapeMismatch, "target image does not match its camera");
        }
    }

    SparseVoxelGrid &s = result.scene;
    const double extent = scene_extent(s, targets[0]);
    const Objective objective(opts, extent);
    const auto groups = parameter_groups(s.mode);
    std::vector<AdamState> adam(groups.size());
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1.0e-8;

    for (int it = 0; it < opts.iterations; ++it) {
        const TargetView &view = targets[static_cast<std::size_t>(it) % targets.size()];
        const std::size_t gi = static_cast<std::size_t>(it) % groups.size();
        const ParamGroup group = groups[gi];

        const Evaluation base = objective.evaluate(s, view);
        if (std::isnan(base.loss)) {
            nan_failure(it);
        }
        result.raw_history.push_back(base.loss);
        result.history.push_back(result.history.empty()
                                     ? base.loss
                                     : std::min(result.history.back(), base.loss));

        std::vector<double> params = get_params(s, group);
        std::vector<double> grad(params.size(), 0.0);
        const Limits lim = limits_for(group, extent);
        for (std::size_t p = 0; p < params.size(); ++p) {
            const double orig = params[p];
            const double hi = std::min(orig + opts.fd_step, lim.hi);
            const double lo = std::max(orig - opts.fd_step, lim.lo);
            if (!(hi > lo)) {
                continue;
            }
            params[p] = hi;
            set_params(s, group, params);
            const double fp = objective.loss(s, view);
            params[p] = lo;
            set_params(s, group, params);
            const double fm = objective.loss(s, view);
            params[p] = orig;
            if (std::isnan(fp) || std::isnan(fm)) {
                set_params(s, group, params);
                nan_failure(it);
            }
            grad[p] = (fp - fm) / (hi - lo);
        }

        // Positional gradient norms of visible primitives go to their voxels.
        std::vector<std::pair<VoxelKey, double>> norms;
        if (group == ParamGroup::Position) {
            for (std::size_t g = 0; g < s.gaussians.size(); ++g) {
                if (g < base.visible.size() && base.visible[g]) {
                    const double n = std::sqrt(grad[3 * g] * grad[3 * g] +
                                               grad[3 * g + 1] * grad[3 * g + 1] +
                                               grad[3 * g + 2] * grad[3 * g + 2]);
                    norms.emplace_back(base.generated.owners[g], n);
                }
            }
        } else if (group == ParamGroup::Offset) {
            std::vector<VoxelKey> seen;
            for (std::size_t g = 0; g < base.visible.size(); ++g) {
                if (base.visible[g]) {
                    seen.push_back(base.generated.owners[g]);
                }
            }
            std::sort(seen.begin(), seen.end());
            std::size_t off = 0;
            for (const auto &[key, vox] : s.voxels) {
                const double edge = s.edge_length(vox.depth);
                const bool used = std::binary_search(seen.begin(), seen.end(), key);
                for (std::size_t j = 0; j < vox.offsets.size(); ++j, off += 3) {
                    if (used) {
                        const double n = std::sqrt(grad[off] * grad[off] +
                                                   grad[off + 1] * grad[off + 1] +
                                                   grad[off + 2] * grad[off + 2]) /
                                         edge;
                        norms.emplace_back(key, n);
                    }
                }
            }
        }

        AdamState &st = adam[gi];
        if (st.m.size() != params.size()) {
            st = AdamState{std::vector<double>(params.size(), 0.0),
                           std::vector<double>(params.size(), 0.0), 0};
        }
        st.t += 1;
        const double lr = step_for(group, opts.steps, extent);
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.t));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.t));
        for (std::size_t p = 0; p < params.size(); ++p) {
            st.m[p] = kBeta1 * st.m[p] + (1.0 - kBeta1) * grad[p];
            st.v[p] = kBeta2 * st.v[p] + (1.0 - kBeta2) * grad[p] * grad[p];
            const double mh = st.m[p] / c1;
            const double vh = st.v[p] / c2;
            params[p] = std::clamp(params[p] - lr * mh / (std::sqrt(vh) + kEps), lim.lo, lim.hi);
        }
        set_params(s, group, params);

        if (!norms.empty()) {
            register_gradients(s, norms);
        }
        if ((it + 1) % opts.evaluation_interval == 0) {
            const EvaluationReport rep = evaluate_voxels(s);
            result.subdivided += rep.subdivided;
            result.pruned += rep.pruned;
            if (rep.subdivided > 0 || rep.pruned > 0) {
                for (auto &a : adam) {
                    a = AdamState{};
                }
            }
        }
        if (opts.on_iteration) {
            opts.on_iteration(it, base.loss);
        }
    }
    return result;
}

} // namespace gvkf
