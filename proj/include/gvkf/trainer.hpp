// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gvkf/image.hpp"
#include "gvkf/opacity_field.hpp"
#include "gvkf/renderer.hpp"
#include "gvkf/voxel_store.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace gvkf {

struct LossConfig {
    double lambda_dssim = 0.2;
    /// Weight of the depth distortion term; ray parameters are divided by the
    /// scene extent before the term is evaluated.
    double lambda_dist = 0.1;
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_k1 = 0.01;
    double ssim_k2 = 0.03;
};

void validate(const LossConfig &cfg);

/// Mean absolute per-channel difference. Throws ErrorKind::ShapeMismatch.
double loss_l1(const ImageBuffer &rendered, const ImageBuffer &target);

/// Mean SSIM over all full windows (no padding), averaged over channels,
/// dynamic range 1. Throws ErrorKind::ShapeMismatch when the shapes differ or
/// the image is smaller than the window.
double ssim(const ImageBuffer &a, const ImageBuffer &b, const LossConfig &cfg = {});

/// (1 - SSIM) / 2.
double loss_dssim(const ImageBuffer &rendered, const ImageBuffer &target,
                  const LossConfig &cfg = {});

/// sum_{i<j} w_i w_j |t_i - t_j| with the blending weights of render_depth.
double loss_depth_distortion(const RayField &field, double t_scale = 1.0);

struct TargetView {
    Camera camera;
    ImageBuffer image;
};

struct LossBreakdown {
    double total = 0.0;
    double l1 = 0.0;
    double dssim = 0.0;
    double distortion = 0.0; ///< mean over pixels
};

/// Loss of one rendered view against its target; `rendered.statistic` must
/// hold per-pixel distortion when cfg.lambda_dist > 0.
LossBreakdown view_loss(const RenderOutputs &rendered, const ImageBuffer &target,
                        const LossConfig &cfg);

/// Analytic gradient of loss_l1 with respect to each primitive's color:
/// (1 / 3P) sum_p sign(rendered - target) w_{g,p}, one triple per primitive.
std::vector<std::array<double, 3>> l1_color_gradient(std::span<const PreparedGaussian> gaussians,
                                                     const Camera &cam, const ImageBuffer &target,
                                                     const RenderOptions &opts);

enum class ParamGroup { Color, Opacity, Position, Scale, Feature, Offset };

struct StepSizes {
    double color = 0.05;
    double opacity = 0.05;
    double position = 0.01; ///< multiplied by the scene extent
    double scale = 0.005;   ///< multiplied by the scene extent
    double feature = 0.01;
    double offset = 0.02;
};

struct FitOptions {
    int iterations = 0;
    LossConfig loss{};
    StepSizes steps{};
    double fd_step = 1.0e-4;
    int evaluation_interval = kEvaluationInterval;
    unsigned threads = 1;
    Rgb background{};
    /// Called after every iteration with (iteration index, raw loss).
    std::function<void(int, double)> on_iteration;
};

struct FitResult {
    SparseVoxelGrid scene;
    std::vector<double> raw_history;
    /// Running minimum of raw_history (non-increasing).
    std::vector<double> history;
    std::size_t subdivided = 0;
    std::size_t pruned = 0;
};

/// Groups optimised in `mode`, in round-robin order.
std::vector<ParamGroup> parameter_groups(SceneMode mode);

/// Each iteration renders target (iteration mod views), takes central finite
/// differences over the parameters of group (iteration mod groups), applies
/// an Adam step, and registers positional gradient norms of visible
/// primitives with their voxels whenever the positional group is active.
/// evaluate_voxels runs every `evaluation_interval` iterations.
/// Throws ErrorKind::EmptyInput for no targets and ErrorKind::NumericFailure
/// on a NaN loss.
FitResult fit(const SparseVoxelGrid &scene, std::span<const TargetView> targets,
              const FitOptions &opts);

} // namespace gvkf
