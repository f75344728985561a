// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/verify.hpp"

#include "gvkf/error.hpp"
#include "gvkf/mesh_io.hpp"
#include "gvkf/mesher.hpp"
#include "gvkf/opacity_field.hpp"
#include "gvkf/renderer.hpp"
#include "gvkf/scenes.hpp"
#include "gvkf/surface_mapping.hpp"
#include "gvkf/trainer.hpp"
#include "gvkf/volume_oracle.hpp"
#include "gvkf/voxel_store.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>

namespace gvkf {

namespace {

using Rng = std::mt19937_64;

double uni(Rng &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

GaussianPrimitive random_gaussian(Rng &rng) {
    GaussianPrimitive g;
    g.position = Vec3(uni(rng, -2, 2), uni(rng, -2, 2), uni(rng, 3, 7));
    g.rotation = Quat(uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1));
    g.rotation.normalize();
    g.scale = Vec3(uni(rng, 0.05, 1.0), uni(rng, 0.05, 1.0), uni(rng, 0.05, 1.0));
    g.opacity = uni(rng, 0.05, 1.0);
    g.color = Rgb{uni(rng, 0, 1), uni(rng, 0, 1), uni(rng, 0, 1)};
    return g;
}

RayField random_field(Rng &rng, int max_kernels) {
    std::vector<RayKernel> ks(std::uniform_int_distribution<int>(1, max_kernels)(rng));
    for (std::size_t i = 0; i < ks.size(); ++i) {
        ks[i].t = uni(rng, 0.5, 9.0);
        ks[i].k = uni(rng, 0.5, 50.0);
        ks[i].alpha = uni(rng, 0.0, 0.99);
        ks[i].g_max = 1.0;
        ks[i].base_opacity = ks[i].alpha;
        ks[i].color = Rgb{uni(rng, 0, 1), uni(rng, 0, 1), uni(rng, 0, 1)};
        ks[i].source = i;
    }
    return make_field(std::move(ks), Rgb{0.1, 0.2, 0.3}, 10.0);
}

double golden_max(const std::function<double(double)> &f, double a, double b) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > 1e-9) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

struct Check {
    bool ok = true;
    std::ostringstream detail;
};

using Property = std::function<void(Check &, Rng &)>;

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << std::scientific << v;
    return s.str();
}

} // namespace

std::vector<PropertyResult> run_verification(const VerifyOptions &opts) {
    std::vector<std::pair<std::string, Property>> props;

    props.emplace_back("covariance_spd", [](Check &c, Rng &rng) {
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            const auto g = random_gaussian(rng);
            const auto cov = covariance_from_rs(g.rotation, g.scale);
            Eigen::SelfAdjointEigenSolver<Mat3> es(cov.matrix);
            const Vec3 expect = g.scale.cwiseProduct(g.scale);
            Vec3 sorted = expect;
            std::sort(sorted.data(), sorted.data() + 3);
            worst = std::max(worst, (es.eigenvalues() - sorted).cwiseAbs().maxCoeff());
            worst = std::max(worst, (cov.matrix * cov.inverse - Mat3::Identity()).cwiseAbs().maxCoeff() * 1e-3);
        }
        c.ok = worst <= 1e-9;
        c.detail << "max eigenvalue error " << fmt(worst);
    });

    props.emplace_back("ray_gaussian_peak", [](Check &c, Rng &rng) {
        double worst_t = 0.0;
        double worst_g = 0.0;
        for (int i = 0; i < 200; ++i) {
            const auto pg = prepare(random_gaussian(rng));
            const Ray ray = make_ray(Vec3(uni(rng, -1, 1), uni(rng, -1, 1), 0.0),
                                     Vec3(uni(rng, -0.3, 0.3), uni(rng, -0.3, 0.3), 1.0), 100.0);
            const auto kern = ray_gaussian_transform(pg, ray, 0);
            // Independent quadratic form from an explicitly inverted covariance.
            const Mat3 r = pg.prim.rotation.toRotationMatrix();
            const Vec3 s2 = pg.prim.scale.cwiseProduct(pg.prim.scale);
            const Mat3 inv = (r * s2.asDiagonal() * r.transpose()).inverse();
            auto q = [&](double t) {
                const Vec3 d = ray.origin + t * ray.direction - pg.prim.position;
                return -d.dot(inv * d);
            };
            const double t_num = golden_max(q, -50.0, 50.0);
            worst_t = std::max(worst_t, std::abs(t_num - kern.t));
            worst_g = std::max(worst_g, std::abs(kern.g_max - std::exp(0.5 * q(kern.t))));
        }
        c.ok = worst_t <= 1e-4 && worst_g <= 1e-12;
        c.detail << "t error " << fmt(worst_t) << ", g_max error " << fmt(worst_g);
    });

    props.emplace_back("sum_product_identity", [&opts](Check &c, Rng &rng) {
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            const RayField f = random_field(rng, 50);
            for (int s = 0; s < 20; ++s) {
                const double t = uni(rng, 0.0, 10.0);
                const double ref = cdf_phi_product(f, t) + (opts.negate ? 1e-3 : 0.0);
                worst = std::max(worst, std::abs(cdf_phi(f, t) - ref));
            }
        }
        c.ok = worst <= 1e-12;
        c.detail << "max gap " << fmt(worst);
    });

    props.emplace_back("phi_monotone_bounded", [](Check &c, Rng &rng) {
        int violations = 0;
        for (int i = 0; i < 100; ++i) {
            const RayField f = random_field(rng, 50);
            const double limit = cdf_phi_limit(f);
            double prev = -1.0;
            for (int s = 0; s < 256; ++s) {
                const double phi = cdf_phi(f, 10.0 * s / 255.0);
                if (phi < prev - 1e-15 || phi < -1e-12 || phi > limit + 1e-12) {
                    ++violations;
                }
                prev = phi;
            }
        }
        c.ok = violations == 0;
        c.detail << violations << " violations";
    });

    props.emplace_back("render_opacity_matches_phi", [](Check &c, Rng &rng) {
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            const RayField f = random_field(rng, 20);
            worst = std::max(worst, std::abs(render_ray(f, 0.0).opacity - cdf_phi_limit(f)));
        }
        c.ok = worst <= 1e-12;
        c.detail << "max gap " << fmt(worst);
    });

    props.emplace_back("small_opacity_volume_agreement", [](Check &c, Rng &rng) {
        int failures = 0;
        for (int i = 0; i < 20; ++i) {
            std::vector<RayKernel> ks(5);
            for (auto &k : ks) {
                k.t = uni(rng, 2.0, 8.0);
                k.k = uni(rng, 2.0, 40.0);
                k.alpha = uni(rng, 0.0, 0.04);
                k.g_max = 1.0;
            }
            const RayField f = make_field(ks, {}, 12.0);
            double sum = 0.0;
            for (const auto &k : f.kernels) {
                sum += k.alpha;
            }
            QuadratureConfig q{1e-3, 12.0, QuadratureScheme::Midpoint};
            const Medium m = medium_from_field(f, KernelProfile::NormalizedGaussian);
            const double gap = std::abs(cdf_phi_limit(f) - cdf_exact(m, 12.0, q));
            if (gap > sum * sum + 1e-4) {
                ++failures;
            }
        }
        c.ok = failures == 0;
        c.detail << failures << " fields outside (sum alpha)^2";
    });

    props.emplace_back("u0_root_residual", [](Check &c, Rng &) {
        double worst = 0.0;
        bool negative = true;
        for (int i = 0; i < 50; ++i) {
            const double s2 = std::pow(10.0, -4.0 + 5.0 * i / 49.0);
            const double u0 = solve_u0(s2);
            worst = std::max(worst, std::abs(u0_residual(u0, s2)));
            negative = negative && u0 < 0.0;
        }
        c.ok = worst <= 1e-10 && negative;
        c.detail << "max residual " << fmt(worst) << (negative ? "" : ", non-negative root");
    });

    props.emplace_back("u0_unit_variance", [](Check &c, Rng &) {
        const double u0 = solve_u0(1.0);
        c.ok = std::abs(u0 + 0.373) <= 1e-3;
        c.detail << "u0(1) = " << u0;
    });

    props.emplace_back("h_single_sign_change", [](Check &c, Rng &) {
        int bad = 0;
        for (double s2 : {1e-4, 1e-2, 1.0, 10.0}) {
            const double s = std::sqrt(s2);
            std::vector<double> grid;
            for (int i = 0; i <= 4000; ++i) {
                grid.push_back(-8.0 * s + 16.0 * s * i / 4000.0);
            }
            const auto d = h_diagnostic(s2, grid);
            std::size_t arg = 0;
            for (std::size_t i = 0; i < d.phi_prime.size(); ++i) {
                if (d.phi_prime[i] > d.phi_prime[arg]) {
                    arg = i;
                }
            }
            if (d.sign_changes != 1 || !(d.u[arg] < 0.0)) {
                ++bad;
            }
        }
        c.ok = bad == 0;
        c.detail << bad << " variances failing";
    });

    props.emplace_back("sdf_iso_identities", [](Check &c, Rng &) {
        double worst = 0.0;
        for (double mu : {2.0, 8.0, 32.0}) {
            const double u0 = solve_u0(0.05);
            worst = std::max(worst, std::abs(sdf_from_cdf(surface_phi(mu, u0), mu, u0).distance));
            worst = std::max(worst, std::abs(sdf_from_cdf(0.5, mu, u0).distance + u0));
            for (double u : {-0.3, -0.01, 0.0, 0.2}) {
                const double phi = logistic_cdf(u, mu, u0);
                const double d = sdf_from_cdf(phi, mu, u0).distance;
                worst = std::max(worst, std::abs(d + u));
                worst = std::max(worst, std::abs(logistic_cdf(-d, mu, u0) - phi));
            }
        }
        c.ok = worst <= 1e-9;
        c.detail << "max error " << fmt(worst);
    });

    props.emplace_back("voxel_subdivision_octants", [](Check &c, Rng &) {
        std::vector<Vec3> pts{Vec3(0.05, 0.05, 0.05)};
        auto grid = init_from_points(pts, 0.1);
        const VoxelKey key = grid.voxels.begin()->first;
        std::vector<std::pair<VoxelKey, double>> norms{{key, 1e-3}};
        register_gradients(grid, norms);
        const auto rep = evaluate_voxels(grid);
        double half_sum = 0.0;
        int max_depth = 0;
        for (const auto &[k, v] : grid.voxels) {
            half_sum += std::pow(grid.edge_length(k.depth), 3);
            max_depth = std::max(max_depth, k.depth);
        }
        c.ok = rep.subdivided == 1 && grid.voxels.size() == 8 &&
               std::abs(half_sum - 1e-3) <= 1e-15 && max_depth == 1;
        c.detail << grid.voxels.size() << " children";
    });

    props.emplace_back("voxel_pruning", [](Check &c, Rng &) {
        std::vector<Vec3> pts;
        for (int i = 0; i < 10; ++i) {
            pts.emplace_back(0.1 * i + 0.05, 0.05, 0.05);
        }
        auto grid = init_from_points(pts, 0.1);
        std::vector<std::pair<VoxelKey, double>> norms;
        int i = 0;
        for (const auto &[k, v] : grid.voxels) {
            if (i++ % 2 == 0) {
                norms.emplace_back(k, 0.0);
            }
        }
        register_gradients(grid, norms);
        const auto rep = evaluate_voxels(grid);
        c.ok = rep.pruned == 5 && grid.voxels.size() == 5;
        c.detail << rep.pruned << " pruned of 10";
    });

    props.emplace_back("marching_cubes_manifold", [](Check &c, Rng &) {
        const auto grid = sample_function(Vec3::Constant(-1.3), 2.6 / 31.0, {32, 32, 32},
                                          [](const Vec3 &p) { return p.norm() - 1.0; });
        const auto mesh = marching_cubes(grid);
        std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
        for (const auto &f : mesh.faces) {
            for (int k = 0; k < 3; ++k) {
                const auto a = f[k];
                const auto b = f[(k + 1) % 3];
                ++edges[{std::min(a, b), std::max(a, b)}];
            }
        }
        int bad = 0;
        for (const auto &[e, n] : edges) {
            bad += n != 2;
        }
        double worst = 0.0;
        for (const auto &v : mesh.vertices) {
            worst = std::max(worst, std::abs(v.norm() - 1.0));
        }
        c.ok = !mesh.faces.empty() && bad == 0 && worst <= std::sqrt(3.0) * grid.spacing;
        c.detail << mesh.faces.size() << " faces, " << bad << " non-manifold edges";
    });

    props.emplace_back("mesh_export_round_trip", [](Check &c, Rng &) {
        const auto grid = sample_function(Vec3::Constant(-1.3), 2.6 / 15.0, {16, 16, 16},
                                          [](const Vec3 &p) { return p.norm() - 1.0; });
        const auto mesh = marching_cubes(grid);
        const auto dir = std::filesystem::temp_directory_path();
        int bad = 0;
        for (MeshFormat fmt_ : {MeshFormat::PlyAscii, MeshFormat::PlyBinaryLe, MeshFormat::Obj}) {
            const auto path = dir / ("gvkf_verify_" + std::string(to_string(fmt_)) + ".mesh");
            export_mesh(mesh, path, fmt_);
            const auto back = import_mesh(path);
            std::filesystem::remove(path);
            bool same = back.vertices.size() == mesh.vertices.size() && back.faces == mesh.faces;
            for (std::size_t i = 0; same && i < mesh.vertices.size(); ++i) {
                same = back.vertices[i] == mesh.vertices[i].cast<float>().cast<double>();
            }
            bad += !same;
        }
        c.ok = bad == 0;
        c.detail << bad << " formats differ";
    });

    props.emplace_back("ssim_constant_closed_form", [](Check &c, Rng &) {
        const ImageBuffer a(16, 16, 3, 0.25);
        const ImageBuffer b(16, 16, 3, 0.75);
        const double c1 = 0.01 * 0.01;
        const double expect = (2 * 0.25 * 0.75 + c1) / (0.25 * 0.25 + 0.75 * 0.75 + c1);
        const double gap = std::abs(ssim(a, b) - expect);
        c.ok = gap <= 1e-12 && std::abs(loss_dssim(a, b) - loss_dssim(b, a)) <= 1e-12;
        c.detail << "gap " << fmt(gap);
    });

    props.emplace_back("depth_distortion_arithmetic", [](Check &c, Rng &) {
        std::vector<RayKernel> ks(2);
        ks[0].t = 2.0;
        ks[0].alpha = 0.5;
        ks[1].t = 6.0;
        ks[1].alpha = 0.5;
        const double v = loss_depth_distortion(make_field(ks));
        c.ok = std::abs(v - 0.5) <= 1e-12;
        c.detail << "value " << v;
    });

    props.emplace_back("render_thread_determinism", [&opts](Check &c, Rng &) {
        SphereSceneOptions so;
        so.count = 300;
        so.scale = 0.06;
        const auto prepared = prepare_all(sphere_scene(so));
        const Camera cam = default_camera(24, 24);
        RenderOptions one;
        RenderOptions many;
        many.threads = std::max(4u, opts.threads);
        const auto a = render_gaussians(prepared, cam, one);
        const auto b = render_gaussians(prepared, cam, many);
        c.ok = a.color.data() == b.color.data() && a.normal.data() == b.normal.data();
        c.detail << (c.ok ? "identical" : "buffers differ");
    });

    props.emplace_back("l1_color_gradient_fd", [](Check &c, Rng &) {
        GaussianPrimitive g;
        g.position = Vec3(0, 0, 0);
        g.scale = Vec3::Constant(0.4);
        g.opacity = 0.8;
        g.color = Rgb{0.3, 0.6, 0.2};
        std::vector<GaussianPrimitive> gs{g};
        const Camera cam = default_camera(16, 16);
        const ImageBuffer target(16, 16, 3, 0.5);
        RenderOptions ro;
        const auto analytic = l1_color_gradient(prepare_all(gs), cam, target, ro);
        double worst = 0.0;
        for (std::size_t ch = 0; ch < 3; ++ch) {
            auto loss_at = [&](double v) {
                auto h = gs;
                h[0].color[ch] = v;
                return loss_l1(render_gaussians(prepare_all(h), cam, ro).color, target);
            };
            const double fd = (loss_at(g.color[ch] + 1e-4) - loss_at(g.color[ch] - 1e-4)) / 2e-4;
            worst = std::max(worst, std::abs(fd - analytic[0][ch]) / std::abs(analytic[0][ch]));
        }
        c.ok = worst <= 0.05;
        c.detail << "max relative error " << fmt(worst);
    });

    std::vector<PropertyResult> results;
    for (std::size_t i = 0; i < props.size(); ++i) {
        Rng rng(opts.seed + i);
        Check c;
        try {
            props[i].second(c, rng);
        } catch (const std::exception &e) {
            c.ok = false;
            c.detail << "threw: " << e.what();
        }
        results.push_back({props[i].first, c.ok, c.detail.str()});
    }
    return results;
}

} // namespace gvkf
