// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/cli.hpp"

#include "gvkf/error.hpp"
#include "gvkf/mesh_io.hpp"
#include "gvkf/mesher.hpp"
#include "gvkf/renderer.hpp"
#include "gvkf/scene_io.hpp"
#include "gvkf/scenes.hpp"
#include "gvkf/trainer.hpp"
#include "gvkf/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace gvkf {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::uint64_t effective_seed(std::uint64_t flag_seed) {
    if (const char *env = std::getenv("GVKF_SEED")) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(env, &used);
            if (used == std::string(env).size()) {
                return v;
            }
        } catch (const std::exception &) {
        }
        throw UsageError("GVKF_SEED must be a non-negative integer");
    }
    return flag_seed;
}

Rgb parse_rgb(const std::string &text) {
    std::stringstream ss(text);
    std::string part;
    std::vector<double> v;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(part, &used));
            if (used != part.size()) {
                throw UsageError("");
            }
        } catch (const std::exception &) {
            throw UsageError("--bg expects r,g,b with numbers in [0,1]");
        }
    }
    if (v.size() != 3 || std::any_of(v.begin(), v.end(), [](double x) { return !(x >= 0 && x <= 1); })) {
        throw UsageError("--bg expects r,g,b with numbers in [0,1]");
    }
    return Rgb{v[0], v[1], v[2]};
}

std::vector<PreparedGaussian> scene_primitives(const SparseVoxelGrid &scene,
                                               std::optional<Vec3> viewpoint) {
    if (scene.mode == SceneMode::Neural && !viewpoint) {
        // Decode from a point above the voxel centroid.
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 hi = -lo;
        for (const auto &[key, vox] : scene.voxels) {
            lo = lo.cwiseMin(vox.center);
            hi = hi.cwiseMax(vox.center);
        }
        viewpoint = scene.voxels.empty()
                        ? Vec3(0, 0, 1)
                        : Vec3(0.5 * (lo + hi) +
                               Vec3(0, 0, 3.0 * std::max(scene.base_voxel_size, (hi - lo).norm())));
    }
    return prepare_all(generate_gaussians(scene, viewpoint).gaussians);
}

struct RenderArgs {
    std::string scene;
    std::string camera;
    std::string out;
    std::string depth;
    std::string normal;
    std::string bg = "0,0,0";
};

struct MeshArgs {
    std::string scene;
    std::string out;
    std::string camera;
    int resolution = 64;
    double mu = 8.0;
    double iso = 0.0;
    std::string sigma_mode = "per-ray";
    std::string format = "ply_binary_le";
    std::string aggregation = "max6";
};

struct FitArgs {
    std::string scene;
    std::string targets;
    std::string out;
    int iters = 0;
    double lambda_dssim = 0.2;
    double lambda_dist = 0.1;
    std::string bg = "0,0,0";
};

struct SceneArgs {
    std::string kind = "sphere";
    std::string out;
    std::string camera_out;
    std::string mode = "direct";
    std::size_t count = 2000;
    double scale = 0.02;
    double opacity = 0.95;
    double voxel_size = 0.1;
    int width = 64;
    int height = 64;
};

int do_render(const RenderArgs &a, unsigned threads, std::uint64_t seed, std::ostream &out) {
    const SparseVoxelGrid scene = load_scene(a.scene, seed);
    const Camera cam = load_camera(a.camera);
    RenderOptions ro;
    ro.background = parse_rgb(a.bg);
    ro.threads = threads;
    const RenderOutputs r = render_image(scene, cam, ro);
    write_ppm(r.color, a.out);
    if (!a.depth.empty()) {
        write_pfm(r.depth, a.depth);
    }
    if (!a.normal.empty()) {
        write_ppm(r.normal, a.normal);
    }
    out << "wrote " << a.out << " (" << cam.width << "x" << cam.height << ")\n";
    return kExitOk;
}

int do_mesh(const MeshArgs &a, unsigned threads, std::uint64_t seed, std::ostream &out) {
    const SparseVoxelGrid scene = load_scene(a.scene, seed);
    std::optional<Vec3> viewpoint;
    if (!a.camera.empty()) {
        viewpoint = load_camera(a.camera).position;
    }
    const auto prepared = scene_primitives(scene, viewpoint);
    SdfSamplingOptions so;
    so.resolution = a.resolution;
    so.mu = a.mu;
    so.threads = threads;
    if (a.sigma_mode == "per-ray") {
        so.sigma_mode = SigmaMode::PerRay;
    } else if (a.sigma_mode == "global") {
        so.sigma_mode = SigmaMode::Global;
    } else {
        throw UsageError("--sigma-mode must be per-ray or global");
    }
    static const std::map<std::string, ProbeAggregation> kAgg{
        {"max6", ProbeAggregation::MaxOverSix},
        {"vote6", ProbeAggregation::VoteOverSix},
        {"minabs3", ProbeAggregation::MinAbsOverThree}};
    auto agg = kAgg.find(a.aggregation);
    if (agg == kAgg.end()) {
        throw UsageError("--aggregation must be max6, vote6 or minabs3");
    }
    so.aggregation = agg->second;
    const auto format = parse_mesh_format(a.format);
    if (!format) {
        throw UsageError("--format must be ply_ascii, ply_binary_le or obj");
    }
    const ScalarGrid grid = sample_sdf_grid(prepared, scene_bounds(prepared), so);
    const TriangleMesh mesh = marching_cubes(grid, a.iso);
    export_mesh(mesh, a.out, *format);
    out << "wrote " << a.out << ": " << mesh.vertices.size() << " vertices, " << mesh.faces.size()
        << " faces\n";
    return kExitOk;
}

std::vector<TargetView> load_targets(const fs::path &dir) {
    if (!fs::is_directory(dir)) {
        throw UsageError("--targets is not a directory: " + dir.string());
    }
    std::map<std::string, std::set<std::string>> views;
    for (const auto &entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const std::string ext = entry.path().extension().string();
        const std::string stem = entry.path().stem().string();
        if (stem.rfind("view_", 0) == 0 && (ext == ".json" || ext == ".ppm")) {
            views[stem].insert(ext);
        }
    }
    std::vector<std::string> orphans;
    for (const auto &[stem, exts] : views) {
        if (exts.size() != 2) {
            orphans.push_back(stem + *exts.begin());
        }
    }
    if (!orphans.empty()) {
        std::string list;
        for (const auto &o : orphans) {
            list += (list.empty() ? "" : ", ") + o;
        }
        throw UsageError("unpaired target files: " + list);
    }
    if (views.empty()) {
        throw UsageError("no view_NNNN.{json,ppm} pairs in " + dir.string());
    }
    std::vector<TargetView> out;
    for (const auto &[stem, exts] : views) {
        TargetView v;
        v.camera = load_camera(dir / (stem + ".json"));
        v.image = read_ppm(dir / (stem + ".ppm"));
        if (v.image.width() != v.camera.width || v.image.height() != v.camera.height) {
            throw UsageError(stem + ": image size does not match the camera");
        }
        out.push_back(std::move(v));
    }
    return out;
}

int do_fit(const FitArgs &a, unsigned threads, std::uint64_t seed, std::ostream &out) {
    const SparseVoxelGrid scene = load_scene(a.scene, seed);
    FitOptions fo;
    fo.iterations = a.iters;
    fo.threads = threads;
    fo.background = parse_rgb(a.bg);
    fo.loss.lambda_dssim = a.lambda_dssim;
    fo.loss.lambda_dist = a.lambda_dist;
    std::vector<TargetView> targets;
    if (a.iters > 0) {
        targets = load_targets(a.targets);
    }
    fo.on_iteration = [&out](int it, double loss) {
        if (it == 0 || (it + 1) % 100 == 0) {
            out << "iter " << std::setw(6) << (it == 0 ? 0 : it + 1) << "  loss " << std::setprecision(6)
                << loss << "\n";
        }
    };
    const FitResult r = fit(scene, targets, fo);
    save_scene(r.scene, a.out);
    if (!r.raw_history.empty()) {
        out << "initial loss " << r.raw_history.front() << ", best loss " << r.history.back()
            << ", voxels subdivided " << r.subdivided << ", pruned " << r.pruned << "\n";
    }
    out << "wrote " << a.out << "\n";
    return kExitOk;
}

int do_verify(bool negate, unsigned threads, std::uint64_t seed, std::ostream &out) {
    VerifyOptions vo;
    vo.seed = seed;
    vo.threads = threads;
    vo.negate = negate;
    const auto results = run_verification(vo);
    int failed = 0;
    for (const auto &r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "\n";
        failed += !r.passed;
    }
    out << results.size() - static_cast<std::size_t>(failed) << "/" << results.size()
        << " properties passed\n";
    return failed == 0 ? kExitOk : kExitVerifyFailed;
}

int do_make_scene(const SceneArgs &a, std::uint64_t seed, std::ostream &out) {
    std::vector<GaussianPrimitive> gs;
    if (a.kind == "sphere") {
        SphereSceneOptions so;
        so.count = a.count;
        so.scale = a.scale;
        so.opacity = a.opacity;
        gs = sphere_scene(so);
    } else if (a.kind == "wall") {
        gs = wall_scene();
    } else if (a.kind == "single") {
        gs = single_scene();
    } else {
        throw UsageError("--kind must be sphere, wall or single");
    }
    SparseVoxelGrid scene;
    if (a.mode == "direct") {
        scene = grid_from_gaussians(std::move(gs), a.voxel_size);
    } else if (a.mode == "neural") {
        std::vector<Vec3> pts;
        for (const auto &g : gs) {
            pts.push_back(g.position);
        }
        scene = init_from_points(pts, a.voxel_size, seed);
    } else {
        throw UsageError("--mode must be direct or neural");
    }
    save_scene(scene, a.out);
    if (!a.camera_out.empty()) {
        const double distance = a.kind == "wall" ? 0.0 : 3.0;
        Camera cam = default_camera(a.width, a.height, distance);
        if (a.kind == "wall") {
            cam.position = Vec3(0, 0, 0);
            cam.look_at = Vec3(0, 0, 1);
        }
        save_camera(cam, a.camera_out);
    }
    out << "wrote " << a.out << "\n";
    return kExitOk;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NumericFailure:
    case ErrorKind::SingularCovariance:
    case ErrorKind::SolverFailure:
        return kExitNumeric;
    default:
        return kExitUsage;
    }
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Gaussian voxel kernel field renderer and mesher", "gvkf"};
    app.require_subcommand(1);
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 1;
    app.add_option("--seed", seed, "random seed (GVKF_SEED overrides)");
    app.add_option("--threads", threads, "worker threads, 0 = all cores");

    RenderArgs ra;
    auto *render = app.add_subcommand("render", "render color, depth and normal images");
    render->add_option("--scene", ra.scene, "scene JSON")->required();
    render->add_option("--camera", ra.camera, "camera JSON")->required();
    render->add_option("--out", ra.out, "color PPM")->required();
    render->add_option("--depth", ra.depth, "depth PFM");
    render->add_option("--normal", ra.normal, "normal PPM");
    render->add_option("--bg", ra.bg, "background r,g,b");

    MeshArgs ma;
    auto *mesh = app.add_subcommand("mesh", "extract a triangle mesh at D = iso");
    mesh->add_option("--scene", ma.scene, "scene JSON")->required();
    mesh->add_option("--out", ma.out, "mesh file")->required();
    mesh->add_option("--camera", ma.camera, "camera JSON used to decode neural scenes");
    mesh->add_option("--resolution", ma.resolution, "samples along the longest axis");
    mesh->add_option("--mu", ma.mu, "logistic smooth factor");
    mesh->add_option("--iso", ma.iso, "iso level of D");
    mesh->add_option("--sigma-mode", ma.sigma_mode, "per-ray or global");
    mesh->add_option("--format", ma.format, "ply_ascii, ply_binary_le or obj");
    mesh->add_option("--aggregation", ma.aggregation, "max6, vote6 or minabs3");

    FitArgs fa;
    auto *fitc = app.add_subcommand("fit", "fit a scene to target views");
    fitc->add_option("--scene", fa.scene, "initial scene JSON")->required();
    fitc->add_option("--targets", fa.targets, "directory of view_NNNN.{json,ppm}");
    fitc->add_option("--iters", fa.iters, "iterations")->required()->check(CLI::NonNegativeNumber);
    fitc->add_option("--out", fa.out, "fitted scene JSON")->required();
    fitc->add_option("--lambda-dssim", fa.lambda_dssim, "D-SSIM weight");
    fitc->add_option("--lambda-dist", fa.lambda_dist, "depth distortion weight");
    fitc->add_option("--bg", fa.bg, "background r,g,b");

    bool negate = false;
    auto *verify = app.add_subcommand("verify", "run the invariant suite");
    verify->add_flag("--self-test-negate", negate, "inject a fault; must exit 1");

    SceneArgs sa;
    auto *make = app.add_subcommand("make-scene", "write a built-in synthetic scene");
    make->add_option("--kind", sa.kind, "sphere, wall or single");
    make->add_option("--out", sa.out, "scene JSON")->required();
    make->add_option("--camera-out", sa.camera_out, "also write a matching camera JSON");
    make->add_option("--mode", sa.mode, "direct or neural");
    make->add_option("--count", sa.count, "sphere primitive count");
    make->add_option("--scale", sa.scale, "sphere primitive scale");
    make->add_option("--opacity", sa.opacity, "sphere primitive opacity");
    make->add_option("--voxel-size", sa.voxel_size, "base voxel edge");
    make->add_option("--width", sa.width, "camera width");
    make->add_option("--height", sa.height, "camera height");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        const std::uint64_t s = effective_seed(seed);
        if (*render) {
            return do_render(ra, threads, s, out);
        }
        if (*mesh) {
            return do_mesh(ma, threads, s, out);
        }
        if (*fitc) {
            if (fa.iters > 0 && fa.targets.empty()) {
                throw UsageError("--targets is required when --iters > 0");
            }
            return do_fit(fa, threads, s, out);
        }
        if (*verify) {
            return do_verify(negate, threads, s, out);
        }
        if (*make) {
            return do_make_scene(sa, s, out);
        }
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error &e) {
        err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace gvkf
