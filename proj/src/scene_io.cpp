// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/scene_io.hpp"

#include "gvkf/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace gvkf {

using nlohmann::json;

namespace {

json vec_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

json mlp_json(const Mlp &mlp) {
    json layers = json::array();
    for (const auto &layer : mlp.layers) {
        json weight = json::array();
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                row.push_back(layer.weight(r, c));
            }
            weight.push_back(std::move(row));
        }
        json bias = json::array();
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            bias.push_back(layer.bias(r));
        }
        layers.push_back({{"weight", std::move(weight)}, {"bias", std::move(bias)}});
    }
    return layers;
}

[[noreturn]] void fail(const std::string &field, const std::string &what) {
    throw Error(ErrorKind::ParseError, "field '" + field + "': " + what);
}

const json &member(const json &obj, const std::string &key, const std::string &field) {
    if (!obj.is_object()) {
        fail(field, "expected an object");
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
        fail(field.empty() ? key : field + "." + key, "missing");
    }
    return *it;
}

double number(const json &j, const std::string &field) {
    if (!j.is_number()) {
        fail(field, "expected a number");
    }
    return j.get<double>();
}

int integer(const json &j, const std::string &field) {
    if (!j.is_number_integer()) {
        fail(field, "expected an integer");
    }
    return j.get<int>();
}

std::vector<double> numbers(const json &j, const std::string &field, std::size_t expected = 0) {
    if (!j.is_array()) {
        fail(field, "expected an array");
    }
    if (expected > 0 && j.size() != expected) {
        fail(field, "expected " + std::to_string(expected) + " entries");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
    }
    return out;
}

Vec3 vec3(const json &j, const std::string &field) {
    const auto v = numbers(j, field, 3);
    return Vec3(v[0], v[1], v[2]);
}

Mlp mlp_from(const json &j, const std::string &field) {
    if (!j.is_array()) {
        fail(field, "expected a list of layers");
    }
    Mlp mlp;
    for (std::size_t l = 0; l < j.size(); ++l) {
        const std::string lf = field + "[" + std::to_string(l) + "]";
        const json &w = member(j[l], "weight", lf);
        const auto bias = numbers(member(j[l], "bias", lf), lf + ".bias");
        if (!w.is_array() || w.size() != bias.size() || w.empty()) {
            fail(lf + ".weight", "row count must match the bias length");
        }
        const std::size_t cols = w[0].is_array() ? w[0].size() : 0;
        Mlp::Layer layer{Eigen::MatrixXd(static_cast<Eigen::Index>(bias.size()),
                                         static_cast<Eigen::Index>(cols)),
                         Eigen::VectorXd(static_cast<Eigen::Index>(bias.size()))};
        for (std::size_t r = 0; r < bias.size(); ++r) {
            const auto row = numbers(w[r], lf + ".weight[" + std::to_string(r) + "]", cols);
            for (std::size_t c = 0; c < cols; ++c) {
                layer.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
            }
            layer.bias(static_cast<Eigen::Index>(r)) = bias[r];
        }
        if (!mlp.layers.empty() && mlp.layers.back().weight.rows() != layer.weight.cols()) {
            fail(lf + ".weight", "column count must match the previous layer");
        }
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

void check_decoder(const Mlp &mlp, std::size_t in, std::size_t out, const std::string &field) {
    if (mlp.input_dim() != in || mlp.output_dim() != out) {
        fail(field, "expected " + std::to_string(in) + " inputs and " + std::to_string(out) +
                        " outputs");
    }
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::FileError, "cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string &text, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::FileError, "cannot open '" + path.string() + "' for writing");
    }
    out << text;
    out.flush();
    if (!out) {
        throw Error(ErrorKind::FileError, "failed writing '" + path.string() + "'");
    }
}

json parse(const std::string &text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::ParseError, std::string("malformed JSON: ") + e.what());
    }
}

} // namespace

std::string scene_to_json(const SparseVoxelGrid &scene) {
    json j;
    j["format"] = kSceneFormat;
    j["mode"] = scene.mode == SceneMode::Direct ? "direct" : "neural";
    j["voxel_size"] = scene.base_voxel_size;
    json voxels = json::array();
    for (const auto &[key, vox] : scene.voxels) {
        json offsets = json::array();
        for (const auto &o : vox.offsets) {
            offsets.push_back(vec_json(o));
        }
        voxels.push_back({{"center", vec_json(vox.center)},
                          {"depth", vox.depth},
                          {"feature", vox.feature},
                          {"offsets", std::move(offsets)}});
    }
    j["voxels"] = std::move(voxels);
    json gaussians = json::array();
    for (const auto &g : scene.gaussians) {
        gaussians.push_back(
            {{"position", vec_json(g.position)},
             {"rotation_quat",
              json::array({g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()})},
             {"scale", vec_json(g.scale)},
             {"opacity", g.opacity},
             {"rgb", json::array({g.color.r, g.color.g, g.color.b})}});
    }
    j["gaussians"] = std::move(gaussians);
    if (scene.mode == SceneMode::Neural) {
        j["decoder_weights"] = {{"alpha", mlp_json(scene.decoders.alpha)},
                                {"rotation", mlp_json(scene.decoders.rotation)},
                                {"scale", mlp_json(scene.decoders.scale)},
                                {"color", mlp_json(scene.decoders.color)}};
    } else {
        j["decoder_weights"] = json::object();
    }
    return j.dump(2) + "\n";
}

SparseVoxelGrid scene_from_json(const std::string &text, std::uint64_t seed) {
    const json j = parse(text);
    const json &format = member(j, "format", "");
    if (!format.is_string() || format.get<std::string>() != kSceneFormat) {
        fail("format", std::string("expected \"") + kSceneFormat + "\"");
    }
    const json &mode = member(j, "mode", "");
    if (!mode.is_string() || (mode != "direct" && mode != "neural")) {
        fail("mode", "expected \"direct\" or \"neural\"");
    }
    SparseVoxelGrid scene;
    scene.mode = mode == "direct" ? SceneMode::Direct : SceneMode::Neural;
    scene.base_voxel_size = number(member(j, "voxel_size", ""), "voxel_size");
    if (!(scene.base_voxel_size > 0.0)) {
        fail("voxel_size", "must be positive");
    }

    const json empty = json::array();
    const json &voxels = j.contains("voxels") ? j["voxels"] : empty;
    if (!voxels.is_array()) {
        fail("voxels", "expected an array");
    }
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        const std::string vf = "voxels[" + std::to_string(i) + "]";
        const Vec3 center = vec3(member(voxels[i], "center", vf), vf + ".center");
        const int depth = integer(member(voxels[i], "depth", vf), vf + ".depth");
        if (depth < 0 || depth > kMaxDepth) {
            fail(vf + ".depth", "must lie in [0, " + std::to_string(kMaxDepth) + "]");
        }
        const VoxelKey key = scene.key_for(center, depth);
        auto [it, inserted] = scene.voxels.try_emplace(key);
        if (!inserted) {
            fail(vf, "duplicate voxel");
        }
        FeatureVoxel &vox = it->second;
        vox.center = scene.center_of(key);
        vox.depth = depth;
        if (voxels[i].contains("feature")) {
            vox.feature = numbers(voxels[i]["feature"], vf + ".feature");
        }
        if (voxels[i].contains("offsets")) {
            const json &offs = voxels[i]["offsets"];
            if (!offs.is_array() || offs.size() > kMaxOffsets) {
                fail(vf + ".offsets", "expected at most " + std::to_string(kMaxOffsets) + " offsets");
            }
            for (std::size_t k = 0; k < offs.size(); ++k) {
                vox.offsets.push_back(vec3(offs[k], vf + ".offsets[" + std::to_string(k) + "]"));
            }
        }
        if (scene.mode == SceneMode::Neural && vox.feature.size() != kFeatureDim) {
            fail(vf + ".feature", "expected " + std::to_string(kFeatureDim) + " entries");
        }
    }

    const json &gaussians = j.contains("gaussians") ? j["gaussians"] : empty;
    if (!gaussians.is_array()) {
        fail("gaussians", "expected an array");
    }
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        const std::string gf = "gaussians[" + std::to_string(i) + "]";
        const json &gj = gaussians[i];
        GaussianPrimitive g;
        g.position = vec3(member(gj, "position", gf), gf + ".position");
        const auto q = numbers(member(gj, "rotation_quat", gf), gf + ".rotation_quat", 4);
        g.rotation = Quat(q[0], q[1], q[2], q[3]);
        g.scale = vec3(member(gj, "scale", gf), gf + ".scale");
        g.opacity = number(member(gj, "opacity", gf), gf + ".opacity");
        const auto c = numbers(member(gj, "rgb", gf), gf + ".rgb", 3);
        g.color = Rgb{c[0], c[1], c[2]};
        try {
            validate(g);
        } catch (const Error &e) {
            fail(gf, e.what());
        }
        scene.gaussians.push_back(g);
    }

    if (scene.mode == SceneMode::Direct) {
        for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
            const Vec3 &p = scene.gaussians[i].position;
            bool placed = false;
            for (int depth = kMaxDepth; depth >= 0 && !placed; --depth) {
                auto it = scene.voxels.find(scene.key_for(p, depth));
                if (it != scene.voxels.end()) {
                    it->second.gaussians.push_back(i);
                    placed = true;
                }
            }
            if (!placed) {
                const VoxelKey key = scene.key_for(p, 0);
                FeatureVoxel &vox = scene.voxels[key];
                vox.center = scene.center_of(key);
                vox.gaussians.push_back(i);
            }
        }
    } else {
        if (j.contains("decoder_weights") && !j["decoder_weights"].empty()) {
            const json &dw = j["decoder_weights"];
            scene.decoders.alpha = mlp_from(member(dw, "alpha", "decoder_weights"),
                                            "decoder_weights.alpha");
            scene.decoders.rotation = mlp_from(member(dw, "rotation", "decoder_weights"),
                                               "decoder_weights.rotation");
            scene.decoders.scale = mlp_from(member(dw, "scale", "decoder_weights"),
                                            "decoder_weights.scale");
            scene.decoders.color = mlp_from(member(dw, "color", "decoder_weights"),
                                            "decoder_weights.color");
            check_decoder(scene.decoders.alpha, kFeatureDim + 3, kMaxOffsets,
                          "decoder_weights.alpha");
            check_decoder(scene.decoders.rotation, kFeatureDim, 4 * kMaxOffsets,
                          "decoder_weights.rotation");
            check_decoder(scene.decoders.scale, kFeatureDim, 3 * kMaxOffsets,
                          "decoder_weights.scale");
            check_decoder(scene.decoders.color, kFeatureDim + 3, 3 * kMaxOffsets,
                          "decoder_weights.color");
        } else {
            scene.decoders = DecoderSet::seeded(seed);
        }
    }
    return scene;
}

void save_scene(const SparseVoxelGrid &scene, const std::filesystem::path &path) {
    write_text(scene_to_json(scene), path);
}

SparseVoxelGrid load_scene(const std::filesystem::path &path, std::uint64_t seed) {
    return scene_from_json(read_text(path), seed);
}

std::string camera_to_json(const Camera &cam) {
    json j;
    j["position"] = vec_json(cam.position);
    j["look_at"] = vec_json(cam.look_at);
    j["up"] = vec_json(cam.up);
    j["fov_y"] = cam.fov_y;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["near"] = cam.near;
    j["far"] = cam.far;
    return j.dump(2) + "\n";
}

Camera camera_from_json(const std::string &text) {
    const json j = parse(text);
    Camera cam;
    cam.position = vec3(member(j, "position", ""), "position");
    cam.look_at = vec3(member(j, "look_at", ""), "look_at");
    if (j.contains("up")) {
        cam.up = vec3(j["up"], "up");
    }
    if (j.contains("fov_y")) {
        cam.fov_y = number(j["fov_y"], "fov_y");
    }
    cam.width = integer(member(j, "width", ""), "width");
    cam.height = integer(member(j, "height", ""), "height");
    if (j.contains("near")) {
        cam.near = number(j["near"], "near");
    }
    if (j.contains("far")) {
        cam.far = number(j["far"], "far");
    }
    try {
        validate(cam);
    } catch (const Error &e) {
        throw Error(ErrorKind::ParseError, std::string("camera: ") + e.what());
    }
    return cam;
}

void save_camera(const Camera &cam, const std::filesystem::path &path) {
    write_text(camera_to_json(cam), path);
}

Camera load_camera(const std::filesystem::path &path) {
    return camera_from_json(read_text(path));
}

} // namespace gvkf
