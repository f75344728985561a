// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/error.hpp"
#include "gvkf/scene_io.hpp"
#include "gvkf/scenes.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <string>

namespace gvkf {
namespace {

void expect_parse_error(const std::string &text, const std::string &field) {
    try {
        scene_from_json(text);
        ADD_FAILURE() << "expected ParseError for " << field;
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
        EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
}

TEST(SceneIo, DirectSceneRoundTripsByteForByte) {
    const auto scene = grid_from_gaussians(wall_scene(4), 0.25);
    const std::string first = scene_to_json(scene);
    const auto back = scene_from_json(first);
    EXPECT_EQ(back.mode, SceneMode::Direct);
    ASSERT_EQ(back.gaussians.size(), scene.gaussians.size());
    EXPECT_EQ(back.gaussians[5].position, scene.gaussians[5].position);
    EXPECT_EQ(back.gaussians[5].scale, scene.gaussians[5].scale);
    EXPECT_EQ(back.voxels.size(), scene.voxels.size());
    EXPECT_EQ(scene_to_json(back), first);
}

TEST(SceneIo, NeuralSceneRoundTripsWithDecoders) {
    const std::vector<Vec3> pts{Vec3(0.1, 0.1, 0.1), Vec3(0.6, 0.1, 0.1), Vec3(0.15, 0.1, 0.1)};
    const auto scene = init_from_points(pts, 0.5, 17);
    const std::string text = scene_to_json(scene);
    const auto back = scene_from_json(text, 999);
    EXPECT_EQ(back.mode, SceneMode::Neural);
    EXPECT_EQ(back.decoders.color.layers[1].weight, scene.decoders.color.layers[1].weight);
    EXPECT_EQ(back.voxels.begin()->second.offsets.size(), 2u);
    EXPECT_EQ(scene_to_json(back), text);
}

TEST(SceneIo, NeuralSceneWithoutWeightsIsSeeded) {
    const std::string text = R"({"format":"gvkf-scene-v1","mode":"neural","voxel_size":0.5,
        "voxels":[{"center":[0.25,0.25,0.25],"depth":0,"feature":[)" +
                             [] {
                                 std::string s;
                                 for (std::size_t i = 0; i < kFeatureDim; ++i) {
                                     s += (i ? ",0.01" : "0.01");
                                 }
                                 return s;
                             }() +
                             R"(],"offsets":[[0,0,0]]}]})";
    const auto a = scene_from_json(text, 5);
    const auto b = scene_from_json(text, 5);
    const auto c = scene_from_json(text, 6);
    EXPECT_EQ(a.decoders.alpha.layers[0].weight, b.decoders.alpha.layers[0].weight);
    EXPECT_NE(a.decoders.alpha.layers[0].weight, c.decoders.alpha.layers[0].weight);
}

TEST(SceneIo, DirectLoadAttachesPrimitivesToDeepestVoxel) {
    const std::string text = R"({"format":"gvkf-scene-v1","mode":"direct","voxel_size":1.0,
        "gaussians":[{"position":[0.1,0.1,0.1],"rotation_quat":[1,0,0,0],"scale":[0.1,0.1,0.1],
                      "opacity":0.5,"rgb":[1,1,1]},
                     {"position":[5.5,5.5,5.5],"rotation_quat":[1,0,0,0],"scale":[0.1,0.1,0.1],
                      "opacity":0.5,"rgb":[1,1,1]}],
        "voxels":[{"center":[0.25,0.25,0.25],"depth":1,"feature":[],"offsets":[]}]})";
    const auto s = scene_from_json(text);
    ASSERT_EQ(s.voxels.size(), 2u);
    VoxelKey child;
    child.depth = 1;
    ASSERT_TRUE(s.voxels.contains(child));
    EXPECT_EQ(s.voxels.at(child).gaussians, std::vector<std::size_t>{0});
    VoxelKey root;
    root.cell = {5, 5, 5};
    ASSERT_TRUE(s.voxels.contains(root));
    EXPECT_EQ(s.voxels.at(root).gaussians, std::vector<std::size_t>{1});
}

TEST(SceneIo, ParseErrorsNameTheField) {
    expect_parse_error("not json", "JSON");
    expect_parse_error(R"({"format":"other","mode":"direct","voxel_size":1})", "format");
    expect_parse_error(R"({"format":"gvkf-scene-v1","mode":"weird","voxel_size":1})", "mode");
    expect_parse_error(R"({"format":"gvkf-scene-v1","mode":"direct","voxel_size":1,
        "gaussians":[{"position":[0,0,0],"rotation_quat":[1,0,0,0],"scale":[1,1],
                      "opacity":0.5,"rgb":[1,1,1]}]})",
                       "gaussians[0].scale");
    expect_parse_error(R"({"format":"gvkf-scene-v1","mode":"direct","voxel_size":1,
        "gaussians":[{"position":[0,0,0],"rotation_quat":[1,0,0,0],"scale":[1,1,1],
                      "opacity":2.0,"rgb":[1,1,1]}]})",
                       "gaussians[0]");
}

TEST(SceneIo, FilesAndCameras) {
    const auto dir = test::temp_dir("scene_io");
    const auto scene = grid_from_gaussians(single_scene(), 0.1);
    save_scene(scene, dir / "s.json");
    EXPECT_EQ(test::read_bytes(dir / "s.json"), scene_to_json(scene));
    EXPECT_EQ(load_scene(dir / "s.json").gaussians.size(), 1u);
    try {
        load_scene(dir / "none.json");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::FileError);
    }

    Camera cam = default_camera(40, 30, 4.0);
    cam.fov_y = 45.0;
    save_camera(cam, dir / "c.json");
    const Camera back = load_camera(dir / "c.json");
    EXPECT_EQ(back.position, cam.position);
    EXPECT_EQ(back.width, 40);
    EXPECT_EQ(back.fov_y, 45.0);

    const Camera minimal = camera_from_json(
        R"({"position":[0,0,-2],"look_at":[0,0,0],"width":8,"height":6})");
    EXPECT_EQ(minimal.fov_y, Camera{}.fov_y);
    EXPECT_EQ(minimal.up, Camera{}.up);
    EXPECT_THROW(camera_from_json(R"({"position":[0,0,0],"look_at":[0,0,0],"width":8,"height":6})"),
                 Error);
    EXPECT_THROW(camera_from_json(R"({"position":[0,0,1],"width":8,"height":6})"), Error);
}

} // namespace
} // namespace gvkf
