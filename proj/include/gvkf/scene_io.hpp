// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gvkf/renderer.hpp"
#include "gvkf/voxel_store.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace gvkf {

inline constexpr const char *kSceneFormat = "gvkf-scene-v1";

/// Serialises to `gvkf-scene-v1` JSON. Output is a pure function of the
/// scene, so load followed by save reproduces a file written by save.
std::string scene_to_json(const SparseVoxelGrid &scene);

/// Parses `gvkf-scene-v1` JSON. A neural scene without decoder_weights gets
/// decoders seeded from `seed`. In direct mode each primitive is attached to
/// the deepest listed voxel containing it, or to a new depth-0 voxel.
/// Throws ErrorKind::ParseError naming the offending field.
SparseVoxelGrid scene_from_json(const std::string &text, std::uint64_t seed = kDefaultSeed);

void save_scene(const SparseVoxelGrid &scene, const std::filesystem::path &path);
SparseVoxelGrid load_scene(const std::filesystem::path &path, std::uint64_t seed = kDefaultSeed);

std::string camera_to_json(const Camera &cam);
/// fov_y, near, far and up are optional and default to the Camera defaults.
Camera camera_from_json(const std::string &text);
void save_camera(const Camera &cam, const std::filesystem::path &path);
Camera load_camera(const std::filesystem::path &path);

} // namespace gvkf
