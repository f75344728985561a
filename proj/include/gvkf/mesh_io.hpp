// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gvkf/mesher.hpp"

#include <filesystem>
#include <optional>
#include <string_view>

namespace gvkf {

enum class MeshFormat { PlyAscii, PlyBinaryLe, Obj };

std::optional<MeshFormat> parse_mesh_format(std::string_view name);
std::string_view to_string(MeshFormat format);

/// Writes vertices as 32-bit floats and faces as 32-bit index lists.
/// Throws ErrorKind::FileError when the file cannot be written.
void export_mesh(const TriangleMesh &mesh, const std::filesystem::path &path, MeshFormat format);

/// Reads files written by export_mesh (any of the three formats, detected
/// from the content). Only triangles are accepted.
/// Throws ErrorKind::FileError or ErrorKind::ParseError.
TriangleMesh import_mesh(const std::filesystem::path &path);

} // namespace gvkf
