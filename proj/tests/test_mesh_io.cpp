// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/error.hpp"
#include "gvkf/mesh_io.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace gvkf {
namespace {

TriangleMesh tetrahedron() {
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1.25)};
    m.faces = {{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}};
    return m;
}

TEST(MeshIo, FormatNames) {
    EXPECT_EQ(parse_mesh_format("ply_ascii"), MeshFormat::PlyAscii);
    EXPECT_EQ(parse_mesh_format("ply_binary_le"), MeshFormat::PlyBinaryLe);
    EXPECT_EQ(parse_mesh_format("obj"), MeshFormat::Obj);
    EXPECT_FALSE(parse_mesh_format("stl").has_value());
    EXPECT_EQ(to_string(MeshFormat::Obj), "obj");
}

TEST(MeshIo, RoundTripEveryFormat) {
    const auto dir = test::temp_dir("mesh_io");
    const auto mesh = tetrahedron();
    for (auto fmt : {MeshFormat::PlyAscii, MeshFormat::PlyBinaryLe, MeshFormat::Obj}) {
        const auto path = dir / ("m." + std::string(to_string(fmt)));
        export_mesh(mesh, path, fmt);
        const auto back = import_mesh(path);
        EXPECT_EQ(back.faces, mesh.faces);
        ASSERT_EQ(back.vertices.size(), mesh.vertices.size());
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            EXPECT_EQ(back.vertices[i], mesh.vertices[i]);
        }
    }
}

TEST(MeshIo, BinaryPlyHeaderAndSize) {
    const auto dir = test::temp_dir("mesh_io_bin");
    export_mesh(tetrahedron(), dir / "m.ply", MeshFormat::PlyBinaryLe);
    const std::string bytes = test::read_bytes(dir / "m.ply");
    EXPECT_EQ(bytes.rfind("ply\nformat binary_little_endian 1.0\n", 0), 0u);
    const auto body = bytes.size() - (bytes.find("end_header\n") + 11);
    EXPECT_EQ(body, 4u * 12u + 4u * 13u);
}

TEST(MeshIo, ExportRejectsBadIndexAndUnwritablePath) {
    auto bad = tetrahedron();
    bad.faces.push_back({0, 1, 9});
    const auto dir = test::temp_dir("mesh_io_err");
    try {
        export_mesh(bad, dir / "bad.ply", MeshFormat::PlyAscii);
        FAIL() << "expected IndexOutOfRange";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::IndexOutOfRange);
    }
    try {
        export_mesh(tetrahedron(), dir / "missing" / "m.obj", MeshFormat::Obj);
        FAIL() << "expected FileError";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::FileError);
    }
}

TEST(MeshIo, ImportRejectsMalformedFiles) {
    const auto dir = test::temp_dir("mesh_io_parse");
    {
        std::ofstream(dir / "quad.obj") << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        std::ofstream(dir / "range.obj") << "v 0 0 0\nf 1 2 3\n";
        std::ofstream(dir / "trunc.ply")
            << "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
               "property float z\nelement face 1\nproperty list uchar int vertex_indices\n"
               "end_header\n0 0 0\n1 0 0\n";
    }
    for (const char *name : {"quad.obj", "range.obj", "trunc.ply"}) {
        try {
            import_mesh(dir / name);
            ADD_FAILURE() << name << " should not parse";
        } catch (const Error &e) {
            EXPECT_EQ(e.kind(), ErrorKind::ParseError) << name;
        }
    }
    EXPECT_THROW(import_mesh(dir / "nope.ply"), Error);
}

TEST(MeshIo, EmptyMeshRoundTrips) {
    const auto dir = test::temp_dir("mesh_io_empty");
    export_mesh(TriangleMesh{}, dir / "e.ply", MeshFormat::PlyBinaryLe);
    const auto back = import_mesh(dir / "e.ply");
    EXPECT_TRUE(back.vertices.empty());
    EXPECT_TRUE(back.faces.empty());
}

} // namespace
} // namespace gvkf
