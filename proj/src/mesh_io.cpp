// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/mesh_io.hpp"

#include "gvkf/error.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

static_assert(std::endian::native == std::endian::little, "binary PLY output assumes a little-endian host");

namespace gvkf {

std::optional<MeshFormat> parse_mesh_format(std::string_view name) {
    if (name == "ply_ascii") {
        return MeshFormat::PlyAscii;
    }
    if (name == "ply_binary_le") {
        return MeshFormat::PlyBinaryLe;
    }
    if (name == "obj") {
        return MeshFormat::Obj;
    }
    return std::nullopt;
}

std::string_view to_string(MeshFormat format) {
    switch (format) {
    case MeshFormat::PlyAscii:
        return "ply_ascii";
    case MeshFormat::PlyBinaryLe:
        return "ply_binary_le";
    case MeshFormat::Obj:
        return "obj";
    }
    return "unknown";
}

namespace {

std::string ply_header(const TriangleMesh &mesh, std::string_view encoding) {
    std::ostringstream h;
    h << "ply\n"
      << "format " << encoding << " 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\n"
      << "property float y\n"
      << "property float z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\n"
      << "end_header\n";
    return h.str();
}

template <typename T>
void put(std::ostream &out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream &in) {
    char bytes[sizeof(T)];
    if (!in.read(bytes, sizeof(T))) {
        throw Error(ErrorKind::ParseError, "binary PLY body is truncated");
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

// Shortest text that reads back as the same float.
std::string float_text(float v) {
    char buf[32];
    for (int precision = 6; precision <= 9; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, static_cast<double>(v));
        if (std::strtof(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

} // namespace

void export_mesh(const TriangleMesh &mesh, const std::filesystem::path &path, MeshFormat format) {
    for (const auto &f : mesh.faces) {
        for (std::uint32_t idx : f) {
            if (idx >= mesh.vertices.size()) {
                throw Error(ErrorKind::IndexOutOfRange, "face index outside the vertex list");
            }
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::FileError, "cannot open '" + path.string() + "' for writing");
    }
    switch (format) {
    case MeshFormat::PlyAscii:
        out << ply_header(mesh, "ascii");
        for (const auto &v : mesh.vertices) {
            out << float_text(static_cast<float>(v.x())) << ' '
                << float_text(static_cast<float>(v.y())) << ' '
                << float_text(static_cast<float>(v.z())) << '\n';
        }
        for (const auto &f : mesh.faces) {
            out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
        }
        break;
    case MeshFormat::PlyBinaryLe:
        out << ply_header(mesh, "binary_little_endian");
        for (const auto &v : mesh.vertices) {
            for (int c = 0; c < 3; ++c) {
                put(out, static_cast<float>(v[c]));
            }
        }
        for (const auto &f : mesh.faces) {
            put(out, static_cast<std::uint8_t>(3));
            for (std::uint32_t idx : f) {
                put(out, static_cast<std::int32_t>(idx));
            }
        }
        break;
    case MeshFormat::Obj:
        for (const auto &v : mesh.vertices) {
            out << "v " << float_text(static_cast<float>(v.x())) << ' '
                << float_text(static_cast<float>(v.y())) << ' '
                << float_text(static_cast<float>(v.z())) << '\n';
        }
        for (const auto &f : mesh.faces) {
            out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
        }
        break;
    }
    out.flush();
    if (!out) {
        throw Error(ErrorKind::FileError, "failed writing '" + path.string() + "'");
    }
}

namespace {

std::array<std::uint32_t, 3> checked_face(long long a, long long b, long long c, std::size_t n) {
    for (long long idx : {a, b, c}) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= n) {
            throw Error(ErrorKind::ParseError, "face index outside the vertex list");
        }
    }
    return {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
            static_cast<std::uint32_t>(c)};
}

TriangleMesh read_obj(std::istream &in) {
    TriangleMesh mesh;
    std::vector<std::array<long long, 3>> raw;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            float x = 0, y = 0, z = 0;
            if (!(ls >> x >> y >> z)) {
                throw Error(ErrorKind::ParseError, "malformed OBJ vertex line");
            }
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::array<long long, 3> f{};
            std::string extra;
            if (!(ls >> f[0] >> f[1] >> f[2]) || (ls >> extra)) {
                throw Error(ErrorKind::ParseError, "OBJ faces must be plain triangles");
            }
            raw.push_back(f);
        }
    }
    for (const auto &f : raw) {
        mesh.faces.push_back(checked_face(f[0] - 1, f[1] - 1, f[2] - 1, mesh.vertices.size()));
    }
    return mesh;
}

TriangleMesh read_ply(std::istream &in) {
    std::string line;
    std::string encoding;
    std::size_t nv = 0;
    std::size_t nf = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            ls >> encoding;
        } else if (tag == "element") {
            std::string name;
            std::size_t n = 0;
            ls >> name >> n;
            (name == "vertex" ? nv : nf) = n;
        } else if (tag == "end_header") {
            break;
        }
    }
    if (encoding != "ascii" && encoding != "binary_little_endian") {
        throw Error(ErrorKind::ParseError, "unsupported PLY encoding '" + encoding + "'");
    }
    TriangleMesh mesh;
    mesh.vertices.reserve(nv);
    mesh.faces.reserve(nf);
    if (encoding == "ascii") {
        for (std::size_t i = 0; i < nv; ++i) {
            float x = 0, y = 0, z = 0;
            if (!(in >> x >> y >> z)) {
                throw Error(ErrorKind::ParseError, "PLY vertex list is truncated");
            }
            mesh.vertices.emplace_back(x, y, z);
        }
        for (std::size_t i = 0; i < nf; ++i) {
            int count = 0;
            long long a = 0, b = 0, c = 0;
            if (!(in >> count >> a >> b >> c) || count != 3) {
                throw Error(ErrorKind::ParseError, "PLY faces must be triangles");
            }
            mesh.faces.push_back(checked_face(a, b, c, nv));
        }
    } else {
        for (std::size_t i = 0; i < nv; ++i) {
            const float x = get<float>(in);
            const float y = get<float>(in);
            const float z = get<float>(in);
            mesh.vertices.emplace_back(x, y, z);
        }
        for (std::size_t i = 0; i < nf; ++i) {
            if (get<std::uint8_t>(in) != 3) {
                throw Error(ErrorKind::ParseError, "PLY faces must be triangles");
            }
            const auto a = get<std::int32_t>(in);
            const auto b = get<std::int32_t>(in);
            const auto c = get<std::int32_t>(in);
            mesh.faces.push_back(checked_face(a, b, c, nv));
        }
    }
    return mesh;
}

} // namespace

TriangleMesh import_mesh(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::FileError, "cannot open '" + path.string() + "'");
    }
    std::string first;
    std::getline(in, first);
    if (first == "ply") {
        return read_ply(in);
    }
    in.clear();
    in.seekg(0);
    return read_obj(in);
}

} // namespace gvkf
