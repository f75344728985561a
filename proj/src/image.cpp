// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#include "gvkf/image.hpp"

#include "gvkf/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

static_assert(std::endian::native == std::endian::little, "PFM I/O assumes a little-endian host");

namespace gvkf {

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
        throw Error(ErrorKind::InvalidParameter, "image needs positive size and 1 or 3 channels");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                     static_cast<std::size_t>(channels),
                 fill);
}

namespace {

std::ofstream open_out(const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::FileError, "cannot open " + path.string() + " for writing");
    }
    return out;
}

std::ifstream open_in(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::FileError, "cannot open " + path.string());
    }
    return in;
}

// Next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream &in) {
    std::string tok;
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') {
                ch = in.get();
            }
        } else if (std::isspace(ch)) {
            if (!tok.empty()) {
                return tok;
            }
        } else {
            tok.push_back(static_cast<char>(ch));
        }
        ch = in.get();
    }
    return tok;
}

int parse_int(const std::string &tok, const std::filesystem::path &path) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) {
            throw std::invalid_argument(tok);
        }
        return v;
    } catch (const std::exception &) {
        throw Error(ErrorKind::ParseError, "bad header field '" + tok + "' in " + path.string());
    }
}

} // namespace

void write_ppm(const ImageBuffer &img, const std::filesystem::path &path) {
    if (img.channels() != 3) {
        throw Error(ErrorKind::ShapeMismatch, "PPM output needs an rgb image");
    }
    auto out = open_out(path);
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<unsigned char> bytes(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = std::isnan(img.data()[i]) ? 0.0 : std::clamp(img.data()[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char *>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::FileError, "failed writing " + path.string());
    }
}

ImageBuffer read_ppm(const std::filesystem::path &path) {
    auto in = open_in(path);
    if (next_token(in) != "P6") {
        throw Error(ErrorKind::ParseError, path.string() + " is not a binary PPM (P6)");
    }
    const int w = parse_int(next_token(in), path);
    const int h = parse_int(next_token(in), path);
    const int maxval = parse_int(next_token(in), path);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
        throw Error(ErrorKind::ParseError, "unsupported PPM header in " + path.string());
    }
    ImageBuffer img(w, h, 3);
    std::vector<unsigned char> bytes(img.size());
    in.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw Error(ErrorKind::ParseError, "truncated pixel data in " + path.string());
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        img.data()[i] = static_cast<double>(bytes[i]) / static_cast<double>(maxval);
    }
    return img;
}

void write_pfm(const ImageBuffer &img, const std::filesystem::path &path) {
    if (img.channels() != 1) {
        throw Error(ErrorKind::ShapeMismatch, "PFM output here is grayscale only");
    }
    auto out = open_out(path);
    out << "Pf\n" << img.width() << " " << img.height() << "\n-1.0\n";
    std::vector<std::uint32_t> row(static_cast<std::size_t>(img.width()));
    for (int y = img.height() - 1; y >= 0; --y) {
        for (int x = 0; x < img.width(); ++x) {
            row[static_cast<std::size_t>(x)] = std::bit_cast<std::uint32_t>(static_cast<float>(img.at(x, y, 0)));
        }
        out.write(reinterpret_cast<const char *>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
    }
    if (!out) {
        throw Error(ErrorKind::FileError, "failed writing " + path.string());
    }
}

ImageBuffer read_pfm(const std::filesystem::path &path) {
    auto in = open_in(path);
    if (next_token(in) != "Pf") {
        throw Error(ErrorKind::ParseError, path.string() + " is not a grayscale PFM");
    }
    const int w = parse_int(next_token(in), path);
    const int h = parse_int(next_token(in), path);
    const std::string scale_tok = next_token(in);
    double scale = 0.0;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception &) {
        throw Error(ErrorKind::ParseError, "bad PFM scale in " + path.string());
    }
    if (!(scale < 0.0)) {
        throw Error(ErrorKind::ParseError, "only little-endian PFM is supported");
    }
    ImageBuffer img(w, h, 1);
    std::vector<std::uint32_t> row(static_cast<std::size_t>(w));
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char *>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
        if (!in) {
            throw Error(ErrorKind::ParseError, "truncated PFM data in " + path.string());
        }
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = std::bit_cast<float>(row[static_cast<std::size_t>(x)]);
        }
    }
    return img;
}

} // namespace gvkf
