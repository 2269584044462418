#include "iabev/pgm.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

namespace iabev::pgm {

namespace {

void write_header(std::ofstream& out, int width, int height, int maxval) {
    out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pgm: cannot open for writing: " + path.string());
    return out;
}

}  // namespace

void write(const std::filesystem::path& path, const Image16& img) {
    auto out = open_out(path);
    write_header(out, img.width, img.height, 65535);
    for (std::uint16_t p : img.pixels) {
        const unsigned char bytes[2] = {static_cast<unsigned char>(p >> 8),
                                        static_cast<unsigned char>(p & 0xff)};
        out.write(reinterpret_cast<const char*>(bytes), 2);
    }
    if (!out) throw std::runtime_error("pgm: write failed: " + path.string());
}

void write(const std::filesystem::path& path, const Image8& img) {
    auto out = open_out(path);
    write_header(out, img.width, img.height, 255);
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw std::runtime_error("pgm: write failed: " + path.string());
}

Image16 read16(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pgm: cannot open: " + path.string());
    std::string magic;
    int width = 0, height = 0, maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (magic != "P5" || maxval != 65535)
        throw std::runtime_error("pgm: expected 16-bit P5: " + path.string());
    in.get();  // single whitespace after maxval
    Image16 img;
    img.width = width;
    img.height = height;
    img.pixels.resize(static_cast<std::size_t>(width) * height);
    for (auto& p : img.pixels) {
        unsigned char bytes[2];
        in.read(reinterpret_cast<char*>(bytes), 2);
        p = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
    }
    if (!in) throw std::runtime_error("pgm: truncated file: " + path.string());
    return img;
}

Image16 encode_depth(const std::vector<double>& depth, int width, int height) {
    if (depth.size() != static_cast<std::size_t>(width) * height)
        throw std::domain_error("encode_depth: size mismatch");
    Image16 img;
    img.width = width;
    img.height = height;
    img.pixels.resize(depth.size());
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double d = depth[i];
        if (!std::isfinite(d) || d <= 0.0) {
            img.pixels[i] = 0;
        } else {
            img.pixels[i] = static_cast<std::uint16_t>(
                std::min(std::round(d * 256.0), 65535.0));
        }
    }
    return img;
}

std::vector<double> decode_depth(const Image16& img) {
    std::vector<double> depth(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        depth[i] = img.pixels[i] == 0 ? std::numeric_limits<double>::infinity()
                                      : img.pixels[i] / 256.0;
    return depth;
}

}  // namespace iabev::pgm
