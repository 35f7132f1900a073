#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "foregan/errors.hpp"
#include "foregan/mask.hpp"

namespace foregan {

// 8-bit image, row-major; channels interleaved when channels > 1.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    std::size_t size() const { return pixels.size(); }
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Reads one PNM token, skipping whitespace and '#' comments.
inline std::string pnm_token(std::FILE* f, const std::string& path) {
    int c = std::fgetc(f);
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(f);
        } else if (!std::isspace(c)) {
            break;
        }
        c = std::fgetc(f);
    }
    if (c == EOF) throw FormatError("pgm: truncated header in " + path);
    std::string tok;
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = std::fgetc(f);
    }
    return tok;
}

} // namespace detail

inline Image8 read_pgm(const std::string& path) {
    detail::FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open " + path);
    char magic[2];
    if (std::fread(magic, 1, 2, f.get()) != 2 || magic[0] != 'P' || magic[1] != '5')
        throw FormatError("pgm: not a P5 file: " + path);
    long width = 0, height = 0, maxval = 0;
    try {
        width = std::stol(detail::pnm_token(f.get(), path));
        height = std::stol(detail::pnm_token(f.get(), path));
        maxval = std::stol(detail::pnm_token(f.get(), path));
    } catch (const std::logic_error&) {
        throw FormatError("pgm: malformed header in " + path);
    }
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
        throw FormatError("pgm: unsupported geometry or maxval in " + path);
    Image8 img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.channels = 1;
    img.pixels.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    if (std::fread(img.pixels.data(), 1, img.pixels.size(), f.get()) != img.pixels.size())
        throw IoError("pgm: truncated pixel data in " + path);
    return img;
}

inline void write_pgm(const std::string& path, const Image8& img) {
    if (img.channels != 1) throw ContractError("write_pgm: expected a single-channel image");
    detail::FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open for writing: " + path);
    const std::string header =
        "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size() ||
        std::fwrite(img.pixels.data(), 1, img.pixels.size(), f.get()) != img.pixels.size())
        throw IoError("short write: " + path);
    return;
}

// 8-bit grayscale or RGB PNG. Palette, 16-bit and alpha inputs are folded
// down to those two layouts.
inline Image8 read_png(const std::string& path) {
    detail::FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open " + path);
    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw FormatError("png: bad signature: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: allocation failure reading " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: allocation failure reading " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("png: decode error in " + path);
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_RGB_ALPHA || color_type == PNG_COLOR_TYPE_GRAY_ALPHA ||
        png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);

    Image8 img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("png: unsupported channel count in " + path);
    }
    const std::size_t stride = png_get_rowbytes(png, info);
    img.pixels.resize(stride * static_cast<std::size_t>(img.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = img.pixels.data() + static_cast<std::size_t>(y) * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png_gray(const std::string& path, const Image8& img) {
    if (img.channels != 1) throw ContractError("write_png_gray: expected a single-channel image");
    detail::FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: allocation failure writing " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: allocation failure writing " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: encode error for " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
            img.pixels.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Image8 read_image(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return read_png(path);
    throw FormatError("unsupported image extension: " + path);
}

inline bool is_image_file(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".pgm" || ext == ".png";
}

// Masks are written as binary PGM with foreground = 255.
inline void write_mask_pgm(const std::string& path, const Mask& m) {
    Image8 img;
    img.width = m.width;
    img.height = m.height;
    img.channels = 1;
    img.pixels.resize(m.bits.size());
    for (std::size_t i = 0; i < m.bits.size(); ++i) img.pixels[i] = m.bits[i] ? 255 : 0;
    write_pgm(path, img);
}

// Any pixel >= 128 counts as foreground; multi-channel inputs use the mean.
inline Mask image_to_mask(const Image8& img) {
    Mask m = Mask::zeros(img.width, img.height);
    const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    for (std::size_t i = 0; i < n; ++i) {
        int v = 0;
        for (int c = 0; c < img.channels; ++c)
            v += img.pixels[i * static_cast<std::size_t>(img.channels) + static_cast<std::size_t>(c)];
        m.bits[i] = (v / img.channels >= 128) ? 1 : 0;
    }
    return m;
}

} // namespace foregan
