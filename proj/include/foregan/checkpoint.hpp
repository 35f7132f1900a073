#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "foregan/gan.hpp"
#include "foregan/image.hpp"

namespace foregan {

// Checkpoint layout, all little-endian: magic "FGAN", u16 version, u32
// latent_dim, u32 image_size, u32 channels, u32 parameter count, then per
// parameter: u32 name length, name bytes, u32 rank, u32 dims[rank], f32
// data. Generator parameters are prefixed "gen.", discriminator "disc.".
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

inline void write_u16_le(std::FILE* f, std::uint16_t v, const std::string& path) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    if (std::fwrite(b, 1, 2, f) != 2) throw IoError("short write: " + path);
}

inline void write_u32_le(std::FILE* f, std::uint32_t v, const std::string& path) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    if (std::fwrite(b, 1, 4, f) != 4) throw IoError("short write: " + path);
}

inline std::uint16_t read_u16_le(std::FILE* f, const std::string& path) {
    unsigned char b[2];
    if (std::fread(b, 1, 2, f) != 2) throw IoError("truncated checkpoint: " + path);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t read_u32_le(std::FILE* f, const std::string& path) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw IoError("truncated checkpoint: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_param(std::FILE* f, const std::string& name, const Tensor& t,
                        const std::string& path) {
    write_u32_le(f, static_cast<std::uint32_t>(name.size()), path);
    if (std::fwrite(name.data(), 1, name.size(), f) != name.size())
        throw IoError("short write: " + path);
    write_u32_le(f, static_cast<std::uint32_t>(t.rank()), path);
    for (int i = 0; i < t.rank(); ++i)
        write_u32_le(f, static_cast<std::uint32_t>(t.dim(i)), path);
    for (const float v : t.data()) write_u32_le(f, std::bit_cast<std::uint32_t>(v), path);
}

inline std::pair<std::string, Tensor> read_param(std::FILE* f, const std::string& path) {
    const std::uint32_t name_len = read_u32_le(f, path);
    if (name_len > 4096) throw FormatError("implausible parameter name length in " + path);
    std::string name(name_len, '\0');
    if (name_len > 0 && std::fread(name.data(), 1, name_len, f) != name_len)
        throw IoError("truncated checkpoint: " + path);
    const std::uint32_t rank = read_u32_le(f, path);
    if (rank > 8) throw FormatError("implausible parameter rank in " + path);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i)
        shape.push_back(static_cast<std::int64_t>(read_u32_le(f, path)));
    const std::int64_t n = shape_numel(shape);
    if (n < 0 || n > (1 << 28)) throw FormatError("implausible parameter size in " + path);
    std::vector<float> data(static_cast<std::size_t>(n));
    for (auto& v : data) v = std::bit_cast<float>(read_u32_le(f, path));
    return {std::move(name), Tensor::from_data(std::move(shape), std::move(data))};
}

} // namespace detail

inline void save_model(const std::string& path, const GanModel& model) {
    detail::FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open for writing: " + path);
    if (std::fwrite("FGAN", 1, 4, f.get()) != 4) throw IoError("short write: " + path);
    detail::write_u16_le(f.get(), kCheckpointVersion, path);
    detail::write_u32_le(f.get(), static_cast<std::uint32_t>(model.latent_dim), path);
    detail::write_u32_le(f.get(), static_cast<std::uint32_t>(model.image_size), path);
    detail::write_u32_le(f.get(), static_cast<std::uint32_t>(model.channels), path);
    const std::uint32_t count =
        static_cast<std::uint32_t>(model.gen_params.size() + model.disc_params.size());
    detail::write_u32_le(f.get(), count, path);
    for (const auto& [name, t] : model.gen_params)
        detail::write_param(f.get(), "gen." + name, t, path);
    for (const auto& [name, t] : model.disc_params)
        detail::write_param(f.get(), "disc." + name, t, path);
    if (std::fflush(f.get()) != 0) throw IoError("short write: " + path);
}

// Loads into a fresh model; on any error nothing is returned. Loaded
// parameters start frozen (requires_grad off).
inline GanModel load_model(const std::string& path) {
    detail::FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4) throw IoError("truncated checkpoint: " + path);
    if (std::string(magic, 4) != "FGAN") throw FormatError("bad checkpoint magic in " + path);
    const std::uint16_t version = detail::read_u16_le(f.get(), path);
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " in " +
                          path);
    GanModel m;
    m.latent_dim = static_cast<int>(detail::read_u32_le(f.get(), path));
    m.image_size = static_cast<int>(detail::read_u32_le(f.get(), path));
    m.channels = static_cast<int>(detail::read_u32_le(f.get(), path));
    const std::uint32_t count = detail::read_u32_le(f.get(), path);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, t] = detail::read_param(f.get(), path);
        if (name.rfind("gen.", 0) == 0)
            m.gen_params[name.substr(4)] = std::move(t);
        else if (name.rfind("disc.", 0) == 0)
            m.disc_params[name.substr(5)] = std::move(t);
        else
            throw FormatError("unknown parameter group for '" + name + "' in " + path);
    }
    return m;
}

} // namespace foregan
