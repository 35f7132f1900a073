#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "foregan/image.hpp"
#include "foregan/mask.hpp"
#include "foregan/rng.hpp"
#include "foregan/tensor.hpp"

namespace foregan {

// One video frame, planar channel-major (c, y, x). Freshly decoded frames
// carry raw values in [0,255]; preprocess() maps them to the pipeline's
// [-1,1] contract.
struct Frame {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> pixels;

    float at(int c, int y, int x) const {
        return pixels[(static_cast<std::size_t>(c) * static_cast<std::size_t>(height) +
                       static_cast<std::size_t>(y)) *
                          static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }
};

struct Sequence {
    std::vector<Frame> frames;
    std::vector<std::string> names;                // source identifiers, frame order
    std::vector<std::optional<Mask>> gt;           // per-frame ground truth when present

    std::size_t size() const { return frames.size(); }
    bool has_gt() const {
        for (const auto& g : gt)
            if (g.has_value()) return true;
        return false;
    }
};

inline Frame image_to_frame(const Image8& img) {
    Frame f;
    f.width = img.width;
    f.height = img.height;
    f.channels = img.channels;
    f.pixels.resize(img.pixels.size());
    const std::size_t hw =
        static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    for (std::size_t i = 0; i < hw; ++i)
        for (int c = 0; c < img.channels; ++c)
            f.pixels[static_cast<std::size_t>(c) * hw + i] =
                static_cast<float>(img.pixels[i * static_cast<std::size_t>(img.channels) +
                                              static_cast<std::size_t>(c)]);
    return f;
}

// Quantizes a raw-scale ([0,255]) frame back to 8 bits.
inline Image8 frame_to_image(const Frame& f) {
    if (f.channels != 1) throw ContractError("frame_to_image: expected a single-channel frame");
    Image8 img;
    img.width = f.width;
    img.height = f.height;
    img.channels = 1;
    img.pixels.resize(f.pixels.size());
    for (std::size_t i = 0; i < f.pixels.size(); ++i) {
        const float v = std::min(std::max(f.pixels[i], 0.0f), 255.0f);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(v));
    }
    return img;
}

// Normalized frame -> [1,C,H,W] tensor.
inline Tensor frame_to_tensor(const Frame& f) {
    return Tensor::from_data({1, f.channels, f.height, f.width}, f.pixels);
}

inline Frame tensor_to_frame(const Tensor& t) {
    if (t.rank() != 4 || t.dim(0) != 1)
        throw DimensionError("tensor_to_frame: expected [1,C,H,W], got " + shape_str(t.shape()));
    Frame f;
    f.channels = static_cast<int>(t.dim(1));
    f.height = static_cast<int>(t.dim(2));
    f.width = static_cast<int>(t.dim(3));
    f.pixels.assign(t.data().begin(), t.data().end());
    return f;
}

// Maps a [-1,1] image tensor to 8-bit via the inverse of the preprocess
// affine map.
inline Image8 tensor_to_image(const Tensor& t) {
    Frame f = tensor_to_frame(t);
    for (auto& v : f.pixels) v = (v + 1.0f) * 127.5f;
    return frame_to_image(f);
}

enum class SequenceLayout {
    FlatFrames,       // every image in the directory is a frame; gt/ mirrors names
    WallflowerStyle,  // hand_segmented_<frame> files carry the ground truth
};

// Bilinear resize to target_size x target_size, then affine map
// [0,255] -> [-1,1] via v/127.5 - 1.
inline Frame preprocess(const Frame& f, int target_size) {
    if (target_size < 8) throw ContractError("preprocess: target_size must be >= 8");
    Frame out;
    out.width = target_size;
    out.height = target_size;
    out.channels = f.channels;
    out.pixels.resize(static_cast<std::size_t>(f.channels) * static_cast<std::size_t>(target_size) *
                      static_cast<std::size_t>(target_size));
    const float sx = static_cast<float>(f.width) / static_cast<float>(target_size);
    const float sy = static_cast<float>(f.height) / static_cast<float>(target_size);
    for (int c = 0; c < f.channels; ++c) {
        for (int oy = 0; oy < target_size; ++oy) {
            const float fy = (static_cast<float>(oy) + 0.5f) * sy - 0.5f;
            const int y0 = std::max(0, std::min(f.height - 1, static_cast<int>(std::floor(fy))));
            const int y1 = std::min(f.height - 1, y0 + 1);
            const float wy = std::min(std::max(fy - static_cast<float>(y0), 0.0f), 1.0f);
            for (int ox = 0; ox < target_size; ++ox) {
                const float fx = (static_cast<float>(ox) + 0.5f) * sx - 0.5f;
                const int x0 =
                    std::max(0, std::min(f.width - 1, static_cast<int>(std::floor(fx))));
                const int x1 = std::min(f.width - 1, x0 + 1);
                const float wx = std::min(std::max(fx - static_cast<float>(x0), 0.0f), 1.0f);
                const float v00 = f.at(c, y0, x0), v01 = f.at(c, y0, x1);
                const float v10 = f.at(c, y1, x0), v11 = f.at(c, y1, x1);
                const float top = v00 + wx * (v01 - v00);
                const float bot = v10 + wx * (v11 - v10);
                const float v = top + wy * (bot - top);
                out.pixels[(static_cast<std::size_t>(c) * static_cast<std::size_t>(target_size) +
                            static_cast<std::size_t>(oy)) *
                               static_cast<std::size_t>(target_size) +
                           static_cast<std::size_t>(ox)] = v / 127.5f - 1.0f;
            }
        }
    }
    return out;
}

inline Sequence preprocess_sequence(const Sequence& seq, int target_size) {
    Sequence out;
    out.names = seq.names;
    out.gt = seq.gt;
    out.frames.reserve(seq.frames.size());
    for (const auto& f : seq.frames) out.frames.push_back(preprocess(f, target_size));
    return out;
}

// Loads PGM/PNG frames in lexicographic filename order. Channel count is
// inferred from the first frame and enforced on the rest.
inline Sequence load_sequence(const std::string& directory, SequenceLayout layout) {
    namespace fs = std::filesystem;
    const fs::path dir(directory);
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + directory);

    constexpr const char* kGtPrefix = "hand_segmented_";
    std::vector<std::string> frame_files;
    std::vector<std::string> gt_files; // wallflower-style ground-truth images
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
        const std::string name = entry.path().filename().string();
        if (layout == SequenceLayout::WallflowerStyle && name.rfind(kGtPrefix, 0) == 0)
            gt_files.push_back(name);
        else
            frame_files.push_back(name);
    }
    std::sort(frame_files.begin(), frame_files.end());

    Sequence seq;
    for (const auto& name : frame_files) {
        Image8 img = read_image((dir / name).string());
        if (!seq.frames.empty() &&
            (img.width != seq.frames[0].width || img.height != seq.frames[0].height ||
             img.channels != seq.frames[0].channels))
            throw FormatError("inconsistent frame dimensions at " + name + " in " + directory);
        seq.frames.push_back(image_to_frame(img));
        seq.names.push_back(name);
    }
    seq.gt.assign(seq.frames.size(), std::nullopt);

    auto attach_gt = [&](const std::string& frame_name, const fs::path& gt_path) {
        const auto it = std::find(seq.names.begin(), seq.names.end(), frame_name);
        if (it == seq.names.end()) return;
        Mask m = image_to_mask(read_image(gt_path.string()));
        const auto idx = static_cast<std::size_t>(it - seq.names.begin());
        if (m.width != seq.frames[idx].width || m.height != seq.frames[idx].height)
            throw FormatError("ground-truth dimensions do not match frame " + frame_name + " in " +
                              directory);
        seq.gt[idx] = std::move(m);
    };

    if (layout == SequenceLayout::FlatFrames) {
        const fs::path gt_dir = dir / "gt";
        if (fs::is_directory(gt_dir))
            for (const auto& name : seq.names)
                if (fs::exists(gt_dir / name)) attach_gt(name, gt_dir / name);
    } else {
        for (const auto& gname : gt_files)
            attach_gt(gname.substr(std::string(kGtPrefix).size()), dir / gname);
    }
    return seq;
}

// Desk-scale stand-in for the benchmark datasets: a drifting sine-wave
// background with a global illumination ramp and sensor noise; test frames
// composite a moving square along a seeded random walk.
struct SynthConfig {
    int n_background = 500;
    int n_test = 50;
    int size = 64;
    float wave_amplitude = 25.0f;
    float wave_period_px = 16.0f;
    float wave_period_frames = 24.0f;
    float illum_ramp = 0.1f; // gray levels per frame
    float noise_sigma = 4.0f;
    int object_size_px = 16;
    float object_contrast = 0.7f;
    std::uint64_t seed = 1234;
};

namespace detail {

inline Frame synth_background_frame(const SynthConfig& cfg, int t, Rng& rng) {
    constexpr float kBase = 120.0f;
    constexpr float kTwoPi = 6.28318530717958647692f;
    Frame f;
    f.width = cfg.size;
    f.height = cfg.size;
    f.channels = 1;
    f.pixels.resize(static_cast<std::size_t>(cfg.size) * static_cast<std::size_t>(cfg.size));
    const float phase_t = kTwoPi * static_cast<float>(t) / cfg.wave_period_frames;
    for (int y = 0; y < cfg.size; ++y) {
        for (int x = 0; x < cfg.size; ++x) {
            float v = kBase;
            if (cfg.wave_amplitude != 0.0f)
                v += cfg.wave_amplitude *
                     std::sin(kTwoPi * static_cast<float>(x) / cfg.wave_period_px + phase_t);
            v += cfg.illum_ramp * static_cast<float>(t);
            if (cfg.noise_sigma > 0.0f) v += rng.normal(0.0f, cfg.noise_sigma);
            v = std::min(std::max(v, 0.0f), 255.0f);
            f.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(cfg.size) +
                     static_cast<std::size_t>(x)] = static_cast<float>(std::lround(v));
        }
    }
    return f;
}

} // namespace detail

// Returns (train, test); test carries exact ground-truth masks for the
// composited square. Values are quantized to 8 bits so written PGM files
// round-trip bit-exactly.
inline std::pair<Sequence, Sequence> synth_generate(const SynthConfig& cfg) {
    if (cfg.size < 8) throw ContractError("synth_generate: size must be >= 8");
    if (cfg.object_size_px < 1 || cfg.object_size_px >= cfg.size)
        throw ContractError("synth_generate: object_size_px must be in [1, size)");
    if (cfg.noise_sigma < 0.0f) throw ContractError("synth_generate: noise_sigma must be >= 0");
    if (cfg.n_background < 0 || cfg.n_test < 0)
        throw ContractError("synth_generate: frame counts must be >= 0");
    if (cfg.object_contrast < 0.0f || cfg.object_contrast > 1.0f)
        throw ContractError("synth_generate: object_contrast must be in [0,1]");

    Rng rng(cfg.seed);
    Sequence train;
    for (int t = 0; t < cfg.n_background; ++t) {
        train.frames.push_back(detail::synth_background_frame(cfg, t, rng));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "frame_%05d.pgm", t);
        train.names.emplace_back(buf);
    }
    train.gt.assign(train.frames.size(), std::nullopt);

    Sequence test;
    const int obj = cfg.object_size_px;
    const int max_pos = cfg.size - obj;
    int px = static_cast<int>(rng.below(max_pos + 1));
    int py = static_cast<int>(rng.below(max_pos + 1));
    for (int t = 0; t < cfg.n_test; ++t) {
        Frame f = detail::synth_background_frame(cfg, t, rng);
        // Random walk; clamped steps in [-3,3].
        px = std::min(std::max(px + static_cast<int>(rng.below(7)) - 3, 0), max_pos);
        py = std::min(std::max(py + static_cast<int>(rng.below(7)) - 3, 0), max_pos);
        double mean = 0.0;
        for (const float v : f.pixels) mean += v;
        mean /= static_cast<double>(f.pixels.size());
        const float dir = mean <= 127.5 ? 1.0f : -1.0f;
        Mask gt = Mask::zeros(cfg.size, cfg.size);
        for (int y = py; y < py + obj; ++y) {
            for (int x = px; x < px + obj; ++x) {
                const std::size_t idx = static_cast<std::size_t>(y) *
                                            static_cast<std::size_t>(cfg.size) +
                                        static_cast<std::size_t>(x);
                const float v = f.pixels[idx] + dir * cfg.object_contrast * 255.0f;
                f.pixels[idx] = static_cast<float>(std::lround(std::min(std::max(v, 0.0f), 255.0f)));
                gt.bits[idx] = 1;
            }
        }
        test.frames.push_back(std::move(f));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "frame_%05d.pgm", t);
        test.names.emplace_back(buf);
        test.gt.push_back(std::move(gt));
    }
    return {std::move(train), std::move(test)};
}

} // namespace foregan
