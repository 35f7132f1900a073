#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "foregan/inversion.hpp"
#include "foregan/mask.hpp"

namespace foregan {

// Per-pixel residual map, row-major H x W.
struct ResidualMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    float at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }
};

enum class ThresholdMode { Fixed, Otsu };
enum class ChannelReduce { MeanAbs };

struct SegConfig {
    ThresholdMode threshold_mode = ThresholdMode::Otsu;
    float fixed_tau = 0.5f; // used iff threshold_mode == Fixed
    ChannelReduce channel_reduce = ChannelReduce::MeanAbs;
    int median_radius = 1; // 3x3 window
};

// Per-pixel mean over channels of |x - bg|; in [0,2] for [-1,1] inputs.
inline ResidualMap subtract(const Tensor& x, const Tensor& bg) {
    if (x.shape() != bg.shape())
        throw DimensionError("subtract: shape mismatch x=" + shape_str(x.shape()) +
                             ", bg=" + shape_str(bg.shape()));
    if (x.rank() != 4 || x.dim(0) != 1)
        throw DimensionError("subtract: expected [1,C,H,W], got " + shape_str(x.shape()));
    const std::int64_t C = x.dim(1), H = x.dim(2), W = x.dim(3);
    ResidualMap res;
    res.width = static_cast<int>(W);
    res.height = static_cast<int>(H);
    res.values.assign(static_cast<std::size_t>(H * W), 0.0f);
    const float* xd = x.data().data();
    const float* bd = bg.data().data();
    for (std::int64_t c = 0; c < C; ++c) {
        const float* xc = xd + c * H * W;
        const float* bc = bd + c * H * W;
        for (std::int64_t i = 0; i < H * W; ++i)
            res.values[static_cast<std::size_t>(i)] += std::fabs(xc[i] - bc[i]);
    }
    const float inv_c = 1.0f / static_cast<float>(C);
    for (auto& v : res.values) v *= inv_c;
    return res;
}

namespace detail {

// Otsu threshold over a 256-bin histogram spanning [lo, hi]; returns the
// upper edge of the bin that maximizes between-class variance.
inline float otsu_threshold(const std::vector<float>& values, float lo, float hi) {
    constexpr int kBins = 256;
    const float width = (hi - lo) / static_cast<float>(kBins);
    std::vector<std::int64_t> hist(kBins, 0);
    for (const float v : values) {
        int b = static_cast<int>((v - lo) / width);
        b = std::min(std::max(b, 0), kBins - 1);
        ++hist[static_cast<std::size_t>(b)];
    }
    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int b = 0; b < kBins; ++b)
        sum_all += static_cast<double>(hist[static_cast<std::size_t>(b)]) * b;

    double best_var = -1.0;
    int best_bin = 0;
    double w0 = 0.0, sum0 = 0.0;
    for (int k = 0; k < kBins - 1; ++k) {
        w0 += static_cast<double>(hist[static_cast<std::size_t>(k)]);
        sum0 += static_cast<double>(hist[static_cast<std::size_t>(k)]) * k;
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best_var) {
            best_var = between;
            best_bin = k;
        }
    }
    return lo + static_cast<float>(best_bin + 1) * width;
}

} // namespace detail

// Fixed mode: mask = res > fixed_tau. Otsu mode: tau maximizes between-class
// variance over a 256-bin histogram; a constant residual yields an
// all-background mask.
inline Mask threshold(const ResidualMap& res, const SegConfig& cfg) {
    for (const float v : res.values)
        if (!std::isfinite(v) || v < 0.0f)
            throw ContractError("threshold: residual values must be finite and >= 0");
    float tau = 0.0f;
    if (cfg.threshold_mode == ThresholdMode::Fixed) {
        if (!(cfg.fixed_tau >= 0.0f && cfg.fixed_tau <= 2.0f))
            throw ContractError("threshold: fixed_tau must be in [0,2]");
        tau = cfg.fixed_tau;
    } else {
        const auto [mn, mx] = std::minmax_element(res.values.begin(), res.values.end());
        if (res.values.empty() || *mn == *mx) return Mask::zeros(res.width, res.height);
        tau = detail::otsu_threshold(res.values, *mn, *mx);
    }
    Mask m = Mask::zeros(res.width, res.height);
    for (std::size_t i = 0; i < res.values.size(); ++i) m.bits[i] = res.values[i] > tau ? 1 : 0;
    return m;
}

// Median filter with window (2*median_radius+1)^2, clipped at borders; ties
// at even counts resolve toward background.
inline Mask postprocess(const Mask& m, const SegConfig& cfg) {
    const int r = cfg.median_radius;
    if (r < 0) throw ContractError("postprocess: median_radius must be >= 0");
    if (r == 0) return m;
    Mask out = Mask::zeros(m.width, m.height);
    for (int y = 0; y < m.height; ++y) {
        const int y0 = std::max(0, y - r), y1 = std::min(m.height - 1, y + r);
        for (int x = 0; x < m.width; ++x) {
            const int x0 = std::max(0, x - r), x1 = std::min(m.width - 1, x + r);
            int fg = 0, count = 0;
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) {
                    fg += m.at(xx, yy);
                    ++count;
                }
            out.set(x, y, 2 * fg > count ? 1 : 0);
        }
    }
    return out;
}

// Full per-frame pipeline: invert -> subtract -> threshold -> postprocess.
inline std::pair<Mask, InversionResult> segment_frame(const GanModel& model, const Tensor& x,
                                                      const InversionConfig& icfg,
                                                      const SegConfig& scfg) {
    InversionResult inv = invert(model, x, icfg);
    const ResidualMap res = subtract(x, inv.background);
    Mask m = postprocess(threshold(res, scfg), scfg);
    return {std::move(m), std::move(inv)};
}

// Static-reference baseline: the same subtract/threshold/postprocess chain
// against a fixed reference frame.
inline Mask frame_difference_baseline(const Tensor& x, const Tensor& reference,
                                      const SegConfig& scfg) {
    const ResidualMap res = subtract(x, reference);
    return postprocess(threshold(res, scfg), scfg);
}

} // namespace foregan
