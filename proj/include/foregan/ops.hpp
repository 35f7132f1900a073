#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <vector>

#include "foregan/parallel.hpp"
#include "foregan/tensor.hpp"

namespace foregan {

namespace detail {

// All convolution kernels are expressed in the orientation of the forward
// convolution: input [n,cin,hin,win], kernel [cout,cin,kh,kw], output
// [n,cout,hout,wout]. conv_transpose2d reuses them with the roles of input
// and output swapped, which makes the adjoint identity hold by construction.
struct ConvGeom {
    std::int64_t n, cin, hin, win;
    std::int64_t cout, kh, kw;
    std::int64_t stride, pad;
    std::int64_t hout, wout;

    std::int64_t ckk() const { return cin * kh * kw; }
    std::int64_t patches() const { return hout * wout; }
    std::int64_t in_sample() const { return cin * hin * win; }
    std::int64_t out_sample() const { return cout * hout * wout; }
};

// col is [cin*kh*kw, hout*wout] row-major, built from one input sample.
inline void im2col(const float* x, const ConvGeom& g, float* col) {
    const std::int64_t P = g.patches();
    parallel_for_grain(g.cin, g.ckk() * P, [&](std::int64_t c) {
        for (std::int64_t i = 0; i < g.kh; ++i) {
            for (std::int64_t j = 0; j < g.kw; ++j) {
                float* dst = col + ((c * g.kh + i) * g.kw + j) * P;
                for (std::int64_t oh = 0; oh < g.hout; ++oh) {
                    const std::int64_t ih = oh * g.stride + i - g.pad;
                    float* drow = dst + oh * g.wout;
                    if (ih < 0 || ih >= g.hin) {
                        std::fill(drow, drow + g.wout, 0.0f);
                        continue;
                    }
                    const float* xrow = x + (c * g.hin + ih) * g.win;
                    for (std::int64_t ow = 0; ow < g.wout; ++ow) {
                        const std::int64_t iw = ow * g.stride + j - g.pad;
                        drow[ow] = (iw >= 0 && iw < g.win) ? xrow[iw] : 0.0f;
                    }
                }
            }
        }
    });
}

// out[row,p] (+)= sum_r lhs[row,r] * rhs[r,p], output-stationary: a tile of
// the output row block stays in L1 while the reduction streams past it.
// lhs is addressed as lhs[row*row_stride + r*red_stride] so the same kernel
// serves the transposed product.
template <bool Accumulate>
inline void gemm_blocked(const float* lhs, std::int64_t row_stride, std::int64_t red_stride,
                         const float* rhs, std::int64_t rows, std::int64_t reduce,
                         std::int64_t cols, float* out) {
    constexpr std::int64_t kTile = 64;
    constexpr std::int64_t kRowBlock = 8;
    const std::int64_t n_blocks = (rows + kRowBlock - 1) / kRowBlock;
    parallel_for_grain(n_blocks, rows * reduce * cols / 8, [&](std::int64_t blk) {
        const std::int64_t f0 = blk * kRowBlock;
        const std::int64_t fb_n = std::min(kRowBlock, rows - f0);
        float acc[kRowBlock][kTile];
        for (std::int64_t p0 = 0; p0 < cols; p0 += kTile) {
            const std::int64_t tile = std::min(kTile, cols - p0);
            for (std::int64_t fb = 0; fb < fb_n; ++fb)
                std::fill(acc[fb], acc[fb] + tile, 0.0f);
            for (std::int64_t r = 0; r < reduce; ++r) {
                const float* cr = rhs + r * cols + p0;
                for (std::int64_t fb = 0; fb < fb_n; ++fb) {
                    const float kv = lhs[(f0 + fb) * row_stride + r * red_stride];
                    float* a = acc[fb];
                    for (std::int64_t t = 0; t < tile; ++t) a[t] += kv * cr[t];
                }
            }
            for (std::int64_t fb = 0; fb < fb_n; ++fb) {
                float* of = out + (f0 + fb) * cols + p0;
                const float* a = acc[fb];
                if constexpr (Accumulate) {
                    for (std::int64_t t = 0; t < tile; ++t) of[t] += a[t];
                } else {
                    for (std::int64_t t = 0; t < tile; ++t) of[t] = a[t];
                }
            }
        }
    });
}

// out[f,p] (+)= sum_r k[f,r] * col[r,p] for one sample.
template <bool Accumulate>
inline void conv_gemm(const float* k, const float* col, const ConvGeom& g, float* out) {
    gemm_blocked<Accumulate>(k, g.ckk(), 1, col, g.cout, g.ckk(), g.patches(), out);
}

// Forward convolution; Accumulate selects += (gradient sinks) vs = (fresh
// outputs).
inline std::vector<float>& conv_scratch() {
    thread_local std::vector<float> buf;
    return buf;
}

template <bool Accumulate>
inline void conv_fwd(const float* x, const float* k, const ConvGeom& g, float* out) {
    std::vector<float>& scratch = conv_scratch();
    if (scratch.size() < static_cast<std::size_t>(g.ckk() * g.patches()))
        scratch.resize(static_cast<std::size_t>(g.ckk() * g.patches()));
    for (std::int64_t n = 0; n < g.n; ++n) {
        im2col(x + n * g.in_sample(), g, scratch.data());
        conv_gemm<Accumulate>(k, scratch.data(), g, out + n * g.out_sample());
    }
}

// dx[n,c,ih,iw] += adjoint of the forward convolution applied to go.
inline void conv_bwd_dx_accum(const float* go, const float* k, const ConvGeom& g, float* dx) {
    const std::int64_t P = g.patches();
    const std::int64_t R = g.ckk();
    std::vector<float>& scratch = conv_scratch();
    if (scratch.size() < static_cast<std::size_t>(R * P))
        scratch.resize(static_cast<std::size_t>(R * P));
    float* dcol = scratch.data();
    for (std::int64_t n = 0; n < g.n; ++n) {
        const float* gon = go + n * g.out_sample();
        // dcol[r,p] = sum_f k[f,r] * go[f,p]
        gemm_blocked<false>(k, 1, R, gon, R, g.cout, P, dcol);
        // col2im accumulate; each c owns disjoint rows of dcol and dx.
        float* dxn = dx + n * g.in_sample();
        parallel_for_grain(g.cin, g.ckk() * P, [&](std::int64_t c) {
            for (std::int64_t i = 0; i < g.kh; ++i) {
                for (std::int64_t j = 0; j < g.kw; ++j) {
                    const float* src = dcol + ((c * g.kh + i) * g.kw + j) * P;
                    for (std::int64_t oh = 0; oh < g.hout; ++oh) {
                        const std::int64_t ih = oh * g.stride + i - g.pad;
                        if (ih < 0 || ih >= g.hin) continue;
                        float* xrow = dxn + (c * g.hin + ih) * g.win;
                        const float* srow = src + oh * g.wout;
                        for (std::int64_t ow = 0; ow < g.wout; ++ow) {
                            const std::int64_t iw = ow * g.stride + j - g.pad;
                            if (iw >= 0 && iw < g.win) xrow[iw] += srow[ow];
                        }
                    }
                }
            }
        });
    }
}

// dk[f,r] += sum_{n,p} go[n,f,p] * col_n[r,p]
inline void conv_bwd_dk_accum(const float* go, const float* x, const ConvGeom& g, float* dk) {
    const std::int64_t P = g.patches();
    const std::int64_t R = g.ckk();
    std::vector<float>& scratch = conv_scratch();
    if (scratch.size() < static_cast<std::size_t>(R * P))
        scratch.resize(static_cast<std::size_t>(R * P));
    for (std::int64_t n = 0; n < g.n; ++n) {
        im2col(x + n * g.in_sample(), g, scratch.data());
        const float* col = scratch.data();
        const float* gon = go + n * g.out_sample();
        parallel_for_grain(g.cout, g.cout * R * P / 8, [&](std::int64_t f) {
            const float* gf = gon + f * P;
            float* kf = dk + f * R;
            for (std::int64_t r = 0; r < R; ++r) {
                const float* cr = col + r * P;
                float a0 = 0.0f, a1 = 0.0f, a2 = 0.0f, a3 = 0.0f;
                float a4 = 0.0f, a5 = 0.0f, a6 = 0.0f, a7 = 0.0f;
                std::int64_t p = 0;
                for (; p + 8 <= P; p += 8) {
                    a0 += gf[p + 0] * cr[p + 0];
                    a1 += gf[p + 1] * cr[p + 1];
                    a2 += gf[p + 2] * cr[p + 2];
                    a3 += gf[p + 3] * cr[p + 3];
                    a4 += gf[p + 4] * cr[p + 4];
                    a5 += gf[p + 5] * cr[p + 5];
                    a6 += gf[p + 6] * cr[p + 6];
                    a7 += gf[p + 7] * cr[p + 7];
                }
                float tail = 0.0f;
                for (; p < P; ++p) tail += gf[p] * cr[p];
                kf[r] += (((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))) + tail;
            }
        });
    }
}

inline void accum_scaled(float* dst, const float* src, float scale, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) dst[i] += scale * src[i];
}

} // namespace detail

// out[n,o] = sum_i x[n,i]*w[i,o] + b[o]
inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(0) ||
        w.dim(1) != b.dim(0))
        throw DimensionError("dense: incompatible shapes x=" + shape_str(x.shape()) +
                             ", w=" + shape_str(w.shape()) + ", b=" + shape_str(b.shape()));
    const std::int64_t N = x.dim(0), I = x.dim(1), O = w.dim(1);
    Tensor out = Tensor::zeros({N, O});
    {
        const float* xd = x.data().data();
        const float* wd = w.data().data();
        const float* bd = b.data().data();
        float* od = out.mutable_data().data();
        parallel_for(N, [&](std::int64_t n) {
            float* orow = od + n * O;
            std::copy(bd, bd + O, orow);
            const float* xrow = xd + n * I;
            for (std::int64_t i = 0; i < I; ++i) {
                const float xv = xrow[i];
                const float* wrow = wd + i * O;
                for (std::int64_t o = 0; o < O; ++o) orow[o] += xv * wrow[o];
            }
        });
    }
    if (detail::recording({&x, &w, &b})) {
        detail::mark_recorded(out, [xd = x.handle(), wd = w.handle(), bd = b.handle(),
                                    od = out.handle(), N, I, O] {
            if (od->grad.empty()) return;
            const float* go = od->grad.data();
            if (xd->requires_grad) {
                xd->ensure_grad();
                float* dx = xd->grad.data();
                const float* w = wd->data.data();
                parallel_for(N, [&](std::int64_t n) {
                    const float* grow = go + n * O;
                    float* dxrow = dx + n * I;
                    for (std::int64_t i = 0; i < I; ++i) {
                        const float* wrow = w + i * O;
                        float a0 = 0.0f, a1 = 0.0f, a2 = 0.0f, a3 = 0.0f;
                        float a4 = 0.0f, a5 = 0.0f, a6 = 0.0f, a7 = 0.0f;
                        std::int64_t o = 0;
                        for (; o + 8 <= O; o += 8) {
                            a0 += grow[o + 0] * wrow[o + 0];
                            a1 += grow[o + 1] * wrow[o + 1];
                            a2 += grow[o + 2] * wrow[o + 2];
                            a3 += grow[o + 3] * wrow[o + 3];
                            a4 += grow[o + 4] * wrow[o + 4];
                            a5 += grow[o + 5] * wrow[o + 5];
                            a6 += grow[o + 6] * wrow[o + 6];
                            a7 += grow[o + 7] * wrow[o + 7];
                        }
                        float tail = 0.0f;
                        for (; o < O; ++o) tail += grow[o] * wrow[o];
                        dxrow[i] += (((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))) + tail;
                    }
                });
            }
            if (wd->requires_grad) {
                wd->ensure_grad();
                float* dw = wd->grad.data();
                const float* x = xd->data.data();
                parallel_for(I, [&](std::int64_t i) {
                    float* dwrow = dw + i * O;
                    for (std::int64_t n = 0; n < N; ++n) {
                        const float xv = x[n * I + i];
                        const float* grow = go + n * O;
                        for (std::int64_t o = 0; o < O; ++o) dwrow[o] += xv * grow[o];
                    }
                });
            }
            if (bd->requires_grad) {
                bd->ensure_grad();
                float* db = bd->grad.data();
                for (std::int64_t n = 0; n < N; ++n) {
                    const float* grow = go + n * O;
                    for (std::int64_t o = 0; o < O; ++o) db[o] += grow[o];
                }
            }
        });
    }
    return out;
}

// x: [N,C,H,W], k: [F,C,kh,kw], zero padding; H' = (H+2p-kh)/stride + 1.
inline Tensor conv2d(const Tensor& x, const Tensor& k, int stride, int pad) {
    if (x.rank() != 4 || k.rank() != 4)
        throw DimensionError("conv2d: expected rank-4 input and kernel, got x=" +
                             shape_str(x.shape()) + ", k=" + shape_str(k.shape()));
    if (k.dim(1) != x.dim(1))
        throw DimensionError("conv2d: channel mismatch x=" + shape_str(x.shape()) +
                             ", k=" + shape_str(k.shape()));
    if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
    if (pad < 0) throw ContractError("conv2d: pad must be >= 0");
    detail::ConvGeom g;
    g.n = x.dim(0);
    g.cin = x.dim(1);
    g.hin = x.dim(2);
    g.win = x.dim(3);
    g.cout = k.dim(0);
    g.kh = k.dim(2);
    g.kw = k.dim(3);
    g.stride = stride;
    g.pad = pad;
    const std::int64_t eh = g.hin + 2 * g.pad - g.kh;
    const std::int64_t ew = g.win + 2 * g.pad - g.kw;
    if (eh < 0 || ew < 0 || eh % g.stride != 0 || ew % g.stride != 0)
        throw DimensionError("conv2d: geometry not divisible for x=" + shape_str(x.shape()) +
                             ", k=" + shape_str(k.shape()) + ", stride=" + std::to_string(stride) +
                             ", pad=" + std::to_string(pad));
    g.hout = eh / g.stride + 1;
    g.wout = ew / g.stride + 1;

    Tensor out = Tensor::zeros({g.n, g.cout, g.hout, g.wout});
    detail::conv_fwd<false>(x.data().data(), k.data().data(), g, out.mutable_data().data());

    if (detail::recording({&x, &k})) {
        detail::mark_recorded(out, [xd = x.handle(), kd = k.handle(), od = out.handle(), g] {
            if (od->grad.empty()) return;
            if (xd->requires_grad) {
                xd->ensure_grad();
                detail::conv_bwd_dx_accum(od->grad.data(), kd->data.data(), g, xd->grad.data());
            }
            if (kd->requires_grad) {
                kd->ensure_grad();
                detail::conv_bwd_dk_accum(od->grad.data(), xd->data.data(), g, kd->grad.data());
            }
        });
    }
    return out;
}

// z: [N,C,H,W], k: [C,F,kh,kw]; H' = (H-1)*stride - 2*pad + kh. Forward
// equals the gradient-wrt-input of conv2d with the same kernel.
inline Tensor conv_transpose2d(const Tensor& z, const Tensor& k, int stride, int pad) {
    if (z.rank() != 4 || k.rank() != 4)
        throw DimensionError("conv_transpose2d: expected rank-4 input and kernel, got z=" +
                             shape_str(z.shape()) + ", k=" + shape_str(k.shape()));
    if (k.dim(0) != z.dim(1))
        throw DimensionError("conv_transpose2d: channel mismatch z=" + shape_str(z.shape()) +
                             ", k=" + shape_str(k.shape()));
    if (stride < 1) throw ContractError("conv_transpose2d: stride must be >= 1");
    if (pad < 0) throw ContractError("conv_transpose2d: pad must be >= 0");
    // Conv orientation: conv input = this op's output, conv output = z.
    detail::ConvGeom g;
    g.n = z.dim(0);
    g.cout = z.dim(1); // conv output channels
    g.hout = z.dim(2);
    g.wout = z.dim(3);
    g.cin = k.dim(1); // conv input channels = transpose output channels
    g.kh = k.dim(2);
    g.kw = k.dim(3);
    g.stride = stride;
    g.pad = pad;
    g.hin = (g.hout - 1) * g.stride - 2 * g.pad + g.kh;
    g.win = (g.wout - 1) * g.stride - 2 * g.pad + g.kw;
    if (g.hin < 1 || g.win < 1)
        throw DimensionError("conv_transpose2d: non-positive output geometry for z=" +
                             shape_str(z.shape()) + ", k=" + shape_str(k.shape()) +
                             ", stride=" + std::to_string(stride) + ", pad=" + std::to_string(pad));

    Tensor out = Tensor::zeros({g.n, g.cin, g.hin, g.win});
    // The conv kernel layout [cout,cin,kh,kw] matches k's [C,F,kh,kw] directly.
    detail::conv_bwd_dx_accum(z.data().data(), k.data().data(), g, out.mutable_data().data());

    if (detail::recording({&z, &k})) {
        detail::mark_recorded(out, [zd = z.handle(), kd = k.handle(), od = out.handle(), g] {
            if (od->grad.empty()) return;
            if (zd->requires_grad) {
                zd->ensure_grad();
                detail::conv_fwd<true>(od->grad.data(), kd->data.data(), g, zd->grad.data());
            }
            if (kd->requires_grad) {
                kd->ensure_grad();
                detail::conv_bwd_dk_accum(zd->data.data(), od->grad.data(), g, kd->grad.data());
            }
        });
    }
    return out;
}

namespace detail {

template <class Fwd, class Dfd>
inline Tensor elementwise_unary(const Tensor& x, Fwd f, Dfd df_from_in_out) {
    Tensor out = Tensor::zeros(x.shape());
    const float* xd = x.data().data();
    float* od = out.mutable_data().data();
    const std::int64_t n = x.numel();
    parallel_for_grain(n, n, [&](std::int64_t i) { od[i] = f(xd[i]); });
    if (recording({&x})) {
        mark_recorded(out, [xd = x.handle(), od = out.handle(), df_from_in_out, n] {
            if (od->grad.empty() || !xd->requires_grad) return;
            xd->ensure_grad();
            const float* go = od->grad.data();
            const float* xv = xd->data.data();
            const float* ov = od->data.data();
            float* dx = xd->grad.data();
            for (std::int64_t i = 0; i < n; ++i) dx[i] += go[i] * df_from_in_out(xv[i], ov[i]);
        });
    }
    return out;
}

} // namespace detail

inline Tensor relu(const Tensor& x) {
    return detail::elementwise_unary(
        x, [](float v) { return v > 0.0f ? v : 0.0f; },
        [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

inline Tensor leaky_relu(const Tensor& x, float slope) {
    return detail::elementwise_unary(
        x, [slope](float v) { return v > 0.0f ? v : slope * v; },
        [slope](float v, float) { return v > 0.0f ? 1.0f : slope; });
}

inline Tensor tanh(const Tensor& x) {
    return detail::elementwise_unary(
        x, [](float v) { return std::tanh(v); },
        [](float, float o) { return 1.0f - o * o; });
}

// Output clamped to the open interval (0,1) at f32 resolution so downstream
// log terms stay finite even when the input saturates.
inline Tensor sigmoid(const Tensor& x) {
    return detail::elementwise_unary(
        x,
        [](float v) {
            constexpr float kLo = FLT_MIN;
            constexpr float kHi = 1.0f - FLT_EPSILON / 2.0f;
            float s;
            if (v >= 0.0f) {
                s = 1.0f / (1.0f + std::exp(-v));
            } else {
                const float e = std::exp(v);
                s = e / (1.0f + e);
            }
            return std::min(std::max(s, kLo), kHi);
        },
        [](float, float o) { return o * (1.0f - o); });
}

// Per-channel standardization over the N,H,W axes, then affine scale/shift.
inline Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    if (x.rank() != 4)
        throw DimensionError("channel_norm: expected rank-4 input, got " + shape_str(x.shape()));
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != C || beta.dim(0) != C)
        throw DimensionError("channel_norm: gamma=" + shape_str(gamma.shape()) +
                             ", beta=" + shape_str(beta.shape()) + " do not match channels of x=" +
                             shape_str(x.shape()));
    if (!(eps > 0.0f)) throw ContractError("channel_norm: eps must be > 0");

    const std::int64_t HW = H * W;
    const std::int64_t m = N * HW;
    Tensor out = Tensor::zeros(x.shape());
    std::vector<float> mean_c(static_cast<std::size_t>(C)), inv_c(static_cast<std::size_t>(C));
    {
        const float* xd = x.data().data();
        const float* gd = gamma.data().data();
        const float* bd = beta.data().data();
        float* od = out.mutable_data().data();
        parallel_for_grain(C, C * m, [&](std::int64_t c) {
            double s = 0.0;
            for (std::int64_t n = 0; n < N; ++n) {
                const float* base = xd + (n * C + c) * HW;
                for (std::int64_t i = 0; i < HW; ++i) s += base[i];
            }
            const double mu = s / static_cast<double>(m);
            double v = 0.0;
            for (std::int64_t n = 0; n < N; ++n) {
                const float* base = xd + (n * C + c) * HW;
                for (std::int64_t i = 0; i < HW; ++i) {
                    const double d = base[i] - mu;
                    v += d * d;
                }
            }
            const double var = v / static_cast<double>(m);
            const float inv = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            mean_c[static_cast<std::size_t>(c)] = static_cast<float>(mu);
            inv_c[static_cast<std::size_t>(c)] = inv;
            const float g = gd[c], b = bd[c];
            const float mu_f = static_cast<float>(mu);
            for (std::int64_t n = 0; n < N; ++n) {
                const float* base = xd + (n * C + c) * HW;
                float* obase = od + (n * C + c) * HW;
                for (std::int64_t i = 0; i < HW; ++i) obase[i] = g * (base[i] - mu_f) * inv + b;
            }
        });
    }
    if (detail::recording({&x, &gamma, &beta})) {
        detail::mark_recorded(out, [xd = x.handle(), gd = gamma.handle(), bd = beta.handle(),
                                    od = out.handle(), mean_c = std::move(mean_c),
                                    inv_c = std::move(inv_c), N, C, HW, m] {
            if (od->grad.empty()) return;
            const float* go = od->grad.data();
            const float* xv = xd->data.data();
            const float* gv = gd->data.data();
            const bool need_x = xd->requires_grad;
            const bool need_g = gd->requires_grad;
            const bool need_b = bd->requires_grad;
            if (need_x) xd->ensure_grad();
            if (need_g) gd->ensure_grad();
            if (need_b) bd->ensure_grad();
            if (!(need_x || need_g || need_b)) return;
            parallel_for_grain(C, C * m, [&](std::int64_t c) {
                const float mu = mean_c[static_cast<std::size_t>(c)];
                const float inv = inv_c[static_cast<std::size_t>(c)];
                double sum_go = 0.0, sum_go_xhat = 0.0;
                for (std::int64_t n = 0; n < N; ++n) {
                    const float* gbase = go + (n * C + c) * HW;
                    const float* xbase = xv + (n * C + c) * HW;
                    for (std::int64_t i = 0; i < HW; ++i) {
                        const float xhat = (xbase[i] - mu) * inv;
                        sum_go += gbase[i];
                        sum_go_xhat += static_cast<double>(gbase[i]) * xhat;
                    }
                }
                if (need_b) bd->grad[static_cast<std::size_t>(c)] += static_cast<float>(sum_go);
                if (need_g) gd->grad[static_cast<std::size_t>(c)] += static_cast<float>(sum_go_xhat);
                if (need_x) {
                    const float g = gv[c];
                    const float s1 = static_cast<float>(sum_go / static_cast<double>(m));
                    const float s2 = static_cast<float>(sum_go_xhat / static_cast<double>(m));
                    float* dxg = xd->grad.data();
                    for (std::int64_t n = 0; n < N; ++n) {
                        const float* gbase = go + (n * C + c) * HW;
                        const float* xbase = xv + (n * C + c) * HW;
                        float* dbase = dxg + (n * C + c) * HW;
                        for (std::int64_t i = 0; i < HW; ++i) {
                            const float xhat = (xbase[i] - mu) * inv;
                            dbase[i] += g * inv * (gbase[i] - s1 - xhat * s2);
                        }
                    }
                }
            });
        });
    }
    return out;
}

// Mean over elements of -[t*log(p) + (1-t)*log(1-p)], p clamped to
// [1e-7, 1-1e-7]. Clamped coordinates receive zero gradient.
inline Tensor bce(const Tensor& p, float target) {
    constexpr float kEps = 1e-7f;
    const std::int64_t n = p.numel();
    if (n == 0) throw ContractError("bce: empty input");
    const float* pd = p.data().data();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const float pc = std::min(std::max(pd[i], kEps), 1.0f - kEps);
        acc -= static_cast<double>(target) * std::log(static_cast<double>(pc)) +
               (1.0 - static_cast<double>(target)) * std::log(1.0 - static_cast<double>(pc));
    }
    Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
    if (detail::recording({&p})) {
        detail::mark_recorded(out, [pd = p.handle(), od = out.handle(), target, n] {
            if (od->grad.empty() || !pd->requires_grad) return;
            pd->ensure_grad();
            const float go = od->grad[0];
            const float scale = go / static_cast<float>(n);
            const float* pv = pd->data.data();
            float* dp = pd->grad.data();
            for (std::int64_t i = 0; i < n; ++i) {
                const float v = pv[i];
                if (v < 1e-7f || v > 1.0f - 1e-7f) continue;
                dp[i] += scale * (-target / v + (1.0f - target) / (1.0f - v));
            }
        });
    }
    return out;
}

// Sum of absolute elementwise differences; subgradient at zero is zero.
inline Tensor l1_sum(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("l1_sum: shape mismatch a=" + shape_str(a.shape()) +
                             ", b=" + shape_str(b.shape()));
    const std::int64_t n = a.numel();
    const float* ad = a.data().data();
    const float* bd = b.data().data();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += std::fabs(static_cast<double>(ad[i]) - bd[i]);
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    if (detail::recording({&a, &b})) {
        detail::mark_recorded(out, [ad = a.handle(), bd = b.handle(), od = out.handle(), n] {
            if (od->grad.empty()) return;
            const float go = od->grad[0];
            const float* av = ad->data.data();
            const float* bv = bd->data.data();
            const bool need_a = ad->requires_grad;
            const bool need_b = bd->requires_grad;
            if (need_a) ad->ensure_grad();
            if (need_b) bd->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                const float d = av[i] - bv[i];
                const float s = d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f);
                if (need_a) ad->grad[static_cast<std::size_t>(i)] += go * s;
                if (need_b) bd->grad[static_cast<std::size_t>(i)] -= go * s;
            }
        });
    }
    return out;
}

namespace detail {

template <class Combine>
inline Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name, Combine f,
                                 float da, float db) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(name) + ": shape mismatch a=" + shape_str(a.shape()) +
                             ", b=" + shape_str(b.shape()));
    const std::int64_t n = a.numel();
    Tensor out = Tensor::zeros(a.shape());
    const float* ad = a.data().data();
    const float* bd = b.data().data();
    float* od = out.mutable_data().data();
    for (std::int64_t i = 0; i < n; ++i) od[i] = f(ad[i], bd[i]);
    if (recording({&a, &b})) {
        mark_recorded(out, [ad = a.handle(), bd = b.handle(), od = out.handle(), n, da, db] {
            if (od->grad.empty()) return;
            const float* go = od->grad.data();
            if (ad->requires_grad) {
                ad->ensure_grad();
                accum_scaled(ad->grad.data(), go, da, n);
            }
            if (bd->requires_grad) {
                bd->ensure_grad();
                accum_scaled(bd->grad.data(), go, db, n);
            }
        });
    }
    return out;
}

} // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::elementwise_binary(a, b, "add", [](float x, float y) { return x + y; }, 1.0f,
                                      1.0f);
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::elementwise_binary(a, b, "sub", [](float x, float y) { return x - y; }, 1.0f,
                                      -1.0f);
}

// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("mul: shape mismatch a=" + shape_str(a.shape()) +
                             ", b=" + shape_str(b.shape()));
    const std::int64_t n = a.numel();
    Tensor out = Tensor::zeros(a.shape());
    {
        const float* ad = a.data().data();
        const float* bd = b.data().data();
        float* od = out.mutable_data().data();
        for (std::int64_t i = 0; i < n; ++i) od[i] = ad[i] * bd[i];
    }
    if (detail::recording({&a, &b})) {
        detail::mark_recorded(out, [ad = a.handle(), bd = b.handle(), od = out.handle(), n] {
            if (od->grad.empty()) return;
            const float* go = od->grad.data();
            if (ad->requires_grad) {
                ad->ensure_grad();
                const float* bv = bd->data.data();
                for (std::int64_t i = 0; i < n; ++i)
                    ad->grad[static_cast<std::size_t>(i)] += go[i] * bv[i];
            }
            if (bd->requires_grad) {
                bd->ensure_grad();
                const float* av = ad->data.data();
                for (std::int64_t i = 0; i < n; ++i)
                    bd->grad[static_cast<std::size_t>(i)] += go[i] * av[i];
            }
        });
    }
    return out;
}

// Tensor scaled by a compile-time-constant scalar (not a tracked tensor).
inline Tensor smul(const Tensor& a, float c) {
    const std::int64_t n = a.numel();
    Tensor out = Tensor::zeros(a.shape());
    {
        const float* ad = a.data().data();
        float* od = out.mutable_data().data();
        for (std::int64_t i = 0; i < n; ++i) od[i] = c * ad[i];
    }
    if (detail::recording({&a})) {
        detail::mark_recorded(out, [ad = a.handle(), od = out.handle(), n, c] {
            if (od->grad.empty() || !ad->requires_grad) return;
            ad->ensure_grad();
            detail::accum_scaled(ad->grad.data(), od->grad.data(), c, n);
        });
    }
    return out;
}

inline Tensor sum(const Tensor& x) {
    const std::int64_t n = x.numel();
    const float* xd = x.data().data();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += xd[i];
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    if (detail::recording({&x})) {
        detail::mark_recorded(out, [xd = x.handle(), od = out.handle(), n] {
            if (od->grad.empty() || !xd->requires_grad) return;
            xd->ensure_grad();
            const float go = od->grad[0];
            for (std::int64_t i = 0; i < n; ++i) xd->grad[static_cast<std::size_t>(i)] += go;
        });
    }
    return out;
}

inline Tensor mean(const Tensor& x) {
    const std::int64_t n = x.numel();
    if (n == 0) throw ContractError("mean: empty input");
    const float* xd = x.data().data();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += xd[i];
    Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
    if (detail::recording({&x})) {
        detail::mark_recorded(out, [xd = x.handle(), od = out.handle(), n] {
            if (od->grad.empty() || !xd->requires_grad) return;
            xd->ensure_grad();
            const float go = od->grad[0] / static_cast<float>(n);
            for (std::int64_t i = 0; i < n; ++i) xd->grad[static_cast<std::size_t>(i)] += go;
        });
    }
    return out;
}

inline Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(new_shape));
    Tensor out = Tensor::from_data(std::move(new_shape),
                                   std::vector<float>(x.data().begin(), x.data().end()));
    if (detail::recording({&x})) {
        detail::mark_recorded(out, [xd = x.handle(), od = out.handle()] {
            if (od->grad.empty() || !xd->requires_grad) return;
            xd->ensure_grad();
            detail::accum_scaled(xd->grad.data(), od->grad.data(), 1.0f,
                                 static_cast<std::int64_t>(xd->data.size()));
        });
    }
    return out;
}

} // namespace foregan
