// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include "iqc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

// Data-parallel kernels.  Every parallel loop writes disjoint output
// elements and reductions accumulate in a fixed serial order, so results
// never depend on the thread count.  Backward kernels are written in
// gather form (parallel over the gradient being produced) for the same
// reason.
namespace iqc::kern {

template <typename T>
ArrayT<T> conv2d(const ArrayT<T>& x, const ArrayT<T>& w, const ArrayT<T>* bias, int stride,
                 int pad)
{
    require_arg(x.rank() == 3 && w.rank() == 4, "conv2d expects x[H,W,C] and w[Kh,Kw,Ci,Co]");
    require_arg(stride >= 1 && pad >= 0, "conv2d stride/padding out of range");
    const int h = x.dim(0), wd = x.dim(1), ci = x.dim(2);
    const int kh = w.dim(0), kw = w.dim(1), co = w.dim(3);
    require_arg(w.dim(2) == ci, "conv2d channel mismatch");
    require_arg(h + 2 * pad >= kh && wd + 2 * pad >= kw, "conv2d kernel larger than input");
    if (bias != nullptr)
        require_arg(bias->rank() == 1 && bias->dim(0) == co, "conv2d bias shape mismatch");
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    ArrayT<T> y = ArrayT<T>::zeros({oh, ow, co});
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int c = 0; c < co; ++c) {
                double acc = bias != nullptr ? static_cast<double>(bias->data[c]) : 0.0;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h)
                        continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= wd)
                            continue;
                        const T* xp = &x.data[(static_cast<std::size_t>(iy) * wd + ix) * ci];
                        const T* wp = &w.data[((static_cast<std::size_t>(ky) * kw + kx) * ci) * co + c];
                        for (int ic = 0; ic < ci; ++ic)
                            acc += static_cast<double>(xp[ic]) * wp[static_cast<std::size_t>(ic) * co];
                    }
                }
                y.data[(static_cast<std::size_t>(oy) * ow + ox) * co + c] = static_cast<T>(acc);
            }
    return y;
}

template <typename T>
void conv2d_bwd_x(ArrayT<T>& dx, const ArrayT<T>& dy, const ArrayT<T>& w, int stride, int pad)
{
    const int h = dx.dim(0), wd = dx.dim(1), ci = dx.dim(2);
    const int kh = w.dim(0), kw = w.dim(1), co = w.dim(3);
    const int oh = dy.dim(0), ow = dy.dim(1);
#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < wd; ++ix)
            for (int ic = 0; ic < ci; ++ic) {
                double acc = 0.0;
                for (int ky = 0; ky < kh; ++ky) {
                    const int num_y = iy + pad - ky;
                    if (num_y < 0 || num_y % stride != 0)
                        continue;
                    const int oy = num_y / stride;
                    if (oy >= oh)
                        continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int num_x = ix + pad - kx;
                        if (num_x < 0 || num_x % stride != 0)
                            continue;
                        const int ox = num_x / stride;
                        if (ox >= ow)
                            continue;
                        const T* dyp = &dy.data[(static_cast<std::size_t>(oy) * ow + ox) * co];
                        const T* wp = &w.data[((static_cast<std::size_t>(ky) * kw + kx) * ci + ic) * co];
                        for (int c = 0; c < co; ++c)
                            acc += static_cast<double>(dyp[c]) * wp[c];
                    }
                }
                dx.data[(static_cast<std::size_t>(iy) * wd + ix) * ci + ic]
                    += static_cast<T>(acc);
            }
}

template <typename T>
void conv2d_bwd_w(ArrayT<T>& dw, const ArrayT<T>& dy, const ArrayT<T>& x, int stride, int pad)
{
    const int h = x.dim(0), wd = x.dim(1), ci = x.dim(2);
    const int kh = dw.dim(0), kw = dw.dim(1), co = dw.dim(3);
    const int oh = dy.dim(0), ow = dy.dim(1);
    const int flat = kh * kw * ci * co;
#pragma omp parallel for schedule(static)
    for (int f = 0; f < flat; ++f) {
        const int c = f % co;
        const int ic = (f / co) % ci;
        const int kx = (f / (co * ci)) % kw;
        const int ky = f / (co * ci * kw);
        double acc = 0.0;
        for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h)
                continue;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= wd)
                    continue;
                acc += static_cast<double>(dy.data[(static_cast<std::size_t>(oy) * ow + ox) * co + c])
                       * x.data[(static_cast<std::size_t>(iy) * wd + ix) * ci + ic];
            }
        }
        dw.data[f] += static_cast<T>(acc);
    }
}

template <typename T>
void conv2d_bwd_b(ArrayT<T>& db, const ArrayT<T>& dy)
{
    const int co = db.dim(0);
    const std::size_t pixels = dy.numel() / co;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < co; ++c) {
        double acc = 0.0;
        for (std::size_t p = 0; p < pixels; ++p)
            acc += static_cast<double>(dy.data[p * co + c]);
        db.data[c] += static_cast<T>(acc);
    }
}

template <typename T>
ArrayT<T> matmul(const ArrayT<T>& a, const ArrayT<T>& b)
{
    require_arg(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
                "matmul shape mismatch");
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    ArrayT<T> y = ArrayT<T>::zeros({n, m});
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t)
                acc += static_cast<double>(a.data[static_cast<std::size_t>(i) * k + t])
                       * b.data[static_cast<std::size_t>(t) * m + j];
            y.data[static_cast<std::size_t>(i) * m + j] = static_cast<T>(acc);
        }
    return y;
}

template <typename T>
void matmul_bwd_a(ArrayT<T>& da, const ArrayT<T>& dy, const ArrayT<T>& b)
{
    const int n = da.dim(0), k = da.dim(1), m = b.dim(1);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < k; ++t) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j)
                acc += static_cast<double>(dy.data[static_cast<std::size_t>(i) * m + j])
                       * b.data[static_cast<std::size_t>(t) * m + j];
            da.data[static_cast<std::size_t>(i) * k + t] += static_cast<T>(acc);
        }
}

template <typename T>
void matmul_bwd_b(ArrayT<T>& db, const ArrayT<T>& dy, const ArrayT<T>& a)
{
    const int n = a.dim(0), k = a.dim(1), m = db.dim(1);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < k; ++t)
        for (int j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += static_cast<double>(a.data[static_cast<std::size_t>(i) * k + t])
                       * dy.data[static_cast<std::size_t>(i) * m + j];
            db.data[static_cast<std::size_t>(t) * m + j] += static_cast<T>(acc);
        }
}

// Half-pixel-center bilinear resize; resizing to the same shape is the
// identity by construction.
template <typename T>
ArrayT<T> bilinear_resize(const ArrayT<T>& x, int oh, int ow)
{
    require_arg(x.rank() == 3, "resize expects x[H,W,C]");
    require_arg(oh >= 1 && ow >= 1, "resize target must be positive");
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    ArrayT<T> y = ArrayT<T>::zeros({oh, ow, c});
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            const double fy = (oy + 0.5) * sy - 0.5;
            const double fx = (ox + 0.5) * sx - 0.5;
            const int y0 = static_cast<int>(std::floor(fy));
            const int x0 = static_cast<int>(std::floor(fx));
            const double wy = fy - y0;
            const double wx = fx - x0;
            const int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
            const int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
            for (int ch = 0; ch < c; ++ch) {
                const auto at = [&](int yy, int xx) {
                    return static_cast<double>(
                        x.data[(static_cast<std::size_t>(yy) * w + xx) * c + ch]);
                };
                const double top = (1.0 - wx) * at(y0c, x0c) + wx * at(y0c, x1c);
                const double bot = (1.0 - wx) * at(y1c, x0c) + wx * at(y1c, x1c);
                y.data[(static_cast<std::size_t>(oy) * ow + ox) * c + ch]
                    = static_cast<T>((1.0 - wy) * top + wy * bot);
            }
        }
    return y;
}

// Scatter form; kept serial so the 4-way splats never race.
template <typename T>
void bilinear_resize_bwd(ArrayT<T>& dx, const ArrayT<T>& dy)
{
    const int h = dx.dim(0), w = dx.dim(1), c = dx.dim(2);
    const int oh = dy.dim(0), ow = dy.dim(1);
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            const double fy = (oy + 0.5) * sy - 0.5;
            const double fx = (ox + 0.5) * sx - 0.5;
            const int y0 = static_cast<int>(std::floor(fy));
            const int x0 = static_cast<int>(std::floor(fx));
            const double wy = fy - y0;
            const double wx = fx - x0;
            const int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
            const int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
            const double ws[4] = {(1.0 - wy) * (1.0 - wx), (1.0 - wy) * wx, wy * (1.0 - wx),
                                  wy * wx};
            const int ys[4] = {y0c, y0c, y1c, y1c};
            const int xs[4] = {x0c, x1c, x0c, x1c};
            for (int ch = 0; ch < c; ++ch) {
                const double g = dy.data[(static_cast<std::size_t>(oy) * ow + ox) * c + ch];
                for (int t = 0; t < 4; ++t)
                    dx.data[(static_cast<std::size_t>(ys[t]) * w + xs[t]) * c + ch]
                        += static_cast<T>(ws[t] * g);
            }
        }
}

inline constexpr double kLayerNormEps = 1e-6;

// Normalizes the last axis to zero mean / unit variance (no affine part).
template <typename T>
ArrayT<T> layer_norm(const ArrayT<T>& x)
{
    require_arg(x.rank() >= 1, "layer_norm expects rank >= 1");
    const int c = x.dim(x.rank() - 1);
    const std::size_t rows = x.numel() / c;
    ArrayT<T> y = ArrayT<T>::zeros(x.shape);
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(rows); ++r) {
        const T* xp = &x.data[static_cast<std::size_t>(r) * c];
        T* yp = &y.data[static_cast<std::size_t>(r) * c];
        double mean = 0.0;
        for (int i = 0; i < c; ++i)
            mean += xp[i];
        mean /= c;
        double var = 0.0;
        for (int i = 0; i < c; ++i)
            var += (xp[i] - mean) * (xp[i] - mean);
        var /= c;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (int i = 0; i < c; ++i)
            yp[i] = static_cast<T>((xp[i] - mean) * inv);
    }
    return y;
}

template <typename T>
void layer_norm_bwd(ArrayT<T>& dx, const ArrayT<T>& dy, const ArrayT<T>& x)
{
    const int c = x.dim(x.rank() - 1);
    const std::size_t rows = x.numel() / c;
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(rows); ++r) {
        const T* xp = &x.data[static_cast<std::size_t>(r) * c];
        const T* gp = &dy.data[static_cast<std::size_t>(r) * c];
        T* dp = &dx.data[static_cast<std::size_t>(r) * c];
        double mean = 0.0;
        for (int i = 0; i < c; ++i)
            mean += xp[i];
        mean /= c;
        double var = 0.0;
        for (int i = 0; i < c; ++i)
            var += (xp[i] - mean) * (xp[i] - mean);
        var /= c;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        double mean_g = 0.0, mean_gy = 0.0;
        for (int i = 0; i < c; ++i) {
            const double yi = (xp[i] - mean) * inv;
            mean_g += gp[i];
            mean_gy += gp[i] * yi;
        }
        mean_g /= c;
        mean_gy /= c;
        for (int i = 0; i < c; ++i) {
            const double yi = (xp[i] - mean) * inv;
            dp[i] += static_cast<T>(inv * (gp[i] - mean_g - yi * mean_gy));
        }
    }
}

template <typename T>
ArrayT<T> global_avg_pool(const ArrayT<T>& x)
{
    require_arg(x.rank() == 3, "pooling expects x[H,W,C]");
    const int c = x.dim(2);
    const std::size_t pixels = x.numel() / c;
    ArrayT<T> y = ArrayT<T>::zeros({c});
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t p = 0; p < pixels; ++p)
            acc += static_cast<double>(x.data[p * c + ch]);
        y.data[ch] = static_cast<T>(acc / static_cast<double>(pixels));
    }
    return y;
}

template <typename T>
void global_avg_pool_bwd(ArrayT<T>& dx, const ArrayT<T>& dy)
{
    const int c = dx.dim(2);
    const std::size_t pixels = dx.numel() / c;
    const double inv = 1.0 / static_cast<double>(pixels);
#pragma omp parallel for schedule(static)
    for (long long p = 0; p < static_cast<long long>(pixels); ++p)
        for (int ch = 0; ch < c; ++ch)
            dx.data[static_cast<std::size_t>(p) * c + ch]
                += static_cast<T>(inv * dy.data[ch]);
}

template <typename T>
ArrayT<T> softmax_axis(const ArrayT<T>& x, int axis)
{
    require_arg(axis >= 0 && axis < x.rank(), "softmax axis out of range");
    const int n = x.dim(axis);
    std::size_t inner = 1;
    for (int i = axis + 1; i < x.rank(); ++i)
        inner *= static_cast<std::size_t>(x.dim(i));
    const std::size_t outer = x.numel() / (inner * n);
    ArrayT<T> y = ArrayT<T>::zeros(x.shape);
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < static_cast<long long>(outer); ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = static_cast<std::size_t>(o) * n * inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i)
                mx = std::max(mx, static_cast<double>(x.data[base + i * inner]));
            double sum = 0.0;
            for (int i = 0; i < n; ++i)
                sum += std::exp(static_cast<double>(x.data[base + i * inner]) - mx);
            for (int i = 0; i < n; ++i)
                y.data[base + i * inner] = static_cast<T>(
                    std::exp(static_cast<double>(x.data[base + i * inner]) - mx) / sum);
        }
    return y;
}

template <typename T>
void softmax_axis_bwd(ArrayT<T>& dx, const ArrayT<T>& dy, const ArrayT<T>& y, int axis)
{
    const int n = y.dim(axis);
    std::size_t inner = 1;
    for (int i = axis + 1; i < y.rank(); ++i)
        inner *= static_cast<std::size_t>(y.dim(i));
    const std::size_t outer = y.numel() / (inner * n);
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < static_cast<long long>(outer); ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = static_cast<std::size_t>(o) * n * inner + in;
            double dot = 0.0;
            for (int i = 0; i < n; ++i)
                dot += static_cast<double>(y.data[base + i * inner]) * dy.data[base + i * inner];
            for (int i = 0; i < n; ++i)
                dx.data[base + i * inner] += static_cast<T>(
                    static_cast<double>(y.data[base + i * inner])
                    * (static_cast<double>(dy.data[base + i * inner]) - dot));
        }
}

template <typename T>
ArrayT<T> gelu(const ArrayT<T>& x)
{
    ArrayT<T> y = ArrayT<T>::zeros(x.shape);
    const long long n = static_cast<long long>(x.numel());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const double v = x.data[static_cast<std::size_t>(i)];
        y.data[static_cast<std::size_t>(i)]
            = static_cast<T>(0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)));
    }
    return y;
}

template <typename T>
void gelu_bwd(ArrayT<T>& dx, const ArrayT<T>& dy, const ArrayT<T>& x)
{
    const long long n = static_cast<long long>(x.numel());
    constexpr double inv_sqrt_2pi = 0.3989422804014326779;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const double v = x.data[static_cast<std::size_t>(i)];
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        dx.data[static_cast<std::size_t>(i)]
            += static_cast<T>(dy.data[static_cast<std::size_t>(i)] * (cdf + v * pdf));
    }
}

// Window origin of a neighborhood-attention query along one axis: centered
// when possible, shifted (never shrunk) at the borders, so every query
// attends to exactly kernel positions.
inline int na_window_start(int pos, int size, int kernel)
{
    return std::clamp(pos - (kernel - 1) / 2, 0, size - kernel);
}

// Multi-head neighborhood attention over a [H,W,C] map: scaled dot-product
// restricted to a kernel x kernel window around each query.
template <typename T>
ArrayT<T> na_forward(const ArrayT<T>& q, const ArrayT<T>& k, const ArrayT<T>& v, int kernel,
                     int heads)
{
    require_arg(q.rank() == 3 && q.same_shape(k) && q.same_shape(v),
                "attention inputs must share one [H,W,C] shape");
    const int h = q.dim(0), w = q.dim(1), c = q.dim(2);
    require_arg(kernel >= 1 && kernel % 2 == 1, "attention kernel must be odd");
    require_arg(kernel <= h && kernel <= w, "attention kernel larger than the map");
    require_arg(heads >= 1 && c % heads == 0, "head count must divide the channel width");
    const int dh = c / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    ArrayT<T> y = ArrayT<T>::zeros(q.shape);
    const int pixels = h * w;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < pixels; ++p) {
        const int i = p / w;
        const int j = p % w;
        const int si = na_window_start(i, h, kernel);
        const int sj = na_window_start(j, w, kernel);
        std::vector<double> logits(static_cast<std::size_t>(kernel) * kernel);
        for (int head = 0; head < heads; ++head) {
            const int c0 = head * dh;
            for (int ti = 0; ti < kernel; ++ti)
                for (int tj = 0; tj < kernel; ++tj) {
                    const std::size_t key = (static_cast<std::size_t>(si + ti) * w + sj + tj) * c;
                    double acc = 0.0;
                    for (int d = 0; d < dh; ++d)
                        acc += static_cast<double>(q.data[static_cast<std::size_t>(p) * c + c0 + d])
                               * k.data[key + c0 + d];
                    logits[static_cast<std::size_t>(ti) * kernel + tj] = acc * scale;
                }
            double mx = logits[0];
            for (double l : logits)
                mx = std::max(mx, l);
            double sum = 0.0;
            for (double& l : logits) {
                l = std::exp(l - mx);
                sum += l;
            }
            for (int d = 0; d < dh; ++d) {
                double acc = 0.0;
                for (int ti = 0; ti < kernel; ++ti)
                    for (int tj = 0; tj < kernel; ++tj) {
                        const std::size_t key
                            = (static_cast<std::size_t>(si + ti) * w + sj + tj) * c;
                        acc += logits[static_cast<std::size_t>(ti) * kernel + tj]
                               * v.data[key + c0 + d];
                    }
                y.data[static_cast<std::size_t>(p) * c + c0 + d] = static_cast<T>(acc / sum);
            }
        }
    }
    return y;
}

// Backward in two race-free passes: pass one is parallel over queries and
// produces dQ plus per-query probability / logit-gradient buffers; pass
// two is parallel over key positions and gathers dK and dV by scanning the
// queries whose windows can reach each key.
template <typename T>
void na_backward(ArrayT<T>& dq, ArrayT<T>& dk, ArrayT<T>& dv, const ArrayT<T>& dy,
                 const ArrayT<T>& q, const ArrayT<T>& k, const ArrayT<T>& v, int kernel,
                 int heads)
{
    const int h = q.dim(0), w = q.dim(1), c = q.dim(2);
    const int dh = c / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int pixels = h * w;
    const std::size_t win = static_cast<std::size_t>(kernel) * kernel;
    std::vector<double> probs(static_cast<std::size_t>(pixels) * heads * win);
    std::vector<double> dlogits(probs.size());
#pragma omp parallel for schedule(static)
    for (int p = 0; p < pixels; ++p) {
        const int i = p / w;
        const int j = p % w;
        const int si = na_window_start(i, h, kernel);
        const int sj = na_window_start(j, w, kernel);
        for (int head = 0; head < heads; ++head) {
            const int c0 = head * dh;
            double* prob = &probs[(static_cast<std::size_t>(p) * heads + head) * win];
            double* dlog = &dlogits[(static_cast<std::size_t>(p) * heads + head) * win];
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < win; ++t) {
                const int ti = static_cast<int>(t) / kernel;
                const int tj = static_cast<int>(t) % kernel;
                const std::size_t key = (static_cast<std::size_t>(si + ti) * w + sj + tj) * c;
                double acc = 0.0;
                for (int d = 0; d < dh; ++d)
                    acc += static_cast<double>(q.data[static_cast<std::size_t>(p) * c + c0 + d])
                           * k.data[key + c0 + d];
                prob[t] = acc * scale;
                mx = std::max(mx, prob[t]);
            }
            double sum = 0.0;
            for (std::size_t t = 0; t < win; ++t) {
                prob[t] = std::exp(prob[t] - mx);
                sum += prob[t];
            }
            double dot = 0.0;
            for (std::size_t t = 0; t < win; ++t) {
                prob[t] /= sum;
                const int ti = static_cast<int>(t) / kernel;
                const int tj = static_cast<int>(t) % kernel;
                const std::size_t key = (static_cast<std::size_t>(si + ti) * w + sj + tj) * c;
                double dattn = 0.0;
                for (int d = 0; d < dh; ++d)
                    dattn += static_cast<double>(dy.data[static_cast<std::size_t>(p) * c + c0 + d])
                             * v.data[key + c0 + d];
                dlog[t] = dattn;
                dot += prob[t] * dattn;
            }
            for (std::size_t t = 0; t < win; ++t)
                dlog[t] = prob[t] * (dlog[t] - dot);
            for (int d = 0; d < dh; ++d) {
                double acc = 0.0;
                for (std::size_t t = 0; t < win; ++t) {
                    const int ti = static_cast<int>(t) / kernel;
                    const int tj = static_cast<int>(t) % kernel;
                    const std::size_t key = (static_cast<std::size_t>(si + ti) * w + sj + tj) * c;
                    acc += dlog[t] * k.data[key + c0 + d];
                }
                dq.data[static_cast<std::size_t>(p) * c + c0 + d]
                    += static_cast<T>(acc * scale);
            }
        }
    }
#pragma omp parallel for schedule(static)
    for (int kp = 0; kp < pixels; ++kp) {
        const int ki = kp / w;
        const int kj = kp % w;
        for (int head = 0; head < heads; ++head) {
            const int c0 = head * dh;
            for (int d = 0; d < dh; ++d) {
                double acc_k = 0.0;
                double acc_v = 0.0;
                for (int qi = std::max(0, ki - kernel + 1); qi <= std::min(h - 1, ki + kernel - 1);
                     ++qi) {
                    const int si = na_window_start(qi, h, kernel);
                    const int ti = ki - si;
                    if (ti < 0 || ti >= kernel)
                        continue;
                    for (int qj = std::max(0, kj - kernel + 1);
                         qj <= std::min(w - 1, kj + kernel - 1); ++qj) {
                        const int sj = na_window_start(qj, w, kernel);
                        const int tj = kj - sj;
                        if (tj < 0 || tj >= kernel)
                            continue;
                        const std::size_t qp = static_cast<std::size_t>(qi) * w + qj;
                        const std::size_t t = static_cast<std::size_t>(ti) * kernel + tj;
                        const std::size_t slot = (qp * heads + head) * win + t;
                        acc_k += dlogits[slot]
                                 * q.data[qp * c + c0 + d];
                        acc_v += probs[slot]
                                 * dy.data[qp * c + c0 + d];
                    }
                }
                dk.data[static_cast<std::size_t>(kp) * c + c0 + d] += static_cast<T>(acc_k * scale);
                dv.data[static_cast<std::size_t>(kp) * c + c0 + d] += static_cast<T>(acc_v);
            }
        }
    }
}

} // namespace iqc::kern
