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
#include <vector>

// Plain serial reference implementations of the heavy kernels, written
// with independent loop structure.  They exist to pin down the parallel
// kernels in tests and in the benchmark tool; nothing in the library
// depends on them.
namespace iqc::ref {

template <typename T>
ArrayT<T> conv2d(const ArrayT<T>& x, const ArrayT<T>& w, const ArrayT<T>* bias, int stride,
                 int pad)
{
    const int h = x.dim(0), wd = x.dim(1), ci = x.dim(2);
    const int kh = w.dim(0), kw = w.dim(1), co = w.dim(3);
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    ArrayT<T> y = ArrayT<T>::zeros({oh, ow, co});
    for (int c = 0; c < co; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
                for (int ic = 0; ic < ci; ++ic) {
                    const T wv = w.data[((static_cast<std::size_t>(ky) * kw + kx) * ci + ic) * co + c];
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h)
                            continue;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= wd)
                                continue;
                            y.data[(static_cast<std::size_t>(oy) * ow + ox) * co + c]
                                += wv * x.data[(static_cast<std::size_t>(iy) * wd + ix) * ci + ic];
                        }
                    }
                }
    if (bias != nullptr)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int c = 0; c < co; ++c)
                    y.data[(static_cast<std::size_t>(oy) * ow + ox) * co + c] += bias->data[c];
    return y;
}

template <typename T>
ArrayT<T> matmul(const ArrayT<T>& a, const ArrayT<T>& b)
{
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    ArrayT<T> y = ArrayT<T>::zeros({n, m});
    for (int t = 0; t < k; ++t)
        for (int i = 0; i < n; ++i) {
            const T av = a.data[static_cast<std::size_t>(i) * k + t];
            for (int j = 0; j < m; ++j)
                y.data[static_cast<std::size_t>(i) * m + j]
                    += av * b.data[static_cast<std::size_t>(t) * m + j];
        }
    return y;
}

template <typename T>
ArrayT<T> na_forward(const ArrayT<T>& q, const ArrayT<T>& k, const ArrayT<T>& v, int kernel,
                     int heads)
{
    const int h = q.dim(0), w = q.dim(1), c = q.dim(2);
    const int dh = c / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    ArrayT<T> y = ArrayT<T>::zeros(q.shape);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const int si = std::clamp(i - (kernel - 1) / 2, 0, h - kernel);
            const int sj = std::clamp(j - (kernel - 1) / 2, 0, w - kernel);
            for (int head = 0; head < heads; ++head) {
                std::vector<double> weights;
                weights.reserve(static_cast<std::size_t>(kernel) * kernel);
                double mx = -1e300;
                for (int ki = si; ki < si + kernel; ++ki)
                    for (int kj = sj; kj < sj + kernel; ++kj) {
                        double dot = 0.0;
                        for (int d = 0; d < dh; ++d)
                            dot += static_cast<double>(
                                       q.data[(static_cast<std::size_t>(i) * w + j) * c
                                              + head * dh + d])
                                   * k.data[(static_cast<std::size_t>(ki) * w + kj) * c
                                            + head * dh + d];
                        weights.push_back(dot * scale);
                        mx = std::max(mx, dot * scale);
                    }
                double sum = 0.0;
                for (double& wv : weights) {
                    wv = std::exp(wv - mx);
                    sum += wv;
                }
                std::size_t t = 0;
                std::vector<double> acc(static_cast<std::size_t>(dh), 0.0);
                for (int ki = si; ki < si + kernel; ++ki)
                    for (int kj = sj; kj < sj + kernel; ++kj, ++t)
                        for (int d = 0; d < dh; ++d)
                            acc[static_cast<std::size_t>(d)]
                                += weights[t]
                                   * v.data[(static_cast<std::size_t>(ki) * w + kj) * c
                                            + head * dh + d];
                for (int d = 0; d < dh; ++d)
                    y.data[(static_cast<std::size_t>(i) * w + j) * c + head * dh + d]
                        = static_cast<T>(acc[static_cast<std::size_t>(d)] / sum);
            }
        }
    return y;
}

} // namespace iqc::ref
