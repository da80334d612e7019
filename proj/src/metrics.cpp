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

#include "iqc/metrics.hpp"

#include "iqc/common.hpp"
#include "iqc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace iqc {

namespace {

void require_pair(const ErpImage& ref, const ErpImage& dist)
{
    validate_image(ref);
    validate_image(dist);
    require_arg(ref.width == dist.width && ref.height == dist.height
                    && ref.channels == dist.channels,
                "reference and distorted rasters must have equal shape");
}

MetricResult psnr_from_mse(std::string name, double mse)
{
    MetricResult r;
    r.name = std::move(name);
    if (mse <= 0.0) {
        r.value = std::numeric_limits<double>::infinity();
        r.infinite = true;
    } else {
        r.value = 10.0 * std::log10(1.0 / mse);
    }
    return r;
}

// Cosine of the latitude of row j on an H-row ERP raster.
double row_weight(int j, int h)
{
    return std::cos((j + 0.5 - h / 2.0) * kPi / h);
}

// Partial sums are collected per row and combined serially in row order so
// the result does not depend on the thread count.
double mse_rows(const ErpImage& ref, const ErpImage& dist, bool weighted, double* wsum_out)
{
    const int h = ref.height;
    const int w = ref.width;
    const int c = ref.channels;
    std::vector<double> row_sum(h, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        double acc = 0.0;
        const std::size_t base = static_cast<std::size_t>(y) * w * c;
        for (std::size_t i = 0; i < static_cast<std::size_t>(w) * c; ++i) {
            const double d = static_cast<double>(ref.pixels[base + i]) - dist.pixels[base + i];
            acc += d * d;
        }
        row_sum[y] = acc / c;
    }
    double num = 0.0;
    double den = 0.0;
    for (int y = 0; y < h; ++y) {
        const double wj = weighted ? row_weight(y, h) : 1.0;
        num += wj * row_sum[y];
        den += wj * w;
    }
    if (wsum_out != nullptr)
        *wsum_out = den;
    return num / den;
}

} // namespace

MetricResult psnr(const ErpImage& ref, const ErpImage& dist)
{
    require_pair(ref, dist);
    return psnr_from_mse("psnr", mse_rows(ref, dist, false, nullptr));
}

MetricResult ws_psnr(const ErpImage& ref, const ErpImage& dist)
{
    require_pair(ref, dist);
    return psnr_from_mse("ws_psnr", mse_rows(ref, dist, true, nullptr));
}

MetricResult s_psnr(const ErpImage& ref, const ErpImage& dist, int n_points)
{
    require_pair(ref, dist);
    require_arg(n_points >= 100, "sphere sampling needs at least 100 points");
    const std::vector<SphericalCoord> pts = fibonacci_sphere(n_points);
    std::vector<double> per_point(n_points, 0.0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_points; ++i) {
        double acc = 0.0;
        for (int c = 0; c < ref.channels; ++c) {
            const double d = static_cast<double>(sample_erp(ref, c, pts[i], Interp::Nearest))
                             - sample_erp(dist, c, pts[i], Interp::Nearest);
            acc += d * d;
        }
        per_point[i] = acc / ref.channels;
    }
    const double mse = std::accumulate(per_point.begin(), per_point.end(), 0.0) / n_points;
    return psnr_from_mse("s_psnr", mse);
}

namespace {

// Craster parabolic plane coordinates of raster position (i, j), with the
// plane extents x in [-sqrt(3*pi), sqrt(3*pi)] and y in +/- sqrt(3*pi)/2.
struct CppSample {
    bool valid = false;
    SphericalCoord dir;
};

CppSample cpp_backproject(int i, int j, int w, int h)
{
    const double x_max = std::sqrt(3.0 * kPi);
    const double x = (2.0 * (i + 0.5) / w - 1.0) * x_max;
    const double y = (1.0 - 2.0 * (j + 0.5) / h) * x_max / 2.0;
    const double lat = 3.0 * std::asin(std::clamp(y / x_max, -0.5, 0.5));
    const double denom = std::sqrt(3.0 / kPi) * (2.0 * std::cos(2.0 * lat / 3.0) - 1.0);
    CppSample s;
    if (std::abs(denom) < 1e-12)
        return s;
    const double lon = x / denom;
    if (std::abs(lon) > kPi)
        return s;
    s.valid = true;
    s.dir = {lat, lon};
    return s;
}

} // namespace

std::vector<unsigned char> cpp_mask(int w, int h)
{
    require_arg(w > 0 && h > 0, "raster dimensions must be positive");
    std::vector<unsigned char> mask(static_cast<std::size_t>(w) * h, 0);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i)
            mask[static_cast<std::size_t>(j) * w + i] = cpp_backproject(i, j, w, h).valid ? 1 : 0;
    return mask;
}

MetricResult cpp_psnr(const ErpImage& ref, const ErpImage& dist)
{
    require_pair(ref, dist);
    const int w = ref.width;
    const int h = ref.height;
    std::vector<double> row_sum(h, 0.0);
    std::vector<long> row_cnt(h, 0);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < h; ++j) {
        double acc = 0.0;
        long cnt = 0;
        for (int i = 0; i < w; ++i) {
            const CppSample s = cpp_backproject(i, j, w, h);
            if (!s.valid)
                continue;
            double pix = 0.0;
            for (int c = 0; c < ref.channels; ++c) {
                const double d = static_cast<double>(sample_erp(ref, c, s.dir, Interp::Bilinear))
                                 - sample_erp(dist, c, s.dir, Interp::Bilinear);
                pix += d * d;
            }
            acc += pix / ref.channels;
            ++cnt;
        }
        row_sum[j] = acc;
        row_cnt[j] = cnt;
    }
    double num = 0.0;
    long cnt = 0;
    for (int j = 0; j < h; ++j) {
        num += row_sum[j];
        cnt += row_cnt[j];
    }
    require_domain(cnt > 0, "no valid parabolic-projection samples");
    return psnr_from_mse("cpp_psnr", num / cnt);
}

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_taps()
{
    std::vector<double> g(kWin);
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += g[i];
    }
    for (double& v : g)
        v /= sum;
    return g;
}

std::vector<double> luma_plane(const ErpImage& img)
{
    const ErpImage y = to_luma(img);
    return std::vector<double>(y.pixels.begin(), y.pixels.end());
}

// Separable valid-region filter: the Gaussian window factorizes, so a
// horizontal pass then a vertical pass equals the full 11x11 weighted sum.
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h,
                                 const std::vector<double>& taps)
{
    const int ow = w - kWin + 1;
    const int oh = h - kWin + 1;
    std::vector<double> mid(static_cast<std::size_t>(h) * ow);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k)
                acc += taps[k] * in[static_cast<std::size_t>(y) * w + x + k];
            mid[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k)
                acc += taps[k] * mid[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

struct SsimMap {
    std::vector<double> map;
    int w = 0;
    int h = 0;
};

SsimMap ssim_map(const ErpImage& ref, const ErpImage& dist)
{
    require_pair(ref, dist);
    require_domain(ref.width >= kWin && ref.height >= kWin,
                   "raster smaller than the similarity window");
    const int w = ref.width;
    const int h = ref.height;
    const std::vector<double> taps = gaussian_taps();
    const std::vector<double> a = luma_plane(ref);
    const std::vector<double> b = luma_plane(dist);
    const std::size_t n = a.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const std::vector<double> mu1 = filter_valid(a, w, h, taps);
    const std::vector<double> mu2 = filter_valid(b, w, h, taps);
    const std::vector<double> m11 = filter_valid(aa, w, h, taps);
    const std::vector<double> m22 = filter_valid(bb, w, h, taps);
    const std::vector<double> m12 = filter_valid(ab, w, h, taps);
    SsimMap out;
    out.w = w - kWin + 1;
    out.h = h - kWin + 1;
    out.map.resize(mu1.size());
    for (std::size_t i = 0; i < mu1.size(); ++i) {
        const double s11 = m11[i] - mu1[i] * mu1[i];
        const double s22 = m22[i] - mu2[i] * mu2[i];
        const double s12 = m12[i] - mu1[i] * mu2[i];
        out.map[i] = ((2.0 * mu1[i] * mu2[i] + kC1) * (2.0 * s12 + kC2))
                     / ((mu1[i] * mu1[i] + mu2[i] * mu2[i] + kC1) * (s11 + s22 + kC2));
    }
    return out;
}

} // namespace

MetricResult ssim(const ErpImage& ref, const ErpImage& dist)
{
    const SsimMap m = ssim_map(ref, dist);
    const double mean = std::accumulate(m.map.begin(), m.map.end(), 0.0)
                        / static_cast<double>(m.map.size());
    return {"ssim", mean, false};
}

MetricResult ws_ssim(const ErpImage& ref, const ErpImage& dist)
{
    const SsimMap m = ssim_map(ref, dist);
    const int margin = (kWin - 1) / 2;
    double num = 0.0;
    double den = 0.0;
    for (int y = 0; y < m.h; ++y) {
        const double wj = row_weight(y + margin, dist.height);
        double row = 0.0;
        for (int x = 0; x < m.w; ++x)
            row += m.map[static_cast<std::size_t>(y) * m.w + x];
        num += wj * row;
        den += wj * m.w;
    }
    return {"ws_ssim", num / den, false};
}

MetricResult spatial_information(const ErpImage& img)
{
    validate_image(img);
    require_domain(img.width >= 3 && img.height >= 3,
                   "raster smaller than the gradient stencil");
    const std::vector<double> y = luma_plane(img);
    const int w = img.width;
    const int h = img.height;
    const auto at = [&](int x, int j) { return y[static_cast<std::size_t>(j) * w + x]; };
    std::vector<double> row_sum(h, 0.0), row_sq(h, 0.0);
#pragma omp parallel for schedule(static)
    for (int j = 1; j < h - 1; ++j) {
        double s = 0.0, sq = 0.0;
        for (int i = 1; i < w - 1; ++i) {
            const double gx = at(i + 1, j - 1) + 2.0 * at(i + 1, j) + at(i + 1, j + 1)
                              - at(i - 1, j - 1) - 2.0 * at(i - 1, j) - at(i - 1, j + 1);
            const double gy = at(i - 1, j + 1) + 2.0 * at(i, j + 1) + at(i + 1, j + 1)
                              - at(i - 1, j - 1) - 2.0 * at(i, j - 1) - at(i + 1, j - 1);
            const double mag = std::hypot(gx, gy);
            s += mag;
            sq += mag * mag;
        }
        row_sum[j] = s;
        row_sq[j] = sq;
    }
    const double n = static_cast<double>(w - 2) * (h - 2);
    const double mean = std::accumulate(row_sum.begin(), row_sum.end(), 0.0) / n;
    const double mean_sq = std::accumulate(row_sq.begin(), row_sq.end(), 0.0) / n;
    const double var = std::max(0.0, mean_sq - mean * mean);
    return {"si", std::sqrt(var), false};
}

MetricResult colorfulness(const ErpImage& img)
{
    validate_image(img);
    require_arg(img.channels == 3, "colorfulness needs an RGB raster");
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    double s_rg = 0.0, s_rg2 = 0.0, s_yb = 0.0, s_yb2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const float* p = &img.pixels[i * 3];
        const double rg = static_cast<double>(p[0]) - p[1];
        const double yb = 0.5 * (static_cast<double>(p[0]) + p[1]) - p[2];
        s_rg += rg;
        s_rg2 += rg * rg;
        s_yb += yb;
        s_yb2 += yb * yb;
    }
    const double mu_rg = s_rg / n;
    const double mu_yb = s_yb / n;
    const double var_rg = std::max(0.0, s_rg2 / n - mu_rg * mu_rg);
    const double var_yb = std::max(0.0, s_yb2 / n - mu_yb * mu_yb);
    const double cf = std::sqrt(var_rg + var_yb)
                      + 0.3 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb);
    return {"cf", cf, false};
}

std::vector<MetricResult> full_reference_suite(const ErpImage& ref, const ErpImage& dist)
{
    return {psnr(ref, dist),   ws_psnr(ref, dist), s_psnr(ref, dist),
            cpp_psnr(ref, dist), ssim(ref, dist),  ws_ssim(ref, dist)};
}

std::vector<MetricResult> content_suite(const ErpImage& img)
{
    return {spatial_information(img), colorfulness(img)};
}

} // namespace iqc
