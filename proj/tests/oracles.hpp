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

// Naive reference computations used only by tests.  Everything here is
// written as direct, unoptimized summation so library results can be
// cross-checked against an independently structured second opinion.

#pragma once

#include "iqc/geometry.hpp"
#include "iqc/image.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

// Forward gnomonic projection: direction -> continuous pixel coords in
// the viewport raster.  Inverse of the library's per-pixel backprojection,
// derived independently from the tangent-plane equations.
struct PlanePoint {
    double x = 0.0;
    double y = 0.0;
    bool front = false; // direction on the visible hemisphere
};

inline PlanePoint gnomonic_forward(const iqc::ViewportSpec& spec, const iqc::SphericalCoord& dir)
{
    const double lat0 = spec.center.lat;
    const double lon0 = spec.center.lon;
    const double dl = dir.lon - lon0;
    const double cos_c = std::sin(lat0) * std::sin(dir.lat)
                         + std::cos(lat0) * std::cos(dir.lat) * std::cos(dl);
    PlanePoint p;
    p.front = cos_c > 0.0;
    if (!p.front)
        return p;
    const double u = std::cos(dir.lat) * std::sin(dl) / cos_c;
    const double v = (std::cos(lat0) * std::sin(dir.lat)
                      - std::sin(lat0) * std::cos(dir.lat) * std::cos(dl))
                     / cos_c;
    const double half_x = std::tan(spec.fov_x_deg * iqc::kPi / 360.0);
    const double half_y = std::tan(spec.fov_y_deg * iqc::kPi / 360.0);
    p.x = (u / half_x + 1.0) * 0.5 * spec.out_w - 0.5;
    p.y = (1.0 - v / half_y) * 0.5 * spec.out_h - 0.5;
    return p;
}

// Plain and latitude-weighted PSNR by direct per-sample accumulation.
inline double psnr_plain(const iqc::ErpImage& ref, const iqc::ErpImage& dist)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.pixels.size(); ++i) {
        const double d = static_cast<double>(ref.pixels[i]) - dist.pixels[i];
        acc += d * d;
    }
    return 10.0 * std::log10(1.0 / (acc / static_cast<double>(ref.pixels.size())));
}

inline double ws_psnr(const iqc::ErpImage& ref, const iqc::ErpImage& dist)
{
    double num = 0.0;
    double den = 0.0;
    for (int y = 0; y < ref.height; ++y) {
        const double w = std::cos((y + 0.5 - ref.height / 2.0) * iqc::kPi / ref.height);
        for (int x = 0; x < ref.width; ++x) {
            den += w;
            for (int c = 0; c < ref.channels; ++c) {
                const std::size_t i = ref.index(x, y, c);
                const double d = static_cast<double>(ref.pixels[i]) - dist.pixels[i];
                num += w * d * d;
            }
        }
    }
    const double mse = num / (den * ref.channels);
    return 10.0 * std::log10(1.0 / mse);
}

// Structural similarity with an explicit (non-separable) 11x11 Gaussian
// window; returns both the plain mean and the latitude-weighted mean.
struct SsimPair {
    double plain = 0.0;
    double weighted = 0.0;
};

inline SsimPair ssim_both(const iqc::ErpImage& ref, const iqc::ErpImage& dist)
{
    constexpr int kWin = 11;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    double taps[kWin];
    double tap_sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        taps[i] = std::exp(-(d * d) / (2.0 * 1.5 * 1.5));
        tap_sum += taps[i];
    }
    for (double& t : taps)
        t /= tap_sum;

    const iqc::ErpImage la = iqc::to_luma(ref);
    const iqc::ErpImage lb = iqc::to_luma(dist);
    const int w = ref.width;
    const int h = ref.height;
    const int ow = w - kWin + 1;
    const int oh = h - kWin + 1;

    double plain_acc = 0.0;
    double wnum = 0.0;
    double wden = 0.0;
    for (int oy = 0; oy < oh; ++oy) {
        const double rw = std::cos((oy + 5 + 0.5 - h / 2.0) * iqc::kPi / h);
        for (int ox = 0; ox < ow; ++ox) {
            double mu1 = 0.0, mu2 = 0.0, m11 = 0.0, m22 = 0.0, m12 = 0.0;
            for (int ky = 0; ky < kWin; ++ky) {
                for (int kx = 0; kx < kWin; ++kx) {
                    const double wt = taps[ky] * taps[kx];
                    const double a = la.pixels[la.index(ox + kx, oy + ky, 0)];
                    const double b = lb.pixels[lb.index(ox + kx, oy + ky, 0)];
                    mu1 += wt * a;
                    mu2 += wt * b;
                    m11 += wt * a * a;
                    m22 += wt * b * b;
                    m12 += wt * a * b;
                }
            }
            const double s11 = m11 - mu1 * mu1;
            const double s22 = m22 - mu2 * mu2;
            const double s12 = m12 - mu1 * mu2;
            const double v = ((2.0 * mu1 * mu2 + kC1) * (2.0 * s12 + kC2))
                             / ((mu1 * mu1 + mu2 * mu2 + kC1) * (s11 + s22 + kC2));
            plain_acc += v;
            wnum += rw * v;
            wden += rw;
        }
    }
    SsimPair out;
    out.plain = plain_acc / (static_cast<double>(ow) * oh);
    out.weighted = wnum / wden;
    return out;
}

// Colorfulness via two-pass mean/variance of the opponent channels.
inline double colorfulness(const iqc::ErpImage& img)
{
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    std::vector<double> rg(n), yb(n);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double r = img.pixels[img.index(x, y, 0)];
            const double g = img.pixels[img.index(x, y, 1)];
            const double b = img.pixels[img.index(x, y, 2)];
            const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
            rg[i] = r - g;
            yb[i] = 0.5 * (r + g) - b;
        }
    }
    auto mean_var = [n](const std::vector<double>& xs) {
        double m = 0.0;
        for (double v : xs)
            m += v;
        m /= static_cast<double>(n);
        double var = 0.0;
        for (double v : xs)
            var += (v - m) * (v - m);
        return std::pair<double, double> {m, var / static_cast<double>(n)};
    };
    const auto [m_rg, v_rg] = mean_var(rg);
    const auto [m_yb, v_yb] = mean_var(yb);
    return std::sqrt(v_rg + v_yb) + 0.3 * std::sqrt(m_rg * m_rg + m_yb * m_yb);
}

// Spatial information: Sobel magnitude standard deviation over interior
// pixels of the luma plane, two-pass variance.
inline double spatial_information(const iqc::ErpImage& img)
{
    const iqc::ErpImage y = iqc::to_luma(img);
    std::vector<double> mags;
    for (int j = 1; j + 1 < y.height; ++j) {
        for (int i = 1; i + 1 < y.width; ++i) {
            auto at = [&](int xx, int yy) {
                return static_cast<double>(y.pixels[y.index(xx, yy, 0)]);
            };
            const double gx = at(i + 1, j - 1) + 2.0 * at(i + 1, j) + at(i + 1, j + 1)
                              - at(i - 1, j - 1) - 2.0 * at(i - 1, j) - at(i - 1, j + 1);
            const double gy = at(i - 1, j + 1) + 2.0 * at(i, j + 1) + at(i + 1, j + 1)
                              - at(i - 1, j - 1) - 2.0 * at(i, j - 1) - at(i + 1, j - 1);
            mags.push_back(std::hypot(gx, gy));
        }
    }
    double m = 0.0;
    for (double v : mags)
        m += v;
    m /= static_cast<double>(mags.size());
    double var = 0.0;
    for (double v : mags)
        var += (v - m) * (v - m);
    return std::sqrt(var / static_cast<double>(mags.size()));
}

// Uniform random test raster in [lo, hi].
inline iqc::ErpImage random_image(int w, int h, int c, std::mt19937_64& rng, float lo = 0.0f,
                                  float hi = 1.0f)
{
    iqc::ErpImage img = iqc::make_image(w, h, c);
    std::uniform_real_distribution<float> u(lo, hi);
    for (float& p : img.pixels)
        p = u(rng);
    return img;
}

// Smooth sphere-continuous test pattern: a few low-frequency waves of the
// unit direction vector, so ERP seams and poles carry no discontinuity.
inline iqc::ErpImage smooth_sphere_image(int w, int h, int c)
{
    iqc::ErpImage img = iqc::make_image(w, h, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const iqc::SphericalCoord d = iqc::erp_to_sphere(x, y, w, h);
            const double vx = std::cos(d.lat) * std::cos(d.lon);
            const double vy = std::cos(d.lat) * std::sin(d.lon);
            const double vz = std::sin(d.lat);
            for (int ch = 0; ch < c; ++ch) {
                const double v = 0.5
                                 + 0.2 * std::sin(2.0 * vx + 1.0 * ch)
                                 + 0.15 * std::cos(3.0 * vy - 0.5 * ch)
                                 + 0.15 * std::sin(2.0 * vz + 0.25 * ch);
                img.pixels[img.index(x, y, ch)] = static_cast<float>(v);
            }
        }
    }
    return img;
}

// Continuous scalar field evaluated at an arbitrary direction; matches
// smooth_sphere_image channel 0 so viewport samples can be compared with
// ideal values.
inline double smooth_field(const iqc::SphericalCoord& d, int ch = 0)
{
    const double vx = std::cos(d.lat) * std::cos(d.lon);
    const double vy = std::cos(d.lat) * std::sin(d.lon);
    const double vz = std::sin(d.lat);
    return 0.5 + 0.2 * std::sin(2.0 * vx + 1.0 * ch) + 0.15 * std::cos(3.0 * vy - 0.5 * ch)
           + 0.15 * std::sin(2.0 * vz + 0.25 * ch);
}

} // namespace oracle
