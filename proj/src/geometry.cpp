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

#include "iqc/geometry.hpp"

#include "iqc/common.hpp"

#include <algorithm>
#include <cmath>

namespace iqc {

double wrap_longitude(double lon)
{
    double x = std::fmod(lon + kPi, 2.0 * kPi);
    if (x < 0.0)
        x += 2.0 * kPi;
    return x - kPi;
}

SphericalCoord make_spherical(double lat, double lon)
{
    require_arg(lat >= -kPi / 2 - 1e-12 && lat <= kPi / 2 + 1e-12,
                "latitude outside [-pi/2, pi/2]");
    return {std::clamp(lat, -kPi / 2, kPi / 2), wrap_longitude(lon)};
}

void validate_viewport(const ViewportSpec& spec)
{
    require_arg(spec.fov_x_deg > 0.0 && spec.fov_x_deg < 180.0
                    && spec.fov_y_deg > 0.0 && spec.fov_y_deg < 180.0,
                "field of view must lie in (0, 180) degrees");
    require_arg(spec.out_w >= 1 && spec.out_h >= 1, "viewport size must be positive");
    require_arg(spec.center.lat >= -kPi / 2 && spec.center.lat <= kPi / 2,
                "viewport center latitude outside [-pi/2, pi/2]");
}

SphericalCoord erp_to_sphere(int u, int v, int w, int h)
{
    require_arg(w > 0 && h > 0, "raster dimensions must be positive");
    require_arg(u >= 0 && u < w && v >= 0 && v < h, "pixel outside raster");
    const double lon = 2.0 * kPi * (u + 0.5) / w - kPi;
    const double lat = kPi / 2 - kPi * (v + 0.5) / h;
    return {lat, lon};
}

SphericalCoord gnomonic_backproject(const ViewportSpec& spec, int x, int y)
{
    validate_viewport(spec);
    require_arg(x >= 0 && x < spec.out_w && y >= 0 && y < spec.out_h,
                "pixel outside viewport");
    const double half_x = std::tan(spec.fov_x_deg * kPi / 360.0);
    const double half_y = std::tan(spec.fov_y_deg * kPi / 360.0);
    const double u = half_x * (2.0 * (x + 0.5) / spec.out_w - 1.0);
    const double v = half_y * (1.0 - 2.0 * (y + 0.5) / spec.out_h);
    const double rho = std::hypot(u, v);
    const double lat0 = spec.center.lat;
    const double lon0 = spec.center.lon;
    if (rho == 0.0)
        return {lat0, wrap_longitude(lon0)};
    const double c = std::atan(rho);
    const double sin_c = std::sin(c);
    const double cos_c = std::cos(c);
    const double lat = std::asin(cos_c * std::sin(lat0) + v * sin_c * std::cos(lat0) / rho);
    const double lon = lon0
                       + std::atan2(u * sin_c,
                                    rho * cos_c * std::cos(lat0) - v * sin_c * std::sin(lat0));
    return {lat, wrap_longitude(lon)};
}

namespace {

int wrap_col(int x, int w)
{
    int r = x % w;
    if (r < 0)
        r += w;
    return r;
}

} // namespace

float sample_erp(const ErpImage& img, int c, const SphericalCoord& dir, Interp interp)
{
    const int w = img.width;
    const int h = img.height;
    const double uf = (wrap_longitude(dir.lon) + kPi) / (2.0 * kPi) * w - 0.5;
    const double vf = (kPi / 2 - dir.lat) / kPi * h - 0.5;
    if (interp == Interp::Nearest) {
        const int x = wrap_col(static_cast<int>(std::lround(uf)), w);
        const int y = std::clamp(static_cast<int>(std::lround(vf)), 0, h - 1);
        return img.at(x, y, c);
    }
    const double xf = std::floor(uf);
    const double yf = std::floor(vf);
    const double fx = uf - xf;
    const double fy = vf - yf;
    const int x0 = wrap_col(static_cast<int>(xf), w);
    const int x1 = wrap_col(static_cast<int>(xf) + 1, w);
    const int y0 = std::clamp(static_cast<int>(yf), 0, h - 1);
    const int y1 = std::clamp(static_cast<int>(yf) + 1, 0, h - 1);
    const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
    const double bot = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
    return static_cast<float>((1.0 - fy) * top + fy * bot);
}

ErpImage extract_viewport(const ErpImage& img, const ViewportSpec& spec, Interp interp)
{
    validate_image(img);
    validate_viewport(spec);
    ErpImage out;
    out.width = spec.out_w;
    out.height = spec.out_h;
    out.channels = img.channels;
    out.pixels.resize(static_cast<std::size_t>(spec.out_w) * spec.out_h * img.channels);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < spec.out_h; ++y) {
        for (int x = 0; x < spec.out_w; ++x) {
            const SphericalCoord dir = gnomonic_backproject(spec, x, y);
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) = sample_erp(img, c, dir, interp);
        }
    }
    return out;
}

ErpImage extract_viewport_nearest(const ErpImage& img, const ViewportSpec& spec)
{
    return extract_viewport(img, spec, Interp::Nearest);
}

SamplingPlan equatorial_plan(int m, double offset_deg, double fov_deg, int size,
                             double lon0_deg)
{
    require_arg(m >= 1, "plan needs at least one viewport");
    require_arg(offset_deg > 0.0, "viewport spacing must be positive");
    require_arg(m * offset_deg <= 360.0 + 1e-9, "plan exceeds 360 degrees");
    SamplingPlan plan;
    plan.name = "equatorial";
    plan.viewports.reserve(m);
    for (int k = 0; k < m; ++k) {
        ViewportSpec spec;
        spec.center = {0.0, wrap_longitude((lon0_deg + k * offset_deg) * kPi / 180.0)};
        spec.fov_x_deg = fov_deg;
        spec.fov_y_deg = fov_deg;
        spec.out_w = size;
        spec.out_h = size;
        validate_viewport(spec);
        plan.viewports.push_back(spec);
    }
    return plan;
}

std::vector<SphericalCoord> fibonacci_sphere(int n)
{
    require_arg(n >= 1, "lattice needs at least one point");
    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
    std::vector<SphericalCoord> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        pts.push_back({std::asin(std::clamp(z, -1.0, 1.0)), wrap_longitude(i * golden_angle)});
    }
    return pts;
}

SamplingPlan spherical_plan(int n, double fov_deg, int size)
{
    SamplingPlan plan;
    plan.name = "spherical";
    plan.viewports.reserve(n);
    for (const SphericalCoord& dir : fibonacci_sphere(n)) {
        ViewportSpec spec;
        spec.center = dir;
        spec.fov_x_deg = fov_deg;
        spec.fov_y_deg = fov_deg;
        spec.out_w = size;
        spec.out_h = size;
        validate_viewport(spec);
        plan.viewports.push_back(spec);
    }
    return plan;
}

} // namespace iqc
