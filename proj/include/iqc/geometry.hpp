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

#include "iqc/image.hpp"

#include <string>
#include <vector>

namespace iqc {

// Latitude in [-pi/2, pi/2], longitude in [-pi, pi), both radians.
struct SphericalCoord {
    double lat = 0.0;
    double lon = 0.0;
};

// Wraps any finite longitude into [-pi, pi).
double wrap_longitude(double lon);

// Validates latitude range and wraps longitude.
SphericalCoord make_spherical(double lat, double lon);

// Rectilinear viewport: gnomonic projection plane tangent at `center`.
// Row 0 of the output raster maps to the upper edge (higher latitude when
// the center sits on the equator); pixel centers are at half-integer
// offsets so the projection of pixel (x, y) is reproducible exactly.
struct ViewportSpec {
    SphericalCoord center;
    double fov_x_deg = 90.0;
    double fov_y_deg = 90.0;
    int out_w = 224;
    int out_h = 224;
};

void validate_viewport(const ViewportSpec& spec);

// Named list of viewports cut from one omnidirectional image.
struct SamplingPlan {
    std::string name;
    std::vector<ViewportSpec> viewports;
};

// Direction of the center of ERP pixel (u, v) on a w x h raster:
//   lon = 2*pi*(u + 0.5)/w - pi,  lat = pi/2 - pi*(v + 0.5)/h.
SphericalCoord erp_to_sphere(int u, int v, int w, int h);

// Direction seen by the center of viewport pixel (x, y).
SphericalCoord gnomonic_backproject(const ViewportSpec& spec, int x, int y);

enum class Interp { Bilinear, Nearest };

// Samples channel c of an ERP raster at a continuous direction.  Bilinear
// lookups wrap across the longitude seam and clamp at the poles.
float sample_erp(const ErpImage& img, int c, const SphericalCoord& dir, Interp interp);

// Cuts one rectilinear viewport out of an ERP raster.
ErpImage extract_viewport(const ErpImage& img, const ViewportSpec& spec,
                          Interp interp = Interp::Bilinear);

ErpImage extract_viewport_nearest(const ErpImage& img, const ViewportSpec& spec);

// m viewports on the equator, spaced offset_deg apart starting at
// lon0_deg, square fov_deg x fov_deg, size x size pixels.  m * offset_deg
// must not exceed 360.
SamplingPlan equatorial_plan(int m, double offset_deg = 45.0, double fov_deg = 90.0,
                             int size = 224, double lon0_deg = -180.0);

// n near-uniform directions from the Fibonacci sphere lattice.
std::vector<SphericalCoord> fibonacci_sphere(int n);

// Viewport plan centered on the n Fibonacci lattice directions.
SamplingPlan spherical_plan(int n, double fov_deg = 90.0, int size = 224);

} // namespace iqc
