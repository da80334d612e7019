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

// `infinite` marks an unbounded score (zero error on a PSNR-family
// metric); `value` is +inf in that case.
struct MetricResult {
    std::string name;
    double value = 0.0;
    bool infinite = false;
};

// All PSNR-family metrics use MAX = 1 and average squared error over
// channels, so a constant difference of 0.1 scores 20 dB on each.
MetricResult psnr(const ErpImage& ref, const ErpImage& dist);

// Latitude-weighted PSNR: row j carries weight cos((j + 0.5 - H/2)*pi/H),
// the cosine of its latitude.
MetricResult ws_psnr(const ErpImage& ref, const ErpImage& dist);

// PSNR over n Fibonacci lattice directions sampled with nearest-neighbor
// lookups, so both rasters are compared on a near-uniform sphere grid.
MetricResult s_psnr(const ErpImage& ref, const ErpImage& dist, int n_points = 65536);

// PSNR after remapping both rasters to the Craster parabolic projection;
// only the valid (on-sphere) region contributes.
MetricResult cpp_psnr(const ErpImage& ref, const ErpImage& dist);

// Fraction helper for the Craster plane: 1 marks raster positions that
// map back onto the sphere.  The valid share tends to 2/3.
std::vector<unsigned char> cpp_mask(int w, int h);

// Mean structural similarity on luma, 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, computed on the valid (fully covered) region.
MetricResult ssim(const ErpImage& ref, const ErpImage& dist);

// SSIM map averaged with cosine-of-latitude row weights.
MetricResult ws_ssim(const ErpImage& ref, const ErpImage& dist);

// Spatial information: standard deviation of the Sobel gradient
// magnitude over interior luma pixels.
MetricResult spatial_information(const ErpImage& img);

// Hasler-Suesstrunk colorfulness on the rg / yb opponent axes.
MetricResult colorfulness(const ErpImage& img);

// The six full-reference scores in a fixed order.
std::vector<MetricResult> full_reference_suite(const ErpImage& ref, const ErpImage& dist);

// The two no-reference content measures in a fixed order.
std::vector<MetricResult> content_suite(const ErpImage& img);

} // namespace iqc
