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

#include <cstdint>
#include <string>
#include <vector>

namespace iqc {

enum class DistortionType { Blur = 0, Noise = 1, Block = 2 };

struct SynthItem {
    std::string id;
    std::string file;  // relative to the output directory
    int situation = 0; // 0 pristine, 1 one region, 2 two regions, 3 global
    DistortionType type = DistortionType::Blur;
    int level = 0;     // 0 pristine, 1..3 graded strength
    double mos = 0.0;
};

// Rating proxy, affine in normalized strength (level/3) and affected
// area fraction (0, 1/4, 1/2, 1): 3 - 1.2*strength - 0.8*area.  A
// pristine image scores exactly 3.
double synth_mos_proxy(int level, int situation);

// Band-limited texture evaluated on the unit direction of each pixel
// center, so the result is continuous across the longitude seam.
ErpImage synth_base_texture(int width, int height, std::uint64_t seed);

// Applies one distortion type at a graded level to the regions implied
// by the situation: one quarter-width longitude band, two opposite
// bands, or the full sphere.  Level 0 returns the input unchanged.
ErpImage synth_distort(const ErpImage& base, DistortionType type, int level, int situation,
                       std::uint64_t seed);

struct SynthConfig {
    int count = 200;
    int width = 256; // ERP width; height is width/2
    std::uint64_t seed = 7;
    std::string out_dir = ".";
};

// Writes `count` images plus "manifest.csv" into out_dir and returns the
// manifest path.  Situations are assigned round-robin, so a count that
// is a multiple of 4 yields an exactly balanced set.  Regenerating with
// the same config is bit-identical.
std::string synthesize_dataset(const SynthConfig& cfg,
                               std::vector<SynthItem>* items_out = nullptr);

} // namespace iqc
