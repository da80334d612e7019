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

#include <cstddef>
#include <string>
#include <vector>

namespace iqc {

// Planar raster in row-major [row][column][channel] order, one float per
// sample, nominal range [0, 1].  For equirectangular content row 0 is the
// north edge and column 0 is longitude -180 degrees.
struct ErpImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> pixels;

    std::size_t index(int x, int y, int c) const
    {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float at(int x, int y, int c) const { return pixels[index(x, y, c)]; }
    float& at(int x, int y, int c) { return pixels[index(x, y, c)]; }
};

// Validates dimensions and storage size; warns (does not fail) when the
// raster is not 2:1, since viewport extraction still works on any aspect.
void validate_image(const ErpImage& img);

ErpImage make_image(int width, int height, int channels, float fill = 0.0f);

// Rec.601 luma: 0.299 R + 0.587 G + 0.114 B.  1-channel input is returned
// unchanged.
ErpImage to_luma(const ErpImage& img);

// Raw float raster file: magic "ERPF", little-endian u32 width, height,
// channels, then width*height*channels float32 in row-major order.
ErpImage read_erpf(const std::string& path);
void write_erpf(const ErpImage& img, const std::string& path);

// Dispatches on file magic: ERPF, PNG, or JPEG.  PNG/JPEG samples are
// normalized from 8-bit to [0, 1].
ErpImage load_image(const std::string& path);

// 8-bit PNG with rounding quantization; values are clamped to [0, 1].
void write_png(const ErpImage& img, const std::string& path);

} // namespace iqc
