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

#include "iqc/synth.hpp"

#include "iqc/common.hpp"
#include "iqc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace iqc {

namespace {

double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; hand-rolled so the byte stream is pinned to the engine.
double gaussian(std::mt19937_64& rng)
{
    double u1 = uniform01(rng);
    if (u1 < 1e-300)
        u1 = 1e-300;
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index)
{
    // splitmix64 finalizer over the pair keeps per-image streams apart.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct Wave {
    double kx, ky, kz; // frequency vector applied to the unit direction
    double phase;
    double amp;
};

// Quarter-width longitude band mask starting at column `start`.
bool in_band(int u, int start, int band_w, int width)
{
    const int rel = ((u - start) % width + width) % width;
    return rel < band_w;
}

void box_blur_wrap(ErpImage& img, int radius)
{
    // Horizontal pass wraps columns (the seam is a false boundary);
    // the vertical pass clamps at the poles.
    const int w = img.width, h = img.height, c = img.channels;
    std::vector<float> tmp(img.pixels.size());
    const double inv = 1.0 / (2 * radius + 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int d = -radius; d <= radius; ++d) {
                    const int xx = ((x + d) % w + w) % w;
                    acc += img.pixels[img.index(xx, y, ch)];
                }
                tmp[img.index(x, y, ch)] = static_cast<float>(acc * inv);
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int d = -radius; d <= radius; ++d) {
                    const int yy = std::clamp(y + d, 0, h - 1);
                    acc += tmp[img.index(x, yy, ch)];
                }
                img.pixels[img.index(x, y, ch)] = static_cast<float>(acc * inv);
            }
}

ErpImage block_average(const ErpImage& img, int block)
{
    ErpImage out = img;
    for (int by = 0; by < img.height; by += block)
        for (int bx = 0; bx < img.width; bx += block) {
            const int ye = std::min(by + block, img.height);
            const int xe = std::min(bx + block, img.width);
            for (int ch = 0; ch < img.channels; ++ch) {
                double acc = 0.0;
                for (int y = by; y < ye; ++y)
                    for (int x = bx; x < xe; ++x)
                        acc += img.pixels[img.index(x, y, ch)];
                const float mean = static_cast<float>(acc / ((ye - by) * (xe - bx)));
                for (int y = by; y < ye; ++y)
                    for (int x = bx; x < xe; ++x)
                        out.pixels[out.index(x, y, ch)] = mean;
            }
        }
    return out;
}

} // namespace

double synth_mos_proxy(int level, int situation)
{
    require_arg(level >= 0 && level <= 3, "distortion level outside 0..3");
    require_arg(situation >= 0 && situation <= 3, "situation outside 0..3");
    if (level == 0)
        return 3.0;
    static const double areas[4] = {0.0, 0.25, 0.5, 1.0};
    const double strength = static_cast<double>(level) / 3.0;
    return 3.0 - 1.2 * strength - 0.8 * areas[situation];
}

ErpImage synth_base_texture(int width, int height, std::uint64_t seed)
{
    require_arg(width >= 2 && height >= 1, "texture size too small");
    std::mt19937_64 rng(seed);
    constexpr int kWaves = 8;
    Wave waves[3][kWaves];
    for (int ch = 0; ch < 3; ++ch) {
        for (int k = 0; k < kWaves; ++k) {
            Wave& w = waves[ch][k];
            // Fixed log-spaced frequency ladder up to near pixel scale
            // with equal amplitudes: every pristine image shares one
            // spectral envelope (only directions and phases vary), so a
            // distortion-induced deviation is the same cue everywhere.
            const double freq
                = 2.0 * std::exp(std::log(24.0) * k / static_cast<double>(kWaves - 1));
            double dxp = 2.0 * uniform01(rng) - 1.0;
            double dyp = 2.0 * uniform01(rng) - 1.0;
            double dzp = 2.0 * uniform01(rng) - 1.0;
            const double norm = std::sqrt(dxp * dxp + dyp * dyp + dzp * dzp) + 1e-9;
            w.kx = freq * dxp / norm;
            w.ky = freq * dyp / norm;
            w.kz = freq * dzp / norm;
            w.phase = uniform01(rng) * 2.0 * kPi;
            w.amp = 0.45 / kWaves;
        }
    }
    ErpImage img = make_image(width, height, 3);
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u) {
            const SphericalCoord sc = erp_to_sphere(u, v, width, height);
            const double dx = std::cos(sc.lat) * std::cos(sc.lon);
            const double dy = std::cos(sc.lat) * std::sin(sc.lon);
            const double dz = std::sin(sc.lat);
            for (int ch = 0; ch < 3; ++ch) {
                double val = 0.5;
                for (int k = 0; k < kWaves; ++k) {
                    const Wave& w = waves[ch][k];
                    val += w.amp * std::sin(w.kx * dx + w.ky * dy + w.kz * dz + w.phase);
                }
                img.pixels[img.index(u, v, ch)] = static_cast<float>(val);
            }
        }
    return img;
}

ErpImage synth_distort(const ErpImage& base, DistortionType type, int level, int situation,
                       std::uint64_t seed)
{
    validate_image(base);
    require_arg(level >= 0 && level <= 3, "distortion level outside 0..3");
    require_arg(situation >= 0 && situation <= 3, "situation outside 0..3");
    if (level == 0 || situation == 0)
        return base;
    std::mt19937_64 rng(seed);
    const int w = base.width;
    const int band_w = w / 4;
    const int start1 = static_cast<int>(rng() % static_cast<std::uint64_t>(w));
    const int start2 = (start1 + w / 2) % w; // opposite band, never adjacent

    auto masked = [&](int u) {
        if (situation == 3)
            return true;
        if (in_band(u, start1, band_w, w))
            return true;
        return situation == 2 && in_band(u, start2, band_w, w);
    };

    ErpImage degraded = base;
    switch (type) {
    case DistortionType::Blur:
        box_blur_wrap(degraded, 3 * level);
        break;
    case DistortionType::Noise: {
        const double sigma = 0.12 * level;
        for (float& p : degraded.pixels)
            p = static_cast<float>(std::clamp(p + sigma * gaussian(rng), 0.0, 1.0));
        break;
    }
    case DistortionType::Block: {
        // Fixed coarse mosaic with a linear mix: removed-detail energy
        // then grows monotonically with level (a level ramp of the block
        // size is not monotone in edge energy, large blocks have fewer
        // edges), and the 16 px mosaic keeps the level-1 step as visible
        // as the blur and noise ramps.
        const ErpImage blocked = block_average(base, std::max(4, base.width / 16));
        const double alpha = static_cast<double>(level) / 3.0;
        for (std::size_t i = 0; i < degraded.pixels.size(); ++i)
            degraded.pixels[i] = static_cast<float>((1.0 - alpha) * base.pixels[i]
                                                    + alpha * blocked.pixels[i]);
        break;
    }
    }

    ErpImage out = base;
    for (int y = 0; y < base.height; ++y)
        for (int x = 0; x < w; ++x)
            if (masked(x))
                for (int ch = 0; ch < base.channels; ++ch)
                    out.pixels[out.index(x, y, ch)] = degraded.pixels[degraded.index(x, y, ch)];
    return out;
}

std::string synthesize_dataset(const SynthConfig& cfg, std::vector<SynthItem>* items_out)
{
    require_arg(cfg.count >= 1, "image count must be positive");
    require_arg(cfg.width >= 8 && cfg.width % 2 == 0, "width must be even and at least 8");
    std::filesystem::create_directories(cfg.out_dir);
    const int height = cfg.width / 2;
    std::vector<SynthItem> items;
    items.reserve(static_cast<std::size_t>(cfg.count));
    for (int i = 0; i < cfg.count; ++i) {
        const std::uint64_t img_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
        SynthItem item;
        char buf[32];
        std::snprintf(buf, sizeof buf, "img_%04d", i);
        item.id = buf;
        item.file = item.id + std::string(".erpf");
        item.situation = i % 4;
        if (item.situation == 0) {
            item.level = 0;
            item.type = DistortionType::Blur;
        } else {
            // Cycle type and level deterministically within each situation.
            const int j = i / 4;
            item.type = static_cast<DistortionType>(j % 3);
            item.level = 1 + (j / 3) % 3;
        }
        item.mos = synth_mos_proxy(item.level, item.situation);
        {
            // Small deterministic rater-dispersion jitter. Its range stays
            // well under half the smallest proxy gap (0.2), so the ordering
            // of distinct proxy values is preserved while exact ties, which
            // degrade both rank metrics and the batch-normalized regression
            // loss, disappear.
            std::mt19937_64 jrng(mix_seed(img_seed, 0x6a5dULL));
            item.mos += 0.05 * (2.0 * uniform01(jrng) - 1.0);
        }

        ErpImage img = synth_base_texture(cfg.width, height, img_seed);
        img = synth_distort(img, item.type, item.level, item.situation, img_seed ^ 0xabcdefULL);
        write_erpf(img, (std::filesystem::path(cfg.out_dir) / item.file).string());
        items.push_back(std::move(item));
    }

    const std::string manifest_path
        = (std::filesystem::path(cfg.out_dir) / "manifest.csv").string();
    std::ofstream os(manifest_path, std::ios::binary);
    require_state(os.good(), "cannot write " + manifest_path);
    os << "id,path,mos,situation\n";
    char line[256];
    for (const SynthItem& it : items) {
        std::snprintf(line, sizeof line, "%s,%s,%.6f,%d\n", it.id.c_str(), it.file.c_str(),
                      it.mos, it.situation);
        os << line;
    }
    if (items_out != nullptr)
        *items_out = std::move(items);
    return manifest_path;
}

} // namespace iqc
