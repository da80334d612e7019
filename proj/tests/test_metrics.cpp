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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "iqc/image.hpp"
#include "iqc/metrics.hpp"

#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace iqc;

namespace {

ErpImage with_noise(const ErpImage& base, float amp, std::uint64_t seed, int row_lo = 0,
                    int row_hi = -1)
{
    ErpImage out = base;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-amp, amp);
    const int hi = row_hi < 0 ? base.height : row_hi;
    for (int y = row_lo; y < hi; ++y)
        for (int x = 0; x < base.width; ++x)
            for (int c = 0; c < base.channels; ++c)
                out.pixels[out.index(x, y, c)] += u(rng);
    return out;
}

} // namespace

TEST_CASE("metric values match naive direct-summation oracles")
{
    std::mt19937_64 rng(41);
    for (int i = 0; i < 10; ++i) {
        const int h = 12 + static_cast<int>(rng() % 10);
        const int w = 2 * h;
        const ErpImage a = oracle::random_image(w, h, 3, rng);
        ErpImage b = oracle::random_image(w, h, 3, rng);
        for (std::size_t k = 0; k < b.pixels.size(); ++k)
            b.pixels[k] = 0.7f * a.pixels[k] + 0.3f * b.pixels[k];
        CHECK(std::abs(psnr(a, b).value - oracle::psnr_plain(a, b)) <= 1e-9);
        CHECK(std::abs(ws_psnr(a, b).value - oracle::ws_psnr(a, b)) <= 1e-9);
        const oracle::SsimPair sp = oracle::ssim_both(a, b);
        CHECK(std::abs(ssim(a, b).value - sp.plain) <= 1e-9);
        CHECK(std::abs(ws_ssim(a, b).value - sp.weighted) <= 1e-9);
        CHECK(std::abs(colorfulness(a).value - oracle::colorfulness(a)) <= 1e-9);
        CHECK(std::abs(spatial_information(a).value - oracle::spatial_information(a)) <= 1e-9);
    }
}

TEST_CASE("identical rasters give infinite PSNR and exactly unit similarity")
{
    std::mt19937_64 rng(42);
    const ErpImage a = oracle::random_image(32, 16, 3, rng);
    CHECK(psnr(a, a).infinite);
    CHECK(ws_psnr(a, a).infinite);
    CHECK(s_psnr(a, a).infinite);
    CHECK(cpp_psnr(a, a).infinite);
    CHECK(ssim(a, a).value == 1.0);
    CHECK(ws_ssim(a, a).value == 1.0);
}

TEST_CASE("a uniform 0.1 offset lands on 20 dB across the PSNR family")
{
    std::mt19937_64 rng(43);
    const ErpImage ref = oracle::random_image(64, 32, 3, rng, 0.0f, 0.85f);
    ErpImage dist = ref;
    for (float& p : dist.pixels)
        p += 0.1f;
    // 0.1 is not float-representable, so the achievable accuracy is set
    // by the pixel quantization, about 1e-5 dB.
    for (const MetricResult& m :
         {psnr(ref, dist), ws_psnr(ref, dist), s_psnr(ref, dist), cpp_psnr(ref, dist)}) {
        CHECK(!m.infinite);
        CHECK(m.value == doctest::Approx(20.0).epsilon(1e-6));
    }
    // With a constant difference the latitude weights cancel.
    CHECK(std::abs(ws_psnr(ref, dist).value - psnr(ref, dist).value) <= 1e-9);
}

TEST_CASE("PSNR metrics are symmetric in their arguments")
{
    std::mt19937_64 rng(44);
    const ErpImage a = oracle::random_image(32, 16, 3, rng);
    const ErpImage b = with_noise(a, 0.05f, 7);
    CHECK(psnr(a, b).value == psnr(b, a).value);
    CHECK(ws_psnr(a, b).value == ws_psnr(b, a).value);
    CHECK(s_psnr(a, b).value == s_psnr(b, a).value);
    CHECK(cpp_psnr(a, b).value == cpp_psnr(b, a).value);
}

TEST_CASE("stronger noise strictly lowers every PSNR variant")
{
    std::mt19937_64 rng(45);
    const ErpImage base = oracle::random_image(64, 32, 3, rng, 0.2f, 0.8f);
    const ErpImage n1 = with_noise(base, 0.01f, 9);
    const ErpImage n2 = with_noise(base, 0.05f, 9);
    const ErpImage n3 = with_noise(base, 0.10f, 9);
    for (auto metric : {psnr, ws_psnr, cpp_psnr}) {
        const double a = metric(base, n1).value;
        const double b = metric(base, n2).value;
        const double c = metric(base, n3).value;
        CHECK(a > b);
        CHECK(b > c);
    }
    CHECK(s_psnr(base, n1).value > s_psnr(base, n2).value);
    CHECK(s_psnr(base, n2).value > s_psnr(base, n3).value);
}

TEST_CASE("latitude weighting discounts polar errors")
{
    const ErpImage base = oracle::smooth_sphere_image(64, 32, 3);
    const ErpImage polar = with_noise(base, 0.2f, 5, 0, 4);
    const ErpImage equator = with_noise(base, 0.2f, 5, 14, 18);
    CHECK(psnr(base, polar).value == doctest::Approx(psnr(base, equator).value).epsilon(1e-9));
    CHECK(ws_psnr(base, polar).value > ws_psnr(base, equator).value);
    CHECK(ws_ssim(base, polar).value > ws_ssim(base, equator).value);
}

TEST_CASE("sphere-sampled PSNR stays close to the latitude-weighted value")
{
    std::mt19937_64 rng(46);
    const ErpImage a = oracle::random_image(64, 32, 3, rng, 0.2f, 0.8f);
    const ErpImage b = with_noise(a, 0.08f, 11);
    CHECK(std::abs(s_psnr(a, b, 10000).value - ws_psnr(a, b).value) < 0.5);
}

TEST_CASE("similarity scores stay within their analytic range")
{
    std::mt19937_64 rng(47);
    for (int i = 0; i < 5; ++i) {
        const ErpImage a = oracle::random_image(32, 16, 3, rng);
        const ErpImage b = oracle::random_image(32, 16, 3, rng);
        const double v = ssim(a, b).value;
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
        const double w = ws_ssim(a, b).value;
        CHECK(w >= -1.0);
        CHECK(w <= 1.0);
    }
}

TEST_CASE("contrast inversion drives similarity far below identity")
{
    const ErpImage a = oracle::smooth_sphere_image(48, 24, 3);
    ErpImage b = a;
    for (float& p : b.pixels)
        p = 1.0f - p;
    CHECK(ssim(a, b).value < 0.5);
}

TEST_CASE("the projection mask covers about two thirds of the raster at any size")
{
    auto fraction = [](int w, int h) {
        const std::vector<unsigned char> mask = cpp_mask(w, h);
        std::size_t valid = 0;
        for (unsigned char m : mask)
            valid += m;
        return static_cast<double>(valid) / static_cast<double>(mask.size());
    };
    const double f0 = fraction(256, 128);
    CHECK(f0 == doctest::Approx(2.0 / 3.0).epsilon(0.01));
    const double f1 = fraction(128, 64);
    const double f2 = fraction(1024, 512);
    CHECK(std::abs(f1 - f2) < 0.01);
}

TEST_CASE("colorfulness matches hand values on constant rasters")
{
    ErpImage red = make_image(16, 8, 3);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 16; ++x)
            red.pixels[red.index(x, y, 0)] = 1.0f;
    CHECK(colorfulness(red).value == doctest::Approx(0.3 * std::sqrt(1.25)).epsilon(1e-12));

    const ErpImage gray = make_image(16, 8, 3, 0.4f);
    CHECK(colorfulness(gray).value == 0.0);

    const ErpImage mono = make_image(16, 8, 1, 0.4f);
    CHECK_THROWS_AS(colorfulness(mono), std::invalid_argument);
}

TEST_CASE("spatial information matches the hand-computed step-edge value")
{
    ErpImage img = make_image(8, 8, 1);
    for (int y = 0; y < 8; ++y)
        for (int x = 4; x < 8; ++x)
            img.pixels[img.index(x, y, 0)] = 1.0f;
    // Sobel magnitude is 4 on the two columns flanking the edge (12 of 36
    // interior pixels): std dev = sqrt(16/3 - 16/9) = 4*sqrt(2)/3.
    CHECK(spatial_information(img).value
          == doctest::Approx(4.0 * std::sqrt(2.0) / 3.0).epsilon(1e-12));
    CHECK(spatial_information(make_image(8, 8, 1, 0.3f)).value == 0.0);
}

TEST_CASE("spatial information ignores a constant brightness shift exactly")
{
    std::mt19937_64 rng(48);
    ErpImage a = make_image(24, 12, 1);
    for (float& p : a.pixels)
        p = static_cast<float>(rng() % 129) / 256.0f; // dyadic values in [0, 0.5]
    ErpImage b = a;
    for (float& p : b.pixels)
        p += 0.25f; // exact in float, so gradients cancel bitwise
    CHECK(spatial_information(a).value == spatial_information(b).value);
}

TEST_CASE("mismatched or undersized rasters are rejected")
{
    const ErpImage a = make_image(32, 16, 3, 0.5f);
    const ErpImage b = make_image(16, 8, 3, 0.5f);
    CHECK_THROWS_AS(psnr(a, b), std::invalid_argument);
    CHECK_THROWS_AS(ws_psnr(a, b), std::invalid_argument);
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
    const ErpImage tiny = make_image(10, 10, 3, 0.5f);
    CHECK_THROWS_AS(ssim(tiny, tiny), std::domain_error);
    const ErpImage dot = make_image(2, 2, 3, 0.5f);
    CHECK_THROWS_AS(spatial_information(dot), std::domain_error);
    CHECK_THROWS_AS(s_psnr(a, a, 50), std::invalid_argument);
}

TEST_CASE("the metric suites report in a fixed order")
{
    std::mt19937_64 rng(49);
    const ErpImage a = oracle::random_image(32, 16, 3, rng);
    const ErpImage b = with_noise(a, 0.05f, 3);
    const std::vector<MetricResult> fr = full_reference_suite(a, b);
    REQUIRE(fr.size() == 6);
    CHECK(fr[0].name == "psnr");
    CHECK(fr[1].name == "ws_psnr");
    CHECK(fr[2].name == "s_psnr");
    CHECK(fr[3].name == "cpp_psnr");
    CHECK(fr[4].name == "ssim");
    CHECK(fr[5].name == "ws_ssim");
    const std::vector<MetricResult> ct = content_suite(a);
    REQUIRE(ct.size() == 2);
    CHECK(ct[0].name == "si");
    CHECK(ct[1].name == "cf");
}
