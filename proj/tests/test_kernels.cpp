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

#include "iqc/kernels.hpp"
#include "iqc/kernels_ref.hpp"
#include "iqc/tensor.hpp"

#include <cmath>
#include <random>

using namespace iqc;

namespace {

template <typename T>
double max_abs_diff(const ArrayT<T>& a, const ArrayT<T>& b)
{
    REQUIRE(a.shape == b.shape);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
    return worst;
}

} // namespace

TEST_CASE("parallel convolution matches the serial reference on random shapes")
{
    std::mt19937_64 rng(3);
    struct Case {
        int h, w, ci, co, k, stride, pad;
    };
    const Case cases[] = {
        {8, 8, 3, 4, 3, 1, 1}, {9, 7, 2, 5, 3, 2, 1}, {6, 6, 4, 4, 1, 1, 0},
        {12, 5, 1, 2, 5, 1, 2}, {7, 7, 3, 3, 3, 2, 0},
    };
    for (const Case& c : cases) {
        const ArrayT<double> x = randn<double>({c.h, c.w, c.ci}, rng, 1.0);
        const ArrayT<double> w = randn<double>({c.k, c.k, c.ci, c.co}, rng, 0.5);
        const ArrayT<double> b = randn<double>({c.co}, rng, 0.5);
        const ArrayT<double> got = kern::conv2d(x, w, &b, c.stride, c.pad);
        const ArrayT<double> want = ref::conv2d(x, w, &b, c.stride, c.pad);
        CHECK(max_abs_diff(got, want) <= 1e-12);
        const ArrayT<double> got_nb = kern::conv2d<double>(x, w, nullptr, c.stride, c.pad);
        const ArrayT<double> want_nb = ref::conv2d<double>(x, w, nullptr, c.stride, c.pad);
        CHECK(max_abs_diff(got_nb, want_nb) <= 1e-12);
    }
}

TEST_CASE("parallel matmul matches the serial reference")
{
    std::mt19937_64 rng(5);
    for (const auto [m, k, n] : {std::array {3, 4, 5}, {1, 7, 2}, {8, 8, 8}, {5, 1, 3}}) {
        const ArrayT<double> a = randn<double>({m, k}, rng, 1.0);
        const ArrayT<double> b = randn<double>({k, n}, rng, 1.0);
        CHECK(max_abs_diff(kern::matmul(a, b), ref::matmul(a, b)) <= 1e-12);
    }
}

TEST_CASE("parallel neighborhood attention matches the serial reference")
{
    std::mt19937_64 rng(7);
    struct Case {
        int h, w, c, kernel, heads;
    };
    const Case cases[] = {{6, 6, 4, 3, 2}, {5, 7, 6, 5, 3}, {4, 4, 8, 3, 1}, {3, 3, 4, 3, 4}};
    for (const Case& c : cases) {
        const ArrayT<double> q = randn<double>({c.h, c.w, c.c}, rng, 1.0);
        const ArrayT<double> k = randn<double>({c.h, c.w, c.c}, rng, 1.0);
        const ArrayT<double> v = randn<double>({c.h, c.w, c.c}, rng, 1.0);
        CHECK(max_abs_diff(kern::na_forward(q, k, v, c.kernel, c.heads),
                           ref::na_forward(q, k, v, c.kernel, c.heads))
              <= 1e-12);
    }
}

TEST_CASE("attention windows clamp to the map and never shrink")
{
    CHECK(na_window_start(0, 8, 3) == 0);
    CHECK(na_window_start(1, 8, 3) == 0);
    CHECK(na_window_start(4, 8, 3) == 3);
    CHECK(na_window_start(7, 8, 3) == 5); // clamped so the window stays inside
    CHECK(na_window_start(0, 3, 3) == 0);
    CHECK(na_window_start(2, 3, 3) == 0);
}

TEST_CASE("attention with a window covering the map equals full attention")
{
    std::mt19937_64 rng(9);
    const int h = 3, w = 3, c = 4;
    const ArrayT<double> q = randn<double>({h, w, c}, rng, 1.0);
    const ArrayT<double> k = randn<double>({h, w, c}, rng, 1.0);
    const ArrayT<double> v = randn<double>({h, w, c}, rng, 1.0);
    const ArrayT<double> got = kern::na_forward(q, k, v, 3, 1);
    // Dense oracle: every position attends to all nine positions.
    const double scale = 1.0 / std::sqrt(static_cast<double>(c));
    ArrayT<double> want = ArrayT<double>::zeros({h, w, c});
    for (int qy = 0; qy < h; ++qy) {
        for (int qx = 0; qx < w; ++qx) {
            std::vector<double> logits;
            for (int ky = 0; ky < h; ++ky)
                for (int kx = 0; kx < w; ++kx) {
                    double dot = 0.0;
                    for (int ch = 0; ch < c; ++ch)
                        dot += q.data[(qy * w + qx) * c + ch] * k.data[(ky * w + kx) * c + ch];
                    logits.push_back(dot * scale);
                }
            const double mx = *std::max_element(logits.begin(), logits.end());
            double denom = 0.0;
            for (double& l : logits) {
                l = std::exp(l - mx);
                denom += l;
            }
            for (std::size_t pos = 0; pos < logits.size(); ++pos)
                for (int ch = 0; ch < c; ++ch)
                    want.data[(qy * w + qx) * c + ch]
                        += logits[pos] / denom * v.data[pos * c + ch];
        }
    }
    CHECK(max_abs_diff(got, want) <= 1e-12);
}

TEST_CASE("attention over a constant value field returns that constant")
{
    std::mt19937_64 rng(11);
    const ArrayT<double> q = randn<double>({5, 5, 4}, rng, 1.0);
    const ArrayT<double> k = randn<double>({5, 5, 4}, rng, 1.0);
    const ArrayT<double> v = ArrayT<double>::full({5, 5, 4}, 0.37);
    const ArrayT<double> out = kern::na_forward(q, k, v, 3, 2);
    for (double x : out.data)
        CHECK(x == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("resizing to the same shape is the identity")
{
    std::mt19937_64 rng(13);
    const ArrayT<float> x = randn<float>({7, 5, 3}, rng, 1.0f);
    const ArrayT<float> y = kern::bilinear_resize(x, 7, 5);
    CHECK(x.data == y.data);
}

TEST_CASE("bilinear resizing preserves a constant field exactly at any scale")
{
    const ArrayT<double> x = ArrayT<double>::full({4, 6, 2}, 1.25);
    for (const auto [oh, ow] : {std::array {8, 12}, {2, 3}, {5, 5}}) {
        const ArrayT<double> y = kern::bilinear_resize(x, oh, ow);
        for (double v : y.data)
            CHECK(v == 1.25);
    }
}

TEST_CASE("upsampling then averaging preserves the mean of a smooth ramp")
{
    ArrayT<double> x = ArrayT<double>::zeros({3, 3, 1});
    for (int i = 0; i < 9; ++i)
        x.data[i] = i * 0.1;
    const ArrayT<double> y = kern::bilinear_resize(x, 6, 6);
    CHECK(y.dim(0) == 6);
    // Half-pixel alignment keeps the output inside the input hull.
    for (double v : y.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 0.8);
    }
}

TEST_CASE("softmax rows sum to one and ignore a constant shift")
{
    std::mt19937_64 rng(17);
    const ArrayT<double> x = randn<double>({4, 6}, rng, 2.0);
    const ArrayT<double> s = kern::softmax_axis(x, 1);
    for (int r = 0; r < 4; ++r) {
        double acc = 0.0;
        for (int c = 0; c < 6; ++c) {
            const double p = s.data[r * 6 + c];
            CHECK(p > 0.0);
            acc += p;
        }
        CHECK(acc == doctest::Approx(1.0).epsilon(1e-12));
    }
    ArrayT<double> shifted = x;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 6; ++c)
            shifted.data[r * 6 + c] += 3.5;
    const ArrayT<double> s2 = kern::softmax_axis(shifted, 1);
    CHECK(max_abs_diff(s, s2) <= 1e-12);
}

TEST_CASE("softmax along axis 0 normalizes columns instead")
{
    std::mt19937_64 rng(19);
    const ArrayT<double> x = randn<double>({5, 3}, rng, 1.0);
    const ArrayT<double> s = kern::softmax_axis(x, 0);
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int r = 0; r < 5; ++r)
            acc += s.data[r * 3 + c];
        CHECK(acc == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("layer normalization zeroes the mean and fixes the variance per position")
{
    std::mt19937_64 rng(23);
    const ArrayT<double> x = randn<double>({4, 3, 8}, rng, 3.0);
    const ArrayT<double> y = kern::layer_norm(x);
    for (int pos = 0; pos < 12; ++pos) {
        double mean = 0.0;
        for (int c = 0; c < 8; ++c)
            mean += y.data[pos * 8 + c];
        mean /= 8.0;
        CHECK(std::abs(mean) <= 1e-12);
        double var = 0.0;
        for (int c = 0; c < 8; ++c)
            var += y.data[pos * 8 + c] * y.data[pos * 8 + c];
        var /= 8.0;
        CHECK(var == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("global average pooling matches per-channel means")
{
    ArrayT<double> x = ArrayT<double>::zeros({2, 2, 2});
    x.data = {1, 10, 2, 20, 3, 30, 4, 40};
    const ArrayT<double> y = kern::global_avg_pool(x);
    REQUIRE(y.shape == std::vector<int> {2});
    CHECK(y.data[0] == 2.5);
    CHECK(y.data[1] == 25.0);
}

TEST_CASE("gelu interpolates between zero and the identity")
{
    CHECK(kern::gelu(ArrayT<double>::full({1}, 0.0)).data[0] == 0.0);
    const double big = kern::gelu(ArrayT<double>::full({1}, 10.0)).data[0];
    CHECK(big == doctest::Approx(10.0).epsilon(1e-12));
    const double neg = kern::gelu(ArrayT<double>::full({1}, -10.0)).data[0];
    CHECK(std::abs(neg) <= 1e-12);
    // With a symmetric weighting function, gelu(x) - gelu(-x) == x.
    const double a = kern::gelu(ArrayT<double>::full({1}, 1.3)).data[0];
    const double b = kern::gelu(ArrayT<double>::full({1}, -1.3)).data[0];
    CHECK(a - b == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("kernel argument validation rejects inconsistent shapes")
{
    std::mt19937_64 rng(29);
    const ArrayT<double> x = randn<double>({4, 4, 3}, rng, 1.0);
    const ArrayT<double> w_bad = randn<double>({3, 3, 2, 4}, rng, 1.0); // ci mismatch
    CHECK_THROWS_AS(kern::conv2d<double>(x, w_bad, nullptr, 1, 1), std::invalid_argument);
    const ArrayT<double> a = randn<double>({3, 4}, rng, 1.0);
    const ArrayT<double> b = randn<double>({5, 2}, rng, 1.0);
    CHECK_THROWS_AS(kern::matmul(a, b), std::invalid_argument);
    const ArrayT<double> q = randn<double>({4, 4, 4}, rng, 1.0);
    CHECK_THROWS_AS(kern::na_forward(q, q, q, 4, 1), std::invalid_argument); // even kernel
    CHECK_THROWS_AS(kern::na_forward(q, q, q, 3, 3), std::invalid_argument); // heads nmod c
    CHECK_THROWS_AS(kern::softmax_axis(a, 2), std::invalid_argument);
}
