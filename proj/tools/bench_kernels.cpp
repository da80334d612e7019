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

// Timing comparison between the parallel kernels and the serial
// reference implementations they are tested against.

#include "iqc/kernels.hpp"
#include "iqc/kernels_ref.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

namespace {

using iqc::Array;

double time_ms(const std::function<void()>& fn, int reps)
{
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i)
        fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double par_ms, double ref_ms)
{
    std::printf("%-24s parallel %8.2f ms   reference %8.2f ms   speedup %5.2fx\n", name, par_ms,
                ref_ms, ref_ms / par_ms);
}

} // namespace

int main()
{
    std::mt19937_64 rng(7);
    const int reps = 3;

    {
        const Array x = iqc::randn<float>({112, 112, 16}, rng, 1.0);
        const Array w = iqc::randn<float>({3, 3, 16, 32}, rng, 0.1);
        const Array b = iqc::randn<float>({32}, rng, 0.1);
        Array sink;
        const double par = time_ms([&] { sink = iqc::kern::conv2d(x, w, &b, 2, 1); }, reps);
        const double ref = time_ms([&] { sink = iqc::ref::conv2d(x, w, &b, 2, 1); }, reps);
        report("conv2d 112x112x16 s2", par, ref);
    }
    {
        const Array a = iqc::randn<float>({512, 256}, rng, 1.0);
        const Array b = iqc::randn<float>({256, 512}, rng, 1.0);
        Array sink;
        const double par = time_ms([&] { sink = iqc::kern::matmul(a, b); }, reps);
        const double ref = time_ms([&] { sink = iqc::ref::matmul(a, b); }, reps);
        report("matmul 512x256x512", par, ref);
    }
    {
        const Array q = iqc::randn<float>({56, 56, 32}, rng, 1.0);
        const Array k = iqc::randn<float>({56, 56, 32}, rng, 1.0);
        const Array v = iqc::randn<float>({56, 56, 32}, rng, 1.0);
        Array sink;
        const double par = time_ms([&] { sink = iqc::kern::na_forward(q, k, v, 7, 4); }, reps);
        const double ref = time_ms([&] { sink = iqc::ref::na_forward(q, k, v, 7, 4); }, reps);
        report("attention 56x56x32 k7", par, ref);
    }
    return 0;
}
