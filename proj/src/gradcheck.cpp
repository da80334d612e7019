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

#include "iqc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace iqc {

GradCheckReport check_gradients(const std::string& name, ParamStoreT<double>& store,
                                const LossBuilder& build, double fd_eps, double tol,
                                int max_coords_per_param, std::uint64_t seed)
{
    require_arg(fd_eps > 0.0 && tol > 0.0, "step and tolerance must be positive");
    store.zero_grad();
    {
        GraphT<double> g(&store);
        const int loss = build(g);
        require_arg(g.value(loss).numel() == 1, "gradient check needs a scalar loss");
        g.backward(loss);
    }
    std::map<std::string, ArrayT<double>> analytic;
    for (const std::string& pname : store.names())
        analytic.emplace(pname, store.grad(pname));

    auto eval = [&]() {
        GraphT<double> g(&store);
        return static_cast<double>(g.value(build(g)).data[0]);
    };

    std::mt19937_64 rng(seed);
    GradCheckReport rep;
    rep.name = name;
    for (const std::string& pname : store.names()) {
        ArrayT<double>& value = store.value(pname);
        const ArrayT<double>& ga = analytic.at(pname);
        std::vector<std::size_t> coords(value.data.size());
        std::iota(coords.begin(), coords.end(), std::size_t {0});
        if (max_coords_per_param >= 0
            && coords.size() > static_cast<std::size_t>(max_coords_per_param)) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(static_cast<std::size_t>(max_coords_per_param));
        }
        for (std::size_t ci : coords) {
            const double saved = value.data[ci];
            value.data[ci] = saved + fd_eps;
            const double lp = eval();
            value.data[ci] = saved - fd_eps;
            const double lm = eval();
            value.data[ci] = saved;
            const double fd = (lp - lm) / (2.0 * fd_eps);
            const double an = ga.data[ci];
            const double rel
                = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1.0});
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
            ++rep.coords;
            if (rel > tol)
                ++rep.failures;
        }
    }
    return rep;
}

namespace {

using A = ArrayT<double>;

// Scalar loss by dotting a node with a fixed random direction; the
// direction is pregenerated so rebuilds see the same projection.
int project(GraphT<double>& g, int node, const A& dir)
{
    return g.reduce_sum(g.mul(node, g.constant(dir)));
}

A spread_positive(std::mt19937_64& rng, std::vector<int> shape, double lo)
{
    A a = randn<double>(std::move(shape), rng, 1.0);
    for (double& v : a.data)
        v = lo + std::abs(v);
    return a;
}

// Values with pairwise gaps well above the finite-difference step, so a
// perturbation can never flip a top-k selection.
A spaced_values(std::mt19937_64& rng, int n)
{
    A a = A::zeros({n});
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < n; ++i)
        a.data[static_cast<std::size_t>(order[i])] = 0.2 * (i + 1);
    return a;
}

// Keeps magnitudes above the finite-difference step so sign kinks in
// |x|^gamma are never crossed.
A away_from_zero(std::mt19937_64& rng, std::vector<int> shape)
{
    A a = randn<double>(std::move(shape), rng, 1.0);
    for (double& v : a.data) {
        const double s = v >= 0.0 ? 1.0 : -1.0;
        v = s * (0.2 + std::abs(v));
    }
    return a;
}

struct OpCase {
    std::string name;
    std::function<GradCheckReport(std::uint64_t, double)> run;
};

GradCheckReport run_case(const std::string& name, ParamStoreT<double>& store,
                         const LossBuilder& build, double tol, std::uint64_t seed,
                         double fd_eps = 1e-5)
{
    return check_gradients(name, store, build, fd_eps, tol, -1, seed);
}

} // namespace

std::vector<GradCheckReport> run_op_gradchecks(std::uint64_t seed, double tol)
{
    std::vector<GradCheckReport> reports;
    std::mt19937_64 rng(seed);

    auto simple = [&](const std::string& name, std::vector<int> shape, auto make_node) {
        ParamStoreT<double> store;
        store.create("x", randn<double>(shape, rng, 1.0));
        const A dir = randn<double>(shape, rng, 1.0);
        reports.push_back(run_case(name, store,
                                   [&make_node, dir](GraphT<double>& g) {
                                       return project(g, make_node(g, g.param("x")), dir);
                                   },
                                   tol, seed));
    };

    { // add / sub / mul over two parameters
        ParamStoreT<double> store;
        store.create("a", randn<double>({3, 4}, rng, 1.0));
        store.create("b", randn<double>({3, 4}, rng, 1.0));
        const A dir = randn<double>({3, 4}, rng, 1.0);
        reports.push_back(run_case("add", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.add(g.param("a"), g.param("b")), dir);
                                   },
                                   tol, seed));
        reports.push_back(run_case("sub", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.sub(g.param("a"), g.param("b")), dir);
                                   },
                                   tol, seed));
        reports.push_back(run_case("mul", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.mul(g.param("a"), g.param("b")), dir);
                                   },
                                   tol, seed));
    }

    simple("scale", {3, 4},
           [](GraphT<double>& g, int x) { return g.scale(x, 1.7); });
    simple("add_const", {5}, [](GraphT<double>& g, int x) { return g.add_const(x, 0.3); });

    { // add_bias
        ParamStoreT<double> store;
        store.create("x", randn<double>({5, 4}, rng, 1.0));
        store.create("b", randn<double>({4}, rng, 1.0));
        const A dir = randn<double>({5, 4}, rng, 1.0);
        reports.push_back(run_case("add_bias", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.add_bias(g.param("x"), g.param("b")),
                                                      dir);
                                   },
                                   tol, seed));
    }

    simple("gelu", {3, 4}, [](GraphT<double>& g, int x) { return g.gelu_op(x); });

    { // log over strictly positive values
        ParamStoreT<double> store;
        store.create("x", spread_positive(rng, {3, 4}, 0.5));
        const A dir = randn<double>({3, 4}, rng, 1.0);
        reports.push_back(run_case("log", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.log_op(g.param("x")), dir);
                                   },
                                   tol, seed));
    }

    simple("clamp_interior", {3, 4},
           [](GraphT<double>& g, int x) { return g.clamp_op(x, -10.0, 10.0); });

    { // abs_pow, both exponents, values away from the kink
        ParamStoreT<double> store;
        store.create("x", away_from_zero(rng, {3, 4}));
        const A dir = randn<double>({3, 4}, rng, 1.0);
        reports.push_back(run_case("abs_pow_g1", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.abs_pow(g.param("x"), 1.0), dir);
                                   },
                                   tol, seed));
        reports.push_back(run_case("abs_pow_g2", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.abs_pow(g.param("x"), 2.0), dir);
                                   },
                                   tol, seed));
    }

    { // sqrt over strictly positive values
        ParamStoreT<double> store;
        store.create("x", spread_positive(rng, {6}, 0.5));
        const A dir = randn<double>({6}, rng, 1.0);
        reports.push_back(run_case("sqrt", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.sqrt_op(g.param("x")), dir);
                                   },
                                   tol, seed));
    }

    simple("softmax_axis0", {3, 4},
           [](GraphT<double>& g, int x) { return g.softmax(x, 0); });
    simple("softmax_axis1", {3, 4},
           [](GraphT<double>& g, int x) { return g.softmax(x, 1); });

    { // reductions are scalar already
        ParamStoreT<double> store;
        store.create("x", randn<double>({3, 4}, rng, 1.0));
        reports.push_back(run_case("reduce_sum", store,
                                   [](GraphT<double>& g) { return g.reduce_sum(g.param("x")); },
                                   tol, seed));
        reports.push_back(run_case("reduce_mean", store,
                                   [](GraphT<double>& g) { return g.reduce_mean(g.param("x")); },
                                   tol, seed));
    }

    { // scalar broadcasts
        ParamStoreT<double> store;
        store.create("x", randn<double>({3, 4}, rng, 1.0));
        A s = A::zeros({1});
        s.data[0] = 2.3;
        store.create("s", s);
        const A dir = randn<double>({3, 4}, rng, 1.0);
        reports.push_back(run_case("sub_scalar", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.sub_scalar(g.param("x"), g.param("s")),
                                                      dir);
                                   },
                                   tol, seed));
        reports.push_back(run_case("div_scalar", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.div_scalar(g.param("x"), g.param("s")),
                                                      dir);
                                   },
                                   tol, seed));
    }

    { // reshape projects against the reshaped layout
        ParamStoreT<double> store;
        store.create("x", randn<double>({3, 4}, rng, 1.0));
        const A dir = randn<double>({2, 6}, rng, 1.0);
        reports.push_back(run_case("reshape", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.reshape(g.param("x"), {2, 6}), dir);
                                   },
                                   tol, seed));
    }

    { // concat / stack / sum_list / stack_weighted_sum
        ParamStoreT<double> store;
        store.create("a", randn<double>({3}, rng, 1.0));
        store.create("b", randn<double>({5}, rng, 1.0));
        const A dir = randn<double>({8}, rng, 1.0);
        reports.push_back(run_case("concat", store,
                                   [dir](GraphT<double>& g) {
                                       return project(
                                           g, g.concat({g.param("a"), g.param("b")}), dir);
                                   },
                                   tol, seed));
    }
    {
        ParamStoreT<double> store;
        store.create("a", randn<double>({3, 4}, rng, 1.0));
        store.create("b", randn<double>({3, 4}, rng, 1.0));
        store.create("c", randn<double>({3, 4}, rng, 1.0));
        const A dir_stack = randn<double>({3, 3, 4}, rng, 1.0);
        const A dir_flat = randn<double>({3, 4}, rng, 1.0);
        reports.push_back(
            run_case("stack", store,
                     [dir_stack](GraphT<double>& g) {
                         return project(
                             g, g.stack({g.param("a"), g.param("b"), g.param("c")}), dir_stack);
                     },
                     tol, seed));
        reports.push_back(
            run_case("sum_list", store,
                     [dir_flat](GraphT<double>& g) {
                         return project(
                             g, g.sum_list({g.param("a"), g.param("b"), g.param("c")}), dir_flat);
                     },
                     tol, seed));
    }
    {
        ParamStoreT<double> store;
        store.create("s0", randn<double>({2, 3}, rng, 1.0));
        store.create("s1", randn<double>({2, 3}, rng, 1.0));
        store.create("s2", randn<double>({2, 3}, rng, 1.0));
        store.create("gates", randn<double>({3}, rng, 1.0));
        const A dir = randn<double>({2, 3}, rng, 1.0);
        reports.push_back(run_case(
            "stack_weighted_sum", store,
            [dir](GraphT<double>& g) {
                const int stacked = g.stack({g.param("s0"), g.param("s1"), g.param("s2")});
                return project(g, g.stack_weighted_sum(stacked, g.param("gates")), dir);
            },
            tol, seed));
    }

    { // matmul
        ParamStoreT<double> store;
        store.create("a", randn<double>({3, 4}, rng, 1.0));
        store.create("b", randn<double>({4, 5}, rng, 1.0));
        const A dir = randn<double>({3, 5}, rng, 1.0);
        reports.push_back(run_case("matmul", store,
                                   [dir](GraphT<double>& g) {
                                       return project(
                                           g, g.matmul_op(g.param("a"), g.param("b")), dir);
                                   },
                                   tol, seed));
    }

    { // conv2d, strided and padded, with bias
        ParamStoreT<double> store;
        store.create("x", randn<double>({5, 6, 2}, rng, 1.0));
        store.create("w", randn<double>({3, 3, 2, 4}, rng, 0.5));
        store.create("b", randn<double>({4}, rng, 0.5));
        const A probe = kern::conv2d<double>(store.value("x"), store.value("w"), nullptr, 2, 1);
        const A dir = randn<double>(probe.shape, rng, 1.0);
        reports.push_back(
            run_case("conv2d_s2_p1", store,
                     [dir](GraphT<double>& g) {
                         return project(g,
                                        g.conv2d_op(g.param("x"), g.param("w"), g.param("b"), 2,
                                                    1),
                                        dir);
                     },
                     tol, seed));
        const A probe1 = kern::conv2d<double>(store.value("x"), store.value("w"), nullptr, 1, 1);
        const A dir1 = randn<double>(probe1.shape, rng, 1.0);
        reports.push_back(
            run_case("conv2d_s1_p1", store,
                     [dir1](GraphT<double>& g) {
                         return project(g,
                                        g.conv2d_op(g.param("x"), g.param("w"), g.param("b"), 1,
                                                    1),
                                        dir1);
                     },
                     tol, seed));
    }
    { // pointwise conv without bias
        ParamStoreT<double> store;
        store.create("x", randn<double>({4, 5, 3}, rng, 1.0));
        store.create("w", randn<double>({1, 1, 3, 2}, rng, 0.5));
        const A dir = randn<double>({4, 5, 2}, rng, 1.0);
        reports.push_back(run_case(
            "conv2d_1x1_nobias", store,
            [dir](GraphT<double>& g) {
                return project(g, g.conv2d_op(g.param("x"), g.param("w"), -1, 1, 0), dir);
            },
            tol, seed));
    }

    { // bilinear resize, up and down
        ParamStoreT<double> store;
        store.create("x", randn<double>({4, 6, 2}, rng, 1.0));
        const A dir_up = randn<double>({7, 9, 2}, rng, 1.0);
        const A dir_dn = randn<double>({2, 3, 2}, rng, 1.0);
        reports.push_back(run_case("bilinear_resize_up", store,
                                   [dir_up](GraphT<double>& g) {
                                       return project(
                                           g, g.bilinear_resize_op(g.param("x"), 7, 9), dir_up);
                                   },
                                   tol, seed));
        reports.push_back(run_case("bilinear_resize_down", store,
                                   [dir_dn](GraphT<double>& g) {
                                       return project(
                                           g, g.bilinear_resize_op(g.param("x"), 2, 3), dir_dn);
                                   },
                                   tol, seed));
    }

    simple("layer_norm", {3, 8},
           [](GraphT<double>& g, int x) { return g.layer_norm_op(x); });

    { // global average pool
        ParamStoreT<double> store;
        store.create("x", randn<double>({4, 5, 3}, rng, 1.0));
        const A dir = randn<double>({3}, rng, 1.0);
        reports.push_back(run_case("global_avg_pool", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.global_avg_pool_op(g.param("x")), dir);
                                   },
                                   tol, seed));
    }

    { // windowed attention, multi-head, window smaller than the map
        ParamStoreT<double> store;
        store.create("q", randn<double>({5, 5, 4}, rng, 0.7));
        store.create("k", randn<double>({5, 5, 4}, rng, 0.7));
        store.create("v", randn<double>({5, 5, 4}, rng, 0.7));
        const A dir = randn<double>({5, 5, 4}, rng, 1.0);
        reports.push_back(run_case(
            "na_k3_h2", store,
            [dir](GraphT<double>& g) {
                return project(g, g.na_op(g.param("q"), g.param("k"), g.param("v"), 3, 2), dir);
            },
            tol, seed));
        reports.push_back(run_case(
            "na_k5_h1", store,
            [dir](GraphT<double>& g) {
                return project(g, g.na_op(g.param("q"), g.param("k"), g.param("v"), 5, 1), dir);
            },
            tol, seed));
    }

    { // gather_rows
        ParamStoreT<double> store;
        store.create("x", randn<double>({4, 5}, rng, 1.0));
        const A dir = randn<double>({4}, rng, 1.0);
        const std::vector<int> idx {1, 0, 4, 2};
        reports.push_back(run_case("gather_rows", store,
                                   [dir, idx](GraphT<double>& g) {
                                       return project(g, g.gather_rows(g.param("x"), idx), dir);
                                   },
                                   tol, seed));
    }

    { // top-k retention with selection-safe gaps between entries
        ParamStoreT<double> store;
        store.create("w", spaced_values(rng, 6));
        const A dir = randn<double>({6}, rng, 1.0);
        reports.push_back(run_case("topk_mask_k3", store,
                                   [dir](GraphT<double>& g) {
                                       return project(g, g.topk_mask(g.param("w"), 3), dir);
                                   },
                                   tol, seed));
    }

    { // per-element vector scaling
        ParamStoreT<double> store;
        store.create("vec", randn<double>({7}, rng, 1.0));
        store.create("w", randn<double>({4}, rng, 1.0));
        const A dir = randn<double>({7}, rng, 1.0);
        reports.push_back(run_case(
            "scale_by_element", store,
            [dir](GraphT<double>& g) {
                return project(g, g.scale_by_element(g.param("vec"), g.param("w"), 2), dir);
            },
            tol, seed));
    }

    return reports;
}

} // namespace iqc
