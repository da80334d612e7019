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

#include "iqc/kernels.hpp"
#include "iqc/tensor.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace iqc {

// Eager define-by-run reverse-mode tape.  Every op evaluates immediately
// and records a closure that adds into its parents' gradients; backward
// walks the tape once in reverse creation order (creation order is a
// topological order by construction).  A graph is single-use: backward may
// run once, afterwards the graph is rebuilt for the next step.  Gradients
// of nodes the loss never reaches stay zero.
template <typename T>
class GraphT {
public:
    explicit GraphT(ParamStoreT<T>* store = nullptr) : store_(store) {}

    int leaf(ArrayT<T> v, bool requires_grad = false)
    {
        return push(std::move(v), requires_grad, {}, nullptr);
    }

    int constant(ArrayT<T> v) { return leaf(std::move(v), false); }

    int scalar(double v)
    {
        ArrayT<T> a = ArrayT<T>::zeros({1});
        a.data[0] = static_cast<T>(v);
        return constant(std::move(a));
    }

    // Parameter leaf bound to the store; repeated lookups of one name
    // share a node so every use contributes to the same gradient, which
    // is flushed into the store after backward.
    int param(const std::string& name)
    {
        require_state(store_ != nullptr, "graph has no parameter store");
        auto it = param_ids_.find(name);
        if (it != param_ids_.end())
            return it->second;
        const int id = push(store_->value(name), true, {}, nullptr);
        nodes_[id].param_name = name;
        param_ids_.emplace(name, id);
        return id;
    }

    const ArrayT<T>& value(int id) const { return nodes_[check(id)].value; }

    const ArrayT<T>& grad(int id)
    {
        ensure_grad(check(id));
        return nodes_[id].grad;
    }

    std::size_t size() const { return nodes_.size(); }

    // ---- elementwise ----

    int add(int a, int b)
    {
        require_same(a, b, "add");
        ArrayT<T> y = nodes_[a].value;
        const ArrayT<T>& vb = nodes_[b].value;
        for (std::size_t i = 0; i < y.data.size(); ++i)
            y.data[i] += vb.data[i];
        return push(std::move(y), needs(a) || needs(b), {a, b}, [this, a, b](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            if (needs(a))
                axpy(a, g, 1.0);
            if (needs(b))
                axpy(b, g, 1.0);
        });
    }

    int sub(int a, int b)
    {
        require_same(a, b, "sub");
        ArrayT<T> y = nodes_[a].value;
        const ArrayT<T>& vb = nodes_[b].value;
        for (std::size_t i = 0; i < y.data.size(); ++i)
            y.data[i] -= vb.data[i];
        return push(std::move(y), needs(a) || needs(b), {a, b}, [this, a, b](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            if (needs(a))
                axpy(a, g, 1.0);
            if (needs(b))
                axpy(b, g, -1.0);
        });
    }

    int mul(int a, int b)
    {
        require_same(a, b, "mul");
        ArrayT<T> y = nodes_[a].value;
        const ArrayT<T>& vb = nodes_[b].value;
        for (std::size_t i = 0; i < y.data.size(); ++i)
            y.data[i] *= vb.data[i];
        return push(std::move(y), needs(a) || needs(b), {a, b}, [this, a, b](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            if (needs(a)) {
                ArrayT<T>& ga = ensure_grad(a);
                const ArrayT<T>& vb = nodes_[b].value;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i] * vb.data[i];
            }
            if (needs(b)) {
                ArrayT<T>& gb = ensure_grad(b);
                const ArrayT<T>& va = nodes_[a].value;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    gb.data[i] += g.data[i] * va.data[i];
            }
        });
    }

    int scale(int a, double s)
    {
        ArrayT<T> y = nodes_[check(a)].value;
        for (T& v : y.data)
            v = static_cast<T>(v * s);
        return push(std::move(y), needs(a), {a}, [this, a, s](int self) {
            if (needs(a))
                axpy(a, nodes_[self].grad, s);
        });
    }

    int add_const(int a, double cst)
    {
        ArrayT<T> y = nodes_[check(a)].value;
        for (T& v : y.data)
            v = static_cast<T>(v + cst);
        return push(std::move(y), needs(a), {a}, [this, a](int self) {
            if (needs(a))
                axpy(a, nodes_[self].grad, 1.0);
        });
    }

    // a[..., C] + bias[C], broadcast over every leading axis.
    int add_bias(int a, int bias)
    {
        const ArrayT<T>& va = nodes_[check(a)].value;
        const ArrayT<T>& vb = nodes_[check(bias)].value;
        require_arg(vb.rank() == 1 && va.dim(va.rank() - 1) == vb.dim(0),
                    "add_bias shape mismatch");
        ArrayT<T> y = va;
        const int c = vb.dim(0);
        const std::size_t rows = y.numel() / c;
        for (std::size_t r = 0; r < rows; ++r)
            for (int i = 0; i < c; ++i)
                y.data[r * c + i] += vb.data[i];
        return push(std::move(y), needs(a) || needs(bias), {a, bias},
                    [this, a, bias, c](int self) {
                        const ArrayT<T>& g = nodes_[self].grad;
                        if (needs(a))
                            axpy(a, g, 1.0);
                        if (needs(bias)) {
                            ArrayT<T>& gb = ensure_grad(bias);
                            const std::size_t rows = g.numel() / c;
                            for (int i = 0; i < c; ++i) {
                                double acc = 0.0;
                                for (std::size_t r = 0; r < rows; ++r)
                                    acc += static_cast<double>(g.data[r * c + i]);
                                gb.data[i] += static_cast<T>(acc);
                            }
                        }
                    });
    }

    int gelu_op(int a)
    {
        ArrayT<T> y = kern::gelu(nodes_[check(a)].value);
        return push(std::move(y), needs(a), {a}, [this, a](int self) {
            if (needs(a))
                kern::gelu_bwd(ensure_grad(a), nodes_[self].grad, nodes_[a].value);
        });
    }

    int log_op(int a)
    {
        const ArrayT<T>& va = nodes_[check(a)].value;
        ArrayT<T> y = va;
        for (T& v : y.data) {
            require_domain(v > T(0), "log of a non-positive value");
            v = std::log(v);
        }
        return push(std::move(y), needs(a), {a}, [this, a](int self) {
            if (needs(a)) {
                ArrayT<T>& ga = ensure_grad(a);
                const ArrayT<T>& g = nodes_[self].grad;
                const ArrayT<T>& va = nodes_[a].value;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i] / va.data[i];
            }
        });
    }

    // Gradient passes only where the input was strictly inside [lo, hi];
    // the mask is taken on the original values.
    int clamp_op(int a, double lo, double hi)
    {
        require_arg(lo < hi, "clamp bounds out of order");
        ArrayT<T> y = nodes_[check(a)].value;
        for (T& v : y.data)
            v = std::clamp(v, static_cast<T>(lo), static_cast<T>(hi));
        return push(std::move(y), needs(a), {a}, [this, a, lo, hi](int self) {
            if (needs(a)) {
                ArrayT<T>& ga = ensure_grad(a);
                const ArrayT<T>& g = nodes_[self].grad;
                const ArrayT<T>& va = nodes_[a].value;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    if (va.data[i] >= static_cast<T>(lo) && va.data[i] <= static_cast<T>(hi))
                        ga.data[i] += g.data[i];
            }
        });
    }

    // |x|^gamma for gamma in {1, 2}; the gamma = 1 subgradient at 0 is 0.
    int abs_pow(int a, double gamma)
    {
        require_arg(gamma == 1.0 || gamma == 2.0, "abs_pow supports gamma 1 or 2");
        ArrayT<T> y = nodes_[check(a)].value;
        for (T& v : y.data)
            v = gamma == 1.0 ? std::abs(v) : v * v;
        return push(std::move(y), needs(a), {a}, [this, a, gamma](int self) {
            if (needs(a)) {
                ArrayT<T>& ga = ensure_grad(a);
                const ArrayT<T>& g = nodes_[self].grad;
                const ArrayT<T>& va = nodes_[a].value;
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    if (gamma == 1.0) {
                        const T s = va.data[i] > T(0) ? T(1) : (va.data[i] < T(0) ? T(-1) : T(0));
                        ga.data[i] += g.data[i] * s;
                    } else {
                        ga.data[i] += g.data[i] * T(2) * va.data[i];
                    }
                }
            }
        });
    }

    int sqrt_op(int a)
    {
        const ArrayT<T>& va = nodes_[check(a)].value;
        ArrayT<T> y = va;
        for (T& v : y.data) {
            require_domain(v > T(0), "sqrt of a non-positive value");
            v = std::sqrt(v);
        }
        return push(std::move(y), needs(a), {a}, [this, a](int self) {
            if (needs(a)) {
                ArrayT<T>& ga = ensure_grad(a);
                const ArrayT<T>& g = nodes_[self].grad;
                const ArrayT<T>& vy = nodes_[self].value;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i] / (T(2) * vy.data[i]);
            }
        });
    }

    int softmax(int a, int axis)
    {
        ArrayT<T> y = kern::softmax_axis(nodes_[check(a)].value, axis);
        return push(std::move(y), needs(a), {a}, [this, a, axis](int self) {
            if (needs(a))
                kern::softmax_axis_bwd(ensure_grad(a), nodes_[self].grad, nodes_[self].value,
                                       axis);
        });
    }

    // ---- reductions and scalar broadcasts ----

    int reduce_sum(int a)
    {
        const ArrayT<T>& va = nodes_[check(a)].value;
        double acc = 0.0;
        for (T v : va.data)
            acc += static_cast<double>(v);
        ArrayT<T> y = ArrayT<T>::zeros({1});
        y.data[0] = static_cast<T>(acc);
        return push(std::move(y), needs(a), {a}, [this, a](int self) {
            if (needs(a)) {
                ArrayT<T>& ga = ensure_grad(a);
                const T g = nodes_[self].grad.data[0];
                for (T& v : ga.data)
                    v += g;
            }
        });
    }

    int reduce_mean(int a)
    {
        const std::size_t n = nodes_[check(a)].value.numel();
        return scale(reduce_sum(a), 1.0 / static_cast<double>(n));
    }

    // a - s, s a [1] node broadcast over a.
    int sub_scalar(int a, int s)
    {
        require_arg(nodes_[check(s)].value.numel() == 1, "broadcast scalar must have one element");
        ArrayT<T> y = nodes_[check(a)].value;
        const T sv = nodes_[s].value.data[0];
        for (T& v : y.data)
            v -= sv;
        return push(std::move(y), needs(a) || needs(s), {a, s}, [this, a, s](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            if (needs(a))
                axpy(a, g, 1.0);
            if (needs(s)) {
                double acc = 0.0;
                for (T v : g.data)
                    acc += static_cast<double>(v);
                ensure_grad(s).data[0] -= static_cast<T>(acc);
            }
        });
    }

    // a / s, s a [1] node broadcast over a.
    int div_scalar(int a, int s)
    {
        require_arg(nodes_[check(s)].value.numel() == 1, "broadcast scalar must have one element");
        const T sv = nodes_[s].value.data[0];
        require_domain(std::abs(static_cast<double>(sv)) > 1e-300, "division by zero scalar");
        ArrayT<T> y = nodes_[check(a)].value;
        for (T& v : y.data)
            v /= sv;
        return push(std::move(y), needs(a) || needs(s), {a, s}, [this, a, s](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            const T sv = nodes_[s].value.data[0];
            if (needs(a))
                axpy(a, g, 1.0 / static_cast<double>(sv));
            if (needs(s)) {
                const ArrayT<T>& va = nodes_[a].value;
                double acc = 0.0;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    acc += static_cast<double>(g.data[i]) * va.data[i];
                ensure_grad(s).data[0]
                    -= static_cast<T>(acc / (static_cast<double>(sv) * sv));
            }
        });
    }

    // ---- shape ops ----

    int reshape(int a, std::vector<int> shape)
    {
        const ArrayT<T>& va = nodes_[check(a)].value;
        require_arg(ArrayT<T>::count(shape) == va.numel(), "reshape changes element count");
        ArrayT<T> y;
        y.shape = std::move(shape);
        y.data = va.data;
        return push(std::move(y), needs(a), {a}, [this, a](int self) {
            if (needs(a)) {
                ArrayT<T>& ga = ensure_grad(a);
                const ArrayT<T>& g = nodes_[self].grad;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i];
            }
        });
    }

    // Concatenation along axis 0; inputs agree on all trailing dims.
    int concat(const std::vector<int>& ids)
    {
        require_arg(!ids.empty(), "concat of nothing");
        const ArrayT<T>& first = nodes_[check(ids[0])].value;
        std::vector<int> shape = first.shape;
        bool any = false;
        int total = 0;
        for (int id : ids) {
            const ArrayT<T>& v = nodes_[check(id)].value;
            require_arg(v.rank() == first.rank(), "concat rank mismatch");
            for (int d = 1; d < first.rank(); ++d)
                require_arg(v.dim(d) == first.dim(d), "concat trailing shape mismatch");
            total += v.dim(0);
            any = any || needs(id);
        }
        shape[0] = total;
        ArrayT<T> y = ArrayT<T>::zeros(shape);
        std::size_t off = 0;
        for (int id : ids) {
            const ArrayT<T>& v = nodes_[id].value;
            std::copy(v.data.begin(), v.data.end(), y.data.begin() + off);
            off += v.numel();
        }
        std::vector<int> parents = ids;
        return push(std::move(y), any, parents, [this, parents](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            std::size_t off = 0;
            for (int id : parents) {
                const std::size_t n = nodes_[id].value.numel();
                if (needs(id)) {
                    ArrayT<T>& gp = ensure_grad(id);
                    for (std::size_t i = 0; i < n; ++i)
                        gp.data[i] += g.data[off + i];
                }
                off += n;
            }
        });
    }

    // Stacks equal-shaped arrays along a new leading axis.
    int stack(const std::vector<int>& ids)
    {
        require_arg(!ids.empty(), "stack of nothing");
        const ArrayT<T>& first = nodes_[check(ids[0])].value;
        bool any = false;
        for (int id : ids) {
            require_arg(nodes_[check(id)].value.same_shape(first), "stack shape mismatch");
            any = any || needs(id);
        }
        std::vector<int> shape;
        shape.push_back(static_cast<int>(ids.size()));
        shape.insert(shape.end(), first.shape.begin(), first.shape.end());
        ArrayT<T> y = ArrayT<T>::zeros(shape);
        const std::size_t n = first.numel();
        for (std::size_t s = 0; s < ids.size(); ++s)
            std::copy(nodes_[ids[s]].value.data.begin(), nodes_[ids[s]].value.data.end(),
                      y.data.begin() + s * n);
        std::vector<int> parents = ids;
        return push(std::move(y), any, parents, [this, parents, n](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            for (std::size_t s = 0; s < parents.size(); ++s) {
                if (!needs(parents[s]))
                    continue;
                ArrayT<T>& gp = ensure_grad(parents[s]);
                for (std::size_t i = 0; i < n; ++i)
                    gp.data[i] += g.data[s * n + i];
            }
        });
    }

    // Elementwise sum of equal-shaped arrays.  Coordinates accumulate in
    // extended precision, which makes the rounded result independent of
    // the summand order for realistically scaled inputs.
    int sum_list(const std::vector<int>& ids)
    {
        require_arg(!ids.empty(), "sum of nothing");
        const ArrayT<T>& first = nodes_[check(ids[0])].value;
        bool any = false;
        for (int id : ids) {
            require_arg(nodes_[check(id)].value.same_shape(first), "sum shape mismatch");
            any = any || needs(id);
        }
        using Acc = std::conditional_t<std::is_same_v<T, double>, long double, double>;
        ArrayT<T> y = ArrayT<T>::zeros(first.shape);
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            Acc acc = 0;
            for (int id : ids)
                acc += static_cast<Acc>(nodes_[id].value.data[i]);
            y.data[i] = static_cast<T>(acc);
        }
        std::vector<int> parents = ids;
        return push(std::move(y), any, parents, [this, parents](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            for (int id : parents)
                if (needs(id))
                    axpy(id, g, 1.0);
        });
    }

    // y = sum_s gates[s] * stacked[s, ...].
    int stack_weighted_sum(int stacked, int gates)
    {
        const ArrayT<T>& vs = nodes_[check(stacked)].value;
        const ArrayT<T>& vg = nodes_[check(gates)].value;
        require_arg(vs.rank() >= 2 && vg.rank() == 1 && vg.dim(0) == vs.dim(0),
                    "weighted sum expects stacked[S,...] and gates[S]");
        const int s_count = vs.dim(0);
        const std::size_t n = vs.numel() / s_count;
        std::vector<int> shape(vs.shape.begin() + 1, vs.shape.end());
        ArrayT<T> y = ArrayT<T>::zeros(shape);
        for (int s = 0; s < s_count; ++s) {
            const T gk = vg.data[s];
            for (std::size_t i = 0; i < n; ++i)
                y.data[i] += gk * vs.data[s * n + i];
        }
        return push(std::move(y), needs(stacked) || needs(gates), {stacked, gates},
                    [this, stacked, gates, s_count, n](int self) {
                        const ArrayT<T>& g = nodes_[self].grad;
                        const ArrayT<T>& vs = nodes_[stacked].value;
                        const ArrayT<T>& vg = nodes_[gates].value;
                        if (needs(stacked)) {
                            ArrayT<T>& gs = ensure_grad(stacked);
                            for (int s = 0; s < s_count; ++s)
                                for (std::size_t i = 0; i < n; ++i)
                                    gs.data[s * n + i] += vg.data[s] * g.data[i];
                        }
                        if (needs(gates)) {
                            ArrayT<T>& gg = ensure_grad(gates);
                            for (int s = 0; s < s_count; ++s) {
                                double acc = 0.0;
                                for (std::size_t i = 0; i < n; ++i)
                                    acc += static_cast<double>(g.data[i]) * vs.data[s * n + i];
                                gg.data[s] += static_cast<T>(acc);
                            }
                        }
                    });
    }

    // ---- matrix / map ops ----

    int matmul_op(int a, int b)
    {
        ArrayT<T> y = kern::matmul(nodes_[check(a)].value, nodes_[check(b)].value);
        return push(std::move(y), needs(a) || needs(b), {a, b}, [this, a, b](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            if (needs(a))
                kern::matmul_bwd_a(ensure_grad(a), g, nodes_[b].value);
            if (needs(b))
                kern::matmul_bwd_b(ensure_grad(b), g, nodes_[a].value);
        });
    }

    int conv2d_op(int x, int w, int b, int stride, int pad)
    {
        const ArrayT<T>* bias = b >= 0 ? &nodes_[check(b)].value : nullptr;
        ArrayT<T> y = kern::conv2d(nodes_[check(x)].value, nodes_[check(w)].value, bias, stride,
                                   pad);
        const bool any = needs(x) || needs(w) || (b >= 0 && needs(b));
        std::vector<int> parents = {x, w};
        if (b >= 0)
            parents.push_back(b);
        return push(std::move(y), any, parents, [this, x, w, b, stride, pad](int self) {
            const ArrayT<T>& g = nodes_[self].grad;
            if (needs(x))
                kern::conv2d_bwd_x(ensure_grad(x), g, nodes_[w].value, stride, pad);
            if (needs(w))
                kern::conv2d_bwd_w(ensure_grad(w), g, nodes_[x].value, stride, pad);
            if (b >= 0 && needs(b))
                kern::conv2d_bwd_b(ensure_grad(b), g);
        });
    }

    int bilinear_resize_op(int x, int oh, int ow)
    {
        ArrayT<T> y = kern::bilinear_resize(nodes_[check(x)].value, oh, ow);
        return push(std::move(y), needs(x), {x}, [this, x](int self) {
            if (needs(x))
                kern::bilinear_resize_bwd(ensure_grad(x), nodes_[self].grad);
        });
    }

    int layer_norm_op(int x)
    {
        ArrayT<T> y = kern::layer_norm(nodes_[check(x)].value);
        return push(std::move(y), needs(x), {x}, [this, x](int self) {
            if (needs(x))
                kern::layer_norm_bwd(ensure_grad(x), nodes_[self].grad, nodes_[x].value);
        });
    }

    int global_avg_pool_op(int x)
    {
        ArrayT<T> y = kern::global_avg_pool(nodes_[check(x)].value);
        return push(std::move(y), needs(x), {x}, [this, x](int self) {
            if (needs(x))
                kern::global_avg_pool_bwd(ensure_grad(x), nodes_[self].grad);
        });
    }

    int na_op(int q, int k, int v, int kernel, int heads)
    {
        ArrayT<T> y = kern::na_forward(nodes_[check(q)].value, nodes_[check(k)].value,
                                       nodes_[check(v)].value, kernel, heads);
        return push(std::move(y), needs(q) || needs(k) || needs(v), {q, k, v},
                    [this, q, k, v, kernel, heads](int self) {
                        if (!(needs(q) || needs(k) || needs(v)))
                            return;
                        // The two-pass kernel fills all three gradients at
                        // once; unused ones land in scratch buffers.
                        ArrayT<T> scratch_q, scratch_k, scratch_v;
                        ArrayT<T>* gq = &scratch_q;
                        ArrayT<T>* gk = &scratch_k;
                        ArrayT<T>* gv = &scratch_v;
                        if (needs(q))
                            gq = &ensure_grad(q);
                        else
                            scratch_q = ArrayT<T>::zeros(nodes_[q].value.shape);
                        if (needs(k))
                            gk = &ensure_grad(k);
                        else
                            scratch_k = ArrayT<T>::zeros(nodes_[k].value.shape);
                        if (needs(v))
                            gv = &ensure_grad(v);
                        else
                            scratch_v = ArrayT<T>::zeros(nodes_[v].value.shape);
                        kern::na_backward(*gq, *gk, *gv, nodes_[self].grad, nodes_[q].value,
                                          nodes_[k].value, nodes_[v].value, kernel, heads);
                    });
    }

    // ---- selection ops ----

    // y[b] = x[b, idx[b]] for x[B, C].
    int gather_rows(int x, std::vector<int> idx)
    {
        const ArrayT<T>& vx = nodes_[check(x)].value;
        require_arg(vx.rank() == 2, "gather_rows expects a matrix");
        const int bsz = vx.dim(0);
        const int c = vx.dim(1);
        require_arg(static_cast<int>(idx.size()) == bsz, "gather_rows index count mismatch");
        for (int i : idx)
            require_arg(i >= 0 && i < c, "gather_rows index out of range");
        ArrayT<T> y = ArrayT<T>::zeros({bsz});
        for (int bi = 0; bi < bsz; ++bi)
            y.data[bi] = vx.data[static_cast<std::size_t>(bi) * c + idx[bi]];
        return push(std::move(y), needs(x), {x}, [this, x, idx = std::move(idx), c](int self) {
            if (needs(x)) {
                ArrayT<T>& gx = ensure_grad(x);
                const ArrayT<T>& g = nodes_[self].grad;
                for (std::size_t bi = 0; bi < idx.size(); ++bi)
                    gx.data[bi * c + idx[bi]] += g.data[bi];
            }
        });
    }

    // Keeps the k largest entries of a weight vector (ties keep the lower
    // index) and zeroes the rest.  The selection mask itself carries no
    // gradient; gradients flow only through the kept entries.
    int topk_mask(int w, int k, std::vector<int>* selected_out = nullptr)
    {
        const ArrayT<T>& vw = nodes_[check(w)].value;
        require_arg(vw.rank() == 1, "topk_mask expects a vector");
        const int m = vw.dim(0);
        require_arg(k >= 1 && k <= m, "selection count out of range");
        std::vector<int> order(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i)
            order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (vw.data[a] != vw.data[b])
                return vw.data[a] > vw.data[b];
            return a < b;
        });
        std::vector<char> mask(static_cast<std::size_t>(m), 0);
        std::vector<int> selected(order.begin(), order.begin() + k);
        std::sort(selected.begin(), selected.end());
        for (int i : selected)
            mask[i] = 1;
        if (selected_out != nullptr)
            *selected_out = selected;
        ArrayT<T> y = ArrayT<T>::zeros({m});
        for (int i = 0; i < m; ++i)
            y.data[i] = mask[i] ? vw.data[i] : T(0);
        return push(std::move(y), needs(w), {w}, [this, w, mask = std::move(mask)](int self) {
            if (needs(w)) {
                ArrayT<T>& gw = ensure_grad(w);
                const ArrayT<T>& g = nodes_[self].grad;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    if (mask[i])
                        gw.data[i] += g.data[i];
            }
        });
    }

    // y = vec * weights[m]; the weight entry receives the dot product of
    // the upstream gradient with vec.
    int scale_by_element(int vec, int weights, int m)
    {
        const ArrayT<T>& vv = nodes_[check(vec)].value;
        const ArrayT<T>& vw = nodes_[check(weights)].value;
        require_arg(vw.rank() == 1 && m >= 0 && m < vw.dim(0),
                    "weight index out of range");
        ArrayT<T> y = vv;
        const T wv = vw.data[m];
        for (T& v : y.data)
            v *= wv;
        return push(std::move(y), needs(vec) || needs(weights), {vec, weights},
                    [this, vec, weights, m](int self) {
                        const ArrayT<T>& g = nodes_[self].grad;
                        const T wv = nodes_[weights].value.data[m];
                        if (needs(vec))
                            axpy(vec, g, static_cast<double>(wv));
                        if (needs(weights)) {
                            const ArrayT<T>& vv = nodes_[vec].value;
                            double acc = 0.0;
                            for (std::size_t i = 0; i < g.data.size(); ++i)
                                acc += static_cast<double>(g.data[i]) * vv.data[i];
                            ensure_grad(weights).data[m] += static_cast<T>(acc);
                        }
                    });
    }

    // ---- backward ----

    void backward(int loss)
    {
        require_arg(nodes_[check(loss)].value.numel() == 1, "backward needs a scalar loss");
        require_state(!backward_done_, "backward may run only once per graph");
        backward_done_ = true;
        ensure_grad(loss).data[0] = T(1);
        for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
            Node& node = nodes_[id];
            if (node.grad.data.empty() || !node.backfn)
                continue;
            node.backfn(id);
        }
        if (store_ != nullptr) {
            for (const auto& [name, id] : param_ids_) {
                if (nodes_[id].grad.data.empty())
                    continue;
                ArrayT<T>& dst = store_->grad(name);
                const ArrayT<T>& src = nodes_[id].grad;
                for (std::size_t i = 0; i < src.data.size(); ++i)
                    dst.data[i] += src.data[i];
            }
        }
    }

    bool backward_done() const { return backward_done_; }

private:
    struct Node {
        ArrayT<T> value;
        ArrayT<T> grad;
        bool requires_grad = false;
        std::function<void(int)> backfn;
        std::vector<int> parents;
        std::string param_name;
    };

    std::vector<Node> nodes_;
    std::map<std::string, int> param_ids_;
    ParamStoreT<T>* store_ = nullptr;
    bool backward_done_ = false;

    int check(int id) const
    {
        require_arg(id >= 0 && id < static_cast<int>(nodes_.size()), "unknown node id");
        return id;
    }

    bool needs(int id) const { return nodes_[id].requires_grad; }

    void require_same(int a, int b, const char* op)
    {
        require_arg(nodes_[check(a)].value.same_shape(nodes_[check(b)].value),
                    std::string(op) + ": shape mismatch");
    }

    ArrayT<T>& ensure_grad(int id)
    {
        Node& node = nodes_[id];
        if (node.grad.data.empty())
            node.grad = ArrayT<T>::zeros(node.value.shape);
        return node.grad;
    }

    void axpy(int dst, const ArrayT<T>& g, double s)
    {
        ArrayT<T>& gd = ensure_grad(dst);
        for (std::size_t i = 0; i < g.data.size(); ++i)
            gd.data[i] += static_cast<T>(s * g.data[i]);
    }

    int push(ArrayT<T> value, bool requires_grad, std::vector<int> parents,
             std::function<void(int)> backfn)
    {
        Node node;
        node.value = std::move(value);
        node.requires_grad = requires_grad;
        node.parents = std::move(parents);
        if (requires_grad)
            node.backfn = std::move(backfn);
        nodes_.push_back(std::move(node));
        return static_cast<int>(nodes_.size()) - 1;
    }
};

using Graph = GraphT<float>;

} // namespace iqc
