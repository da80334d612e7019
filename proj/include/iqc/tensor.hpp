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

#include "iqc/common.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace iqc {

// Dense row-major array of small rank.  Shapes use the conventions
// [H, W, C] for feature maps, [rows, cols] for matrices, [n] for vectors.
template <typename T>
struct ArrayT {
    std::vector<int> shape;
    std::vector<T> data;

    static ArrayT zeros(std::vector<int> s)
    {
        ArrayT a;
        a.shape = std::move(s);
        a.data.assign(a.count(a.shape), T(0));
        return a;
    }

    static ArrayT full(std::vector<int> s, T v)
    {
        ArrayT a = zeros(std::move(s));
        std::fill(a.data.begin(), a.data.end(), v);
        return a;
    }

    static ArrayT from_vector(std::vector<T> v)
    {
        ArrayT a;
        a.shape = {static_cast<int>(v.size())};
        a.data = std::move(v);
        return a;
    }

    static std::size_t count(const std::vector<int>& s)
    {
        std::size_t n = 1;
        for (int d : s) {
            require_arg(d > 0, "array dimensions must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    bool same_shape(const ArrayT& o) const { return shape == o.shape; }
};

using Array = ArrayT<float>;

template <typename T>
ArrayT<T> randn(std::vector<int> shape, std::mt19937_64& rng, double stddev)
{
    ArrayT<T> a = ArrayT<T>::zeros(std::move(shape));
    std::normal_distribution<double> gauss(0.0, stddev);
    for (T& v : a.data)
        v = static_cast<T>(gauss(rng));
    return a;
}

// Named parameter set: one value/gradient pair per tensor plus the first
// and second moment buffers used by the optimizer.  Iteration order is the
// (sorted) name order, which keeps serialization deterministic.
template <typename T>
class ParamStoreT {
public:
    struct Entry {
        ArrayT<T> value;
        ArrayT<T> grad;
        ArrayT<T> m;
        ArrayT<T> v;
    };

    void create(const std::string& name, ArrayT<T> init)
    {
        require_state(entries_.find(name) == entries_.end(),
                      "parameter '" + name + "' already exists");
        Entry e;
        e.grad = ArrayT<T>::zeros(init.shape);
        e.m = ArrayT<T>::zeros(init.shape);
        e.v = ArrayT<T>::zeros(init.shape);
        e.value = std::move(init);
        entries_.emplace(name, std::move(e));
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    Entry& entry(const std::string& name)
    {
        auto it = entries_.find(name);
        require_state(it != entries_.end(), "unknown parameter '" + name + "'");
        return it->second;
    }

    const Entry& entry(const std::string& name) const
    {
        auto it = entries_.find(name);
        require_state(it != entries_.end(), "unknown parameter '" + name + "'");
        return it->second;
    }

    ArrayT<T>& value(const std::string& name) { return entry(name).value; }
    const ArrayT<T>& value(const std::string& name) const { return entry(name).value; }
    ArrayT<T>& grad(const std::string& name) { return entry(name).grad; }

    void zero_grad()
    {
        for (auto& [name, e] : entries_)
            std::fill(e.grad.data.begin(), e.grad.data.end(), T(0));
    }

    std::vector<std::string> names() const
    {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [name, e] : entries_)
            out.push_back(name);
        return out;
    }

    std::size_t size() const { return entries_.size(); }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::map<std::string, Entry> entries_;
};

using ParamStore = ParamStoreT<float>;

} // namespace iqc
