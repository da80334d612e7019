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

#include "iqc/graph.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace iqc {

struct GradCheckReport {
    std::string name;
    int coords = 0;         // parameter coordinates compared
    int failures = 0;       // coordinates over tolerance
    double max_rel_err = 0.0;

    bool passed() const { return coords > 0 && failures == 0; }
};

// Builds a fresh graph over the store and returns a scalar loss node.
// The builder must be pure: the loss value may depend only on the
// current parameter values, so repeated calls are comparable.
using LossBuilder = std::function<int(GraphT<double>&)>;

// Central finite differences against reverse-mode gradients for every
// parameter in the store.  Relative error is |a - f| / max(|a|, |f|, 1).
// A non-negative coordinate cap samples a seeded subset per parameter;
// -1 checks every coordinate.
GradCheckReport check_gradients(const std::string& name, ParamStoreT<double>& store,
                                const LossBuilder& build, double fd_eps = 1e-5,
                                double tol = 1e-6, int max_coords_per_param = -1,
                                std::uint64_t seed = 0);

// One seeded finite-difference check per differentiable graph op, each
// driven through a random-projection scalar loss.
std::vector<GradCheckReport> run_op_gradchecks(std::uint64_t seed, double tol = 1e-6);

} // namespace iqc
