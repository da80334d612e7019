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

#include <cmath>
#include <vector>

namespace iqc {

// Mean categorical cross-entropy over per-item probability vectors (one
// [4] node per item); probabilities are clamped away from zero before the
// logarithm.
template <typename T>
int cross_entropy_loss(GraphT<T>& g, const std::vector<int>& prob_nodes,
                       const std::vector<int>& labels, double clamp_eps = 1e-7)
{
    require_arg(!prob_nodes.empty(), "empty batch");
    require_arg(prob_nodes.size() == labels.size(), "probability/label count mismatch");
    const int classes = g.value(prob_nodes[0]).dim(0);
    for (int l : labels)
        require_arg(l >= 0 && l < classes, "label out of range");
    const int batch = g.stack(prob_nodes);
    const int picked = g.gather_rows(batch, labels);
    const int logp = g.log_op(g.clamp_op(picked, clamp_eps, 1.0));
    return g.scale(g.reduce_mean(logp), -1.0);
}

// Normalization-based regression loss: both the predictions and the
// targets are centered and projected to the unit sphere, then the
// difference is measured with exponent gamma (1 or 2).  The normalizer
// epsilon is chosen from the batch size so the loss lives in [0, 2]:
// the centered unit vectors differ by at most 2 in L2 norm, hence
// sum |d_i| <= 2*sqrt(B) (epsilon = 1/sqrt(B)) and sum d_i^2 <= 4
// (epsilon = 2/B).  A batch with constant targets cannot be normalized
// and falls back to plain mean absolute error with a warning.
template <typename T>
int norm_in_norm_loss(GraphT<T>& g, const std::vector<int>& score_nodes,
                      const std::vector<double>& mos, double gamma = 1.0)
{
    require_arg(gamma == 1.0 || gamma == 2.0, "loss exponent must be 1 or 2");
    require_arg(score_nodes.size() == mos.size(), "prediction/target count mismatch");
    const std::size_t b = mos.size();
    require_arg(b >= 2, "normalized loss needs a batch of at least 2");
    for (int id : score_nodes)
        require_arg(g.value(id).numel() == 1, "score nodes must be scalars");
    const int pred = g.concat(score_nodes);

    double mean = 0.0;
    for (double v : mos)
        mean += v;
    mean /= static_cast<double>(b);
    double norm_sq = 0.0;
    for (double v : mos)
        norm_sq += (v - mean) * (v - mean);
    if (std::sqrt(norm_sq) < 1e-12) {
        warn("constant-target batch; falling back to mean absolute error");
        ArrayT<T> target = ArrayT<T>::zeros({static_cast<int>(b)});
        for (std::size_t i = 0; i < b; ++i)
            target.data[i] = static_cast<T>(mos[i]);
        return g.reduce_mean(g.abs_pow(g.sub(pred, g.constant(std::move(target))), 1.0));
    }

    ArrayT<T> target = ArrayT<T>::zeros({static_cast<int>(b)});
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (std::size_t i = 0; i < b; ++i)
        target.data[i] = static_cast<T>((mos[i] - mean) * inv_norm);

    const int centered = g.sub_scalar(pred, g.reduce_mean(pred));
    const int pred_norm
        = g.sqrt_op(g.add_const(g.reduce_sum(g.mul(centered, centered)), 1e-12));
    const int unit = g.div_scalar(centered, pred_norm);
    const int diff = g.sub(unit, g.constant(std::move(target)));
    const double eps = gamma == 1.0 ? 1.0 / std::sqrt(static_cast<double>(b))
                                    : 2.0 / static_cast<double>(b);
    return g.scale(g.reduce_sum(g.abs_pow(diff, gamma)),
                   1.0 / (eps * static_cast<double>(b)));
}

} // namespace iqc
