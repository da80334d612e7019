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

#include "iqc/model.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace iqc {

// Dynamic task weighting from loss-descent ratios: with fewer than two
// recorded epochs every weight is 1; afterwards each task's ratio
// r_k = L(t-1)/L(t-2) feeds a temperature softmax scaled by the task
// count, so the weights always sum to the task count and approach 1 as
// the temperature grows.
struct DwaState {
    double temperature = 2.0;
    int task_count = 2;
    std::vector<std::vector<double>> history;

    void push(const std::vector<double>& epoch_losses)
    {
        require_arg(static_cast<int>(epoch_losses.size()) == task_count,
                    "loss count does not match the task count");
        history.push_back(epoch_losses);
    }

    std::vector<double> weights() const
    {
        std::vector<double> out(static_cast<std::size_t>(task_count), 1.0);
        if (history.size() < 2)
            return out;
        const std::vector<double>& prev1 = history[history.size() - 1];
        const std::vector<double>& prev2 = history[history.size() - 2];
        std::vector<double> ratio(static_cast<std::size_t>(task_count), 1.0);
        for (int k = 0; k < task_count; ++k) {
            if (prev2[static_cast<std::size_t>(k)] <= 0.0) {
                warn("non-positive task loss in weighting history; using ratio 1");
                ratio[static_cast<std::size_t>(k)] = 1.0;
            } else {
                ratio[static_cast<std::size_t>(k)]
                    = prev1[static_cast<std::size_t>(k)] / prev2[static_cast<std::size_t>(k)];
            }
        }
        double denom = 0.0;
        for (int k = 0; k < task_count; ++k)
            denom += std::exp(ratio[static_cast<std::size_t>(k)] / temperature);
        for (int k = 0; k < task_count; ++k)
            out[static_cast<std::size_t>(k)] = task_count
                                               * std::exp(ratio[static_cast<std::size_t>(k)]
                                                          / temperature)
                                               / denom;
        return out;
    }
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected adaptive-moment update over every parameter; `step`
// counts updates starting at 1.  The calibration parameters are plain
// affine bookkeeping, not trained weights, and are skipped.
inline void adam_step(ParamStore& store, double lr, long step, const AdamConfig& cfg = {})
{
    require_arg(step >= 1, "step count starts at 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (auto& [name, entry] : store) {
        if (name.rfind("calib.", 0) == 0)
            continue;
        for (std::size_t i = 0; i < entry.value.data.size(); ++i) {
            const double g = entry.grad.data[i];
            const double m = cfg.beta1 * entry.m.data[i] + (1.0 - cfg.beta1) * g;
            const double v = cfg.beta2 * entry.v.data[i] + (1.0 - cfg.beta2) * g * g;
            entry.m.data[i] = static_cast<float>(m);
            entry.v.data[i] = static_cast<float>(v);
            entry.value.data[i] -= static_cast<float>(lr * (m / bc1)
                                                      / (std::sqrt(v / bc2) + cfg.eps));
        }
    }
}

// Half-cosine decay over the epoch index with both endpoints pinned
// exactly: epoch 0 yields lr_init and the final epoch yields lr_min.
inline double cosine_lr(int epoch, int epochs, double lr_init, double lr_min)
{
    require_arg(epochs >= 1 && epoch >= 0 && epoch < epochs, "epoch index out of range");
    if (epoch == 0)
        return lr_init;
    if (epoch == epochs - 1)
        return lr_min;
    const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
    return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(kPi * t));
}

struct ManifestEntry {
    std::string id;
    std::string path; // resolved against the manifest directory when relative
    double mos = 0.0;
    int situation = 0;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::string dir;
};

// CSV with header "id,path,mos,situation".
Manifest read_manifest_csv(const std::string& path);

struct TrainConfig {
    int epochs = 50;
    int batch = 32;
    double lr_init = 1e-4;
    double lr_min = 1e-6;
    double train_frac = 0.8;
    double gamma = 1.0; // regression loss exponent
    int aug_repeat = 1; // augmented passes over the training split per epoch
    int eval_rolls = 1; // plan rotations averaged per validation prediction
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double loss_cls = 0.0;
    double loss_reg = 0.0;
    double loss_total = 0.0;
    double lambda_cls = 0.0;
    double lambda_reg = 0.0;
    double val_srcc = 0.0;
    double val_plcc = 0.0; // raw Pearson on the validation split
    double val_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> log;
    int best_epoch = -1;
    double best_val_srcc = 0.0;
    std::string best_path;
    std::string final_path;
    std::string log_path;
};

// Full training drive: loads the manifest images, pre-extracts viewports,
// does a seeded 80/20 split, trains with the weighted two-task objective,
// checkpoints the best-validation and final models (with an affine
// score-to-MOS calibration stored alongside the weights), and writes one
// JSON line per epoch.
TrainResult train_model(Model& model, const Manifest& manifest, const TrainConfig& cfg);

// Per-image predictions of a trained model over a manifest.
struct EvalRow {
    std::string id;
    double score = 0.0;       // uncalibrated model score
    double calibrated = 0.0;  // affine-mapped to the rating scale
    int pred_situation = 0;
    int true_situation = 0;
    double mos = 0.0;
};

// `rolls` > 1 averages predictions over that many evenly spaced longitude
// rotations of the sampling plan; quality of an omnidirectional image does
// not depend on where the plan is anchored, so the average only removes
// anchoring variance.
std::vector<EvalRow> evaluate_manifest(const Model& model, const Manifest& manifest,
                                       int rolls = 1);

} // namespace iqc
