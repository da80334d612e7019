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

#include "iqc/training.hpp"

#include "iqc/losses.hpp"
#include "iqc/stats.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace iqc {

namespace {

std::string trim_cr(std::string line)
{
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    return line;
}

} // namespace

Manifest read_manifest_csv(const std::string& path)
{
    std::ifstream is(path);
    require_state(is.good(), "cannot open " + path);
    std::string line;
    require_state(static_cast<bool>(std::getline(is, line)), path + ": empty file");
    require_state(trim_cr(line) == "id,path,mos,situation",
                  path + ": expected header id,path,mos,situation");
    Manifest manifest;
    manifest.dir = std::filesystem::path(path).parent_path().string();
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim_cr(line);
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string id, file, mos_str, situation_str;
        const bool ok = static_cast<bool>(std::getline(ss, id, ','))
                        && static_cast<bool>(std::getline(ss, file, ','))
                        && static_cast<bool>(std::getline(ss, mos_str, ','))
                        && static_cast<bool>(std::getline(ss, situation_str));
        require_state(ok, path + ":" + std::to_string(lineno) + ": expected 4 fields");
        ManifestEntry e;
        e.id = id;
        e.path = file;
        try {
            e.mos = std::stod(mos_str);
            e.situation = std::stoi(situation_str);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number");
        }
        require_state(e.situation >= 0 && e.situation <= 3,
                      path + ":" + std::to_string(lineno) + ": situation outside 0..3");
        manifest.entries.push_back(std::move(e));
    }
    require_state(!manifest.entries.empty(), path + ": no entries");
    return manifest;
}

namespace {

std::string resolve_path(const Manifest& manifest, const ManifestEntry& e)
{
    const std::filesystem::path p(e.path);
    if (p.is_absolute() || manifest.dir.empty())
        return e.path;
    return (std::filesystem::path(manifest.dir) / p).string();
}

struct Sample {
    std::vector<Array> views;
    double mos = 0.0;
    int situation = 0;
    std::string id;
    ErpImage erp;
};

std::vector<Sample> load_samples(const Model& model, const Manifest& manifest)
{
    std::vector<Sample> out;
    out.reserve(manifest.entries.size());
    for (const ManifestEntry& e : manifest.entries) {
        Sample s;
        s.erp = load_image(resolve_path(manifest, e));
        s.views = model.viewports_from_erp(s.erp);
        s.mos = e.mos;
        s.situation = e.situation;
        s.id = e.id;
        out.push_back(std::move(s));
    }
    return out;
}

void augment_views(std::vector<Array>& views, std::mt19937_64& rng)
{
    const bool hflip = (rng() & 1) != 0;
    const bool vflip = (rng() & 1) != 0;
    static constexpr int kPerms[6][3]
        = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    const int* perm = kPerms[rng() % 6];
    for (Array& v : views) {
        const int h = v.shape[0], w = v.shape[1], c = v.shape[2];
        Array out = Array::zeros(v.shape);
        for (int y = 0; y < h; ++y) {
            const int sy = vflip ? h - 1 - y : y;
            for (int x = 0; x < w; ++x) {
                const int sx = hflip ? w - 1 - x : x;
                const std::size_t src = static_cast<std::size_t>((sy * w + sx) * c);
                const std::size_t dst = static_cast<std::size_t>((y * w + x) * c);
                for (int ch = 0; ch < c; ++ch)
                    out.data[dst + static_cast<std::size_t>(ch)]
                        = v.data[src + static_cast<std::size_t>(perm[ch])];
            }
        }
        v = std::move(out);
    }
}

int argmax4(const std::array<double, 4>& probs)
{
    int best = 0;
    for (int i = 1; i < 4; ++i)
        if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)])
            best = i;
    return best;
}

struct RolledPrediction {
    double score = 0.0;
    std::array<double, 4> probs {0.0, 0.0, 0.0, 0.0};
};

// Average over evenly spaced plan rotations; the sphere has no preferred
// yaw anchor, so this removes anchoring variance without new information.
RolledPrediction predict_rolled(const Model& model, const ErpImage& erp, int rolls)
{
    RolledPrediction acc;
    for (int r = 0; r < rolls; ++r) {
        const double shift = 360.0 * r / rolls;
        const ModelOutput out = model.evaluate(model.viewports_from_erp(erp, shift));
        acc.score += out.score / rolls;
        for (int i = 0; i < 4; ++i)
            acc.probs[static_cast<std::size_t>(i)] += out.probs[static_cast<std::size_t>(i)] / rolls;
    }
    return acc;
}

struct ValMetrics {
    double srcc = 0.0;
    double plcc = 0.0;
    double acc = 0.0;
    std::vector<double> preds;
    std::vector<double> mos;
};

ValMetrics validate_split(const Model& model, const std::vector<Sample>& samples,
                          const std::vector<int>& idx, int rolls)
{
    ValMetrics vm;
    std::vector<int> pred_cls, true_cls;
    for (int i : idx) {
        const Sample& s = samples[static_cast<std::size_t>(i)];
        RolledPrediction pred;
        if (rolls <= 1) {
            const ModelOutput out = model.evaluate(s.views);
            pred.score = out.score;
            pred.probs = out.probs;
        } else {
            pred = predict_rolled(model, s.erp, rolls);
        }
        vm.preds.push_back(pred.score);
        vm.mos.push_back(s.mos);
        pred_cls.push_back(argmax4(pred.probs));
        true_cls.push_back(s.situation);
    }
    try {
        vm.srcc = srcc(vm.preds, vm.mos);
        vm.plcc = pearson(vm.preds, vm.mos);
    } catch (const std::domain_error&) {
        warn("degenerate validation predictions; correlation recorded as 0");
        vm.srcc = 0.0;
        vm.plcc = 0.0;
    }
    vm.acc = model.cfg.enable_dspn ? classification_accuracy(pred_cls, true_cls) : 0.0;
    return vm;
}

// Least-squares affine map from raw scores to the rating scale, stored in
// the checkpoint so captions can interpret scores directly.
void store_calibration(Model& model, const std::vector<double>& preds,
                       const std::vector<double>& mos)
{
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        sx += preds[i];
        sy += mos[i];
        sxx += preds[i] * preds[i];
        sxy += preds[i] * mos[i];
    }
    const double det = n * sxx - sx * sx;
    double scale = 1.0, bias = 0.0;
    if (std::abs(det) > 1e-12) {
        scale = (n * sxy - sx * sy) / det;
        bias = (sy - scale * sx) / n;
    } else {
        warn("constant scores; calibration falls back to a mean shift");
        scale = 0.0;
        bias = sy / n;
    }
    model.store.value("calib.scale").data[0] = static_cast<float>(scale);
    model.store.value("calib.bias").data[0] = static_cast<float>(bias);
}

} // namespace

TrainResult train_model(Model& model, const Manifest& manifest, const TrainConfig& cfg)
{
    require_arg(cfg.epochs >= 1, "epoch count must be positive");
    require_arg(cfg.batch >= 2, "batch size must be at least 2");
    require_arg(cfg.train_frac > 0.0 && cfg.train_frac < 1.0, "split fraction outside (0, 1)");
    require_arg(cfg.aug_repeat >= 1, "augmentation repeat must be positive");
    require_arg(cfg.eval_rolls >= 1, "validation roll count must be positive");
    const std::vector<Sample> samples = load_samples(model, manifest);
    const int n = static_cast<int>(samples.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const int n_train = static_cast<int>(cfg.train_frac * n);
    require_domain(n_train >= 2 && n - n_train >= 2,
                   "dataset too small for the requested split");
    std::vector<int> train_idx(order.begin(), order.begin() + n_train);
    std::vector<int> val_idx(order.begin() + n_train, order.end());

    std::filesystem::create_directories(cfg.out_dir);
    {
        // Record the held-out ids so external tooling can audit the split.
        std::ofstream vs((std::filesystem::path(cfg.out_dir) / "val_ids.txt").string());
        require_state(vs.good(), "cannot write val id list");
        for (int i : val_idx)
            vs << samples[static_cast<std::size_t>(i)].id << "\n";
    }
    TrainResult result;
    result.best_path = (std::filesystem::path(cfg.out_dir) / "best.ckpt").string();
    result.final_path = (std::filesystem::path(cfg.out_dir) / "final.ckpt").string();
    result.log_path = (std::filesystem::path(cfg.out_dir) / "train_log.ndjson").string();
    std::ofstream log(result.log_path);
    require_state(log.good(), "cannot write " + result.log_path);

    DwaState dwa;
    dwa.task_count = 2;
    long step = 0;
    result.best_val_srcc = -2.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_init, cfg.lr_min);
        const std::vector<double> lambda
            = model.cfg.enable_dspn ? dwa.weights() : std::vector<double> {0.0, 1.0};
        // Each pass re-shuffles and re-rolls, so aug_repeat > 1 gives the
        // optimizer more distinct augmented batches per epoch.
        std::vector<int> epoch_idx;
        epoch_idx.reserve(train_idx.size() * static_cast<std::size_t>(cfg.aug_repeat));
        for (int rep = 0; rep < cfg.aug_repeat; ++rep) {
            std::shuffle(train_idx.begin(), train_idx.end(), rng);
            epoch_idx.insert(epoch_idx.end(), train_idx.begin(), train_idx.end());
        }
        const int n_epoch = static_cast<int>(epoch_idx.size());
        std::uniform_real_distribution<double> roll(0.0, 360.0);
        double sum_cls = 0.0, sum_reg = 0.0, sum_total = 0.0;
        int n_batches = 0;
        for (int start = 0; start < n_epoch; start += cfg.batch) {
            const int end = std::min(start + cfg.batch, n_epoch);
            if (end - start < 2)
                continue; // the normalized loss needs at least two items
            model.store.zero_grad();
            Graph g(&model.store);
            std::vector<int> prob_nodes, score_nodes;
            std::vector<int> labels;
            std::vector<double> mos;
            for (int bi = start; bi < end; ++bi) {
                const Sample& s = samples[static_cast<std::size_t>(epoch_idx[static_cast<std::size_t>(bi)])];
                // A longitude roll keeps every label valid (the distorted
                // region keeps its solid angle) while the viewports see new
                // crops, so the model cannot key on image identity.
                std::vector<Array> views = model.viewports_from_erp(s.erp, roll(rng));
                // Mirrors and channel permutation scramble the remaining
                // identity cues (wave directions, channel layout); quality
                // and situation are invariant to all three.
                augment_views(views, rng);
                const ForwardNodes nodes = model.forward(g, views);
                prob_nodes.push_back(nodes.probs);
                score_nodes.push_back(nodes.score);
                labels.push_back(s.situation);
                mos.push_back(s.mos);
            }
            const int reg = norm_in_norm_loss(g, score_nodes, mos, cfg.gamma);
            int total;
            double cls_value = 0.0;
            if (model.cfg.enable_dspn) {
                const int cls = cross_entropy_loss(g, prob_nodes, labels);
                cls_value = g.value(cls).data[0];
                total = g.add(g.scale(cls, lambda[0]), g.scale(reg, lambda[1]));
            } else {
                total = g.scale(reg, lambda[1]);
            }
            const double reg_value = g.value(reg).data[0];
            const double total_value = g.value(total).data[0];
            g.backward(total);
            adam_step(model.store, lr, ++step);
            sum_cls += cls_value;
            sum_reg += reg_value;
            sum_total += total_value;
            ++n_batches;
        }
        require_state(n_batches > 0, "no usable training batches");
        dwa.push({sum_cls / n_batches, sum_reg / n_batches});

        const ValMetrics vm = validate_split(model, samples, val_idx, cfg.eval_rolls);
        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.loss_cls = sum_cls / n_batches;
        stats.loss_reg = sum_reg / n_batches;
        stats.loss_total = sum_total / n_batches;
        stats.lambda_cls = lambda[0];
        stats.lambda_reg = lambda[1];
        stats.val_srcc = vm.srcc;
        stats.val_plcc = vm.plcc;
        stats.val_acc = vm.acc;
        result.log.push_back(stats);

        nlohmann::json j;
        j["epoch"] = stats.epoch;
        j["lr"] = stats.lr;
        j["loss_cls"] = stats.loss_cls;
        j["loss_reg"] = stats.loss_reg;
        j["loss_total"] = stats.loss_total;
        j["lambda_cls"] = stats.lambda_cls;
        j["lambda_reg"] = stats.lambda_reg;
        j["val_srcc"] = stats.val_srcc;
        j["val_plcc"] = stats.val_plcc;
        j["val_acc"] = stats.val_acc;
        log << j.dump() << "\n";
        log.flush();

        if (vm.srcc > result.best_val_srcc) {
            result.best_val_srcc = vm.srcc;
            result.best_epoch = epoch;
            store_calibration(model, vm.preds, vm.mos);
            save_checkpoint(model, result.best_path);
        }
    }
    {
        const ValMetrics vm = validate_split(model, samples, val_idx, cfg.eval_rolls);
        store_calibration(model, vm.preds, vm.mos);
        save_checkpoint(model, result.final_path);
    }
    return result;
}

std::vector<EvalRow> evaluate_manifest(const Model& model, const Manifest& manifest, int rolls)
{
    require_arg(rolls >= 1, "roll count must be positive");
    std::vector<EvalRow> rows;
    const double scale = model.store.value("calib.scale").data[0];
    const double bias = model.store.value("calib.bias").data[0];
    for (const ManifestEntry& e : manifest.entries) {
        const ErpImage erp = load_image(resolve_path(manifest, e));
        const RolledPrediction pred = predict_rolled(model, erp, rolls);
        EvalRow row;
        row.id = e.id;
        row.score = pred.score;
        row.calibrated = scale * pred.score + bias;
        row.pred_situation = argmax4(pred.probs);
        row.true_situation = e.situation;
        row.mos = e.mos;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace iqc
