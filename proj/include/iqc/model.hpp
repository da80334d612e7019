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

#include "iqc/geometry.hpp"
#include "iqc/graph.hpp"

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace iqc {

// Four-stage hierarchical backbone on a square viewport: two stride-2
// 3x3 embedding convolutions (GELU between) take [S,S,3] to [S/4,S/4,E];
// stages 0-2 open with a stride-2 3x3 downsampler and stage 3 with a 1x1
// projection, giving maps at S/8, S/16, S/32, S/32 with widths dims[0..3].
// Each stage block is pre-norm neighborhood attention plus a pre-norm MLP,
// both with residual connections.
struct BackboneConfig {
    int embed_dim = 16;
    std::array<int, 4> depths {2, 2, 5, 3};
    std::array<int, 4> dims {16, 32, 64, 64};
    std::array<int, 4> heads {1, 2, 4, 4};
    int kernel = 7;
    int mlp_ratio = 2;
    int input_size = 224;
};

struct ModelConfig {
    BackboneConfig backbone;
    int viewports = 8;            // sampled viewports per image (M)
    int select = 4;               // viewports kept by the selector (K)
    double fov_deg = 90.0;
    double plan_offset_deg = 45.0;
    double lon0_deg = -180.0;
    bool enable_dspn = true; // distortion-situation head
    bool enable_msfs = true; // learned per-stage fusion gates
    bool enable_vpfs = true; // viewport selection
};

inline void validate_model_config(const ModelConfig& cfg)
{
    const BackboneConfig& b = cfg.backbone;
    require_arg(b.embed_dim >= 1, "embed width must be positive");
    require_arg(b.input_size >= 32 && b.input_size % 32 == 0,
                "viewport size must be a positive multiple of 32");
    require_arg(b.kernel >= 1 && b.kernel % 2 == 1, "attention kernel must be odd");
    require_arg(b.mlp_ratio >= 1, "mlp ratio must be at least 1");
    for (int s = 0; s < 4; ++s) {
        require_arg(b.depths[s] >= 1, "stage depth must be positive");
        require_arg(b.dims[s] >= 1, "stage width must be positive");
        require_arg(b.heads[s] >= 1 && b.dims[s] % b.heads[s] == 0,
                    "head count must divide the stage width");
    }
    require_arg(cfg.viewports >= 1, "viewport count must be positive");
    require_arg(cfg.select >= 1 && cfg.select <= cfg.viewports,
                "selection count must lie in [1, viewport count]");
    require_arg(cfg.fov_deg > 0.0 && cfg.fov_deg < 180.0, "field of view out of range");
    require_arg(cfg.viewports * cfg.plan_offset_deg <= 360.0 + 1e-9,
                "viewport plan exceeds 360 degrees");
}

inline int task_vector_width(const ModelConfig& cfg)
{
    return std::accumulate(cfg.backbone.dims.begin(), cfg.backbone.dims.end(), 0);
}

// Plain-value summary of one forward pass.
struct ModelOutput {
    std::array<double, 4> probs {};      // distortion-situation posterior
    double score = 0.0;                  // predicted quality (uncalibrated)
    std::vector<double> weights;         // per-viewport weights, 0 if dropped
    std::vector<int> selected;           // kept viewport indices, ascending
    std::vector<double> viewport_scores; // per kept viewport, same order
};

// Node handles into the graph for training and inspection.
struct ForwardNodes {
    int probs = -1;                  // [4]
    int score = -1;                  // [1]
    int vpfs_sum = -1;               // [sum dims] pooled sum over viewports
    int weight_vector = -1;          // [M] post-mask weights
    std::vector<int> selected;       // ascending
    std::vector<int> viewport_scores; // [1] nodes, one per kept viewport
};

struct ForwardOptions {
    int force_stage = -1; // debug: pin every fusion gate to one stage
};

template <typename T>
class ModelT {
public:
    ModelConfig cfg;
    ParamStoreT<T> store;

    explicit ModelT(const ModelConfig& c = {}) : cfg(c) { validate_model_config(cfg); }

    // Creates every parameter with seeded fan-in scaled Gaussian init.
    void init(std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        build_params(&rng);
    }

    // Creates every parameter as zeros (checkpoint loading overwrites).
    void init_zero() { build_params(nullptr); }

    // Appends one viewport branch per input and the two heads; inputs are
    // [S,S,3] rasters in [0,1].
    ForwardNodes forward(GraphT<T>& g, const std::vector<ArrayT<T>>& views,
                         const ForwardOptions& opt = {}) const
    {
        require_arg(static_cast<int>(views.size()) == cfg.viewports,
                    "viewport count does not match the configuration");
        const int s = cfg.backbone.input_size;
        for (const ArrayT<T>& v : views)
            require_arg(v.rank() == 3 && v.dim(0) == s && v.dim(1) == s && v.dim(2) == 3,
                        "viewport raster has the wrong shape");
        std::vector<int> task_dspn, task_qspn;
        for (const ArrayT<T>& v : views) {
            const std::array<int, 4> stages = backbone(g, g.leaf(v));
            if (cfg.enable_dspn)
                task_dspn.push_back(pool_concat(g, "dspn", stages, opt));
            task_qspn.push_back(pool_concat(g, "qspn", stages, opt));
        }
        ForwardNodes out;
        out.probs = cfg.enable_dspn ? situation_head(g, task_dspn) : uniform_probs(g);
        quality_head(g, task_qspn, out);
        return out;
    }

    // Convenience single-image evaluation on a private graph.  The
    // const_cast is safe: no backward pass runs, so the store is only
    // ever read.
    ModelOutput evaluate(const std::vector<ArrayT<T>>& views,
                         const ForwardOptions& opt = {}) const
    {
        GraphT<T> g(const_cast<ParamStoreT<T>*>(&store));
        const ForwardNodes nodes = forward(g, views, opt);
        return extract(g, nodes);
    }

    ModelOutput extract(const GraphT<T>& g, const ForwardNodes& nodes) const
    {
        ModelOutput out;
        const ArrayT<T>& probs = g.value(nodes.probs);
        for (int i = 0; i < 4; ++i)
            out.probs[static_cast<std::size_t>(i)] = static_cast<double>(probs.data[i]);
        out.score = static_cast<double>(g.value(nodes.score).data[0]);
        const ArrayT<T>& wv = g.value(nodes.weight_vector);
        out.weights.assign(wv.data.begin(), wv.data.end());
        out.selected = nodes.selected;
        for (int id : nodes.viewport_scores)
            out.viewport_scores.push_back(static_cast<double>(g.value(id).data[0]));
        return out;
    }

    // The sampling plan implied by the configuration. lon_shift_deg
    // rotates every viewport center; training uses it as a
    // label-preserving augmentation (a longitude roll of the sphere).
    SamplingPlan plan(double lon_shift_deg = 0.0) const
    {
        return equatorial_plan(cfg.viewports, cfg.plan_offset_deg, cfg.fov_deg,
                               cfg.backbone.input_size, cfg.lon0_deg + lon_shift_deg);
    }

    std::vector<ArrayT<T>> viewports_from_erp(const ErpImage& img, double lon_shift_deg = 0.0) const
    {
        std::vector<ArrayT<T>> out;
        for (const ViewportSpec& spec : plan(lon_shift_deg).viewports) {
            const ErpImage view = extract_viewport(img, spec, Interp::Bilinear);
            require_state(view.channels == 3, "model input must be RGB");
            ArrayT<T> a = ArrayT<T>::zeros({view.height, view.width, 3});
            // Center to [-1, 1]: without the DC offset the first conv can
            // spend its whole capacity on contrast, the actual quality cue.
            for (std::size_t i = 0; i < a.data.size(); ++i)
                a.data[i] = static_cast<T>(2.0f * view.pixels[i] - 1.0f);
            out.push_back(std::move(a));
        }
        return out;
    }

private:
    // ---- parameters ----

    void create(std::mt19937_64* rng, const std::string& name, std::vector<int> shape,
                double stddev)
    {
        if (rng != nullptr)
            store.create(name, randn<T>(std::move(shape), *rng, stddev));
        else
            store.create(name, ArrayT<T>::zeros(std::move(shape)));
    }

    void create_conv(std::mt19937_64* rng, const std::string& base, int kh, int kw, int ci,
                     int co)
    {
        create(rng, base + ".w", {kh, kw, ci, co}, std::sqrt(2.0 / (kh * kw * ci)));
        create(rng, base + ".b", {co}, 0.0);
    }

    void create_linear(std::mt19937_64* rng, const std::string& base, int in, int out)
    {
        create(rng, base + ".w", {in, out}, std::sqrt(2.0 / (in + out)));
        create(rng, base + ".b", {out}, 0.0);
    }

    void create_mlp(std::mt19937_64* rng, const std::string& base, int in, int hidden, int out)
    {
        create_linear(rng, base + ".1", in, hidden);
        create_linear(rng, base + ".2", hidden, out);
    }

    void build_params(std::mt19937_64* rng)
    {
        const BackboneConfig& b = cfg.backbone;
        const int sum_c = task_vector_width(cfg);
        create_conv(rng, "embed.conv1", 3, 3, 3, b.embed_dim);
        create_conv(rng, "embed.conv2", 3, 3, b.embed_dim, b.embed_dim);
        int prev = b.embed_dim;
        for (int s = 0; s < 4; ++s) {
            const int c = b.dims[s];
            if (s < 3)
                create_conv(rng, stage_name(s) + ".down", 3, 3, prev, c);
            else
                create_conv(rng, stage_name(s) + ".down", 1, 1, prev, c);
            for (int blk = 0; blk < b.depths[s]; ++blk) {
                const std::string base = block_name(s, blk);
                const double att_std = std::sqrt(1.0 / c);
                create(rng, base + ".wq", {c, c}, att_std);
                create(rng, base + ".wk", {c, c}, att_std);
                create(rng, base + ".wv", {c, c}, att_std);
                create(rng, base + ".wo", {c, c}, att_std);
                create_mlp(rng, base + ".mlp", c, b.mlp_ratio * c, c);
            }
            prev = c;
        }
        for (const char* task : {"dspn", "qspn"}) {
            if (std::string(task) == "dspn" && !cfg.enable_dspn)
                continue;
            for (int t = 0; t < 4; ++t) {
                const int ct = b.dims[t];
                for (int j = 0; j < 4; ++j)
                    create_conv(rng, fuse_name(task, t) + ".proj" + std::to_string(j), 1, 1,
                                b.dims[j], ct);
                if (cfg.enable_msfs)
                    create_mlp(rng, fuse_name(task, t) + ".gate", 4 * ct, ct, 4);
            }
        }
        if (cfg.enable_dspn)
            create_mlp(rng, "dspn.mlp", cfg.viewports * sum_c, sum_c, 4);
        if (cfg.enable_vpfs) {
            create_linear(rng, "vpfs.conv", sum_c, sum_c);
            create_mlp(rng, "vpfs.mlp", sum_c, std::max(1, sum_c / 2), cfg.viewports);
        }
        create_mlp(rng, "qspn.reg", sum_c, std::max(1, sum_c / 2), 1);
        {
            ArrayT<T> one = ArrayT<T>::zeros({1});
            one.data[0] = T(1);
            store.create("calib.scale", std::move(one));
            store.create("calib.bias", ArrayT<T>::zeros({1}));
        }
    }

    static std::string stage_name(int s) { return "backbone.s" + std::to_string(s); }

    static std::string block_name(int s, int blk)
    {
        return stage_name(s) + ".b" + std::to_string(blk);
    }

    static std::string fuse_name(const std::string& task, int t)
    {
        return "fuse." + task + ".t" + std::to_string(t);
    }

    // ---- graph helpers ----

    static int linear_vec(GraphT<T>& g, int x, int w, int b)
    {
        const int in = g.value(x).dim(0);
        const int out = g.value(w).dim(1);
        int y = g.matmul_op(g.reshape(x, {1, in}), w);
        if (b >= 0)
            y = g.add_bias(y, b);
        return g.reshape(y, {out});
    }

    int mlp_vec(GraphT<T>& g, const std::string& base, int x) const
    {
        int h = linear_vec(g, x, g.param(base + ".1.w"), g.param(base + ".1.b"));
        h = g.gelu_op(h);
        return linear_vec(g, h, g.param(base + ".2.w"), g.param(base + ".2.b"));
    }

    // Per-pixel linear layer on a [H,W,C] map via a flattened matmul.
    static int linear_map(GraphT<T>& g, int x, int w)
    {
        const ArrayT<T>& vx = g.value(x);
        const int h = vx.dim(0), wd = vx.dim(1), c = vx.dim(2);
        const int out = g.value(w).dim(1);
        const int flat = g.matmul_op(g.reshape(x, {h * wd, c}), w);
        return g.reshape(flat, {h, wd, out});
    }

    int mlp_map(GraphT<T>& g, const std::string& base, int x) const
    {
        const ArrayT<T>& vx = g.value(x);
        const int h = vx.dim(0), wd = vx.dim(1), c = vx.dim(2);
        int y = g.matmul_op(g.reshape(x, {h * wd, c}), g.param(base + ".1.w"));
        y = g.add_bias(y, g.param(base + ".1.b"));
        y = g.gelu_op(y);
        y = g.matmul_op(y, g.param(base + ".2.w"));
        y = g.add_bias(y, g.param(base + ".2.b"));
        return g.reshape(y, {h, wd, c});
    }

    // Largest odd kernel that fits the map; attention degenerates to full
    // self-attention once the window covers everything.
    static int effective_kernel(int kernel, int h, int w)
    {
        int k = std::min(kernel, std::min(h, w));
        if (k % 2 == 0)
            --k;
        return std::max(k, 1);
    }

    int attention_block(GraphT<T>& g, int x, int s, int blk) const
    {
        const std::string base = block_name(s, blk);
        const ArrayT<T>& vx = g.value(x);
        const int k = effective_kernel(cfg.backbone.kernel, vx.dim(0), vx.dim(1));
        int h = g.layer_norm_op(x);
        const int q = linear_map(g, h, g.param(base + ".wq"));
        const int key = linear_map(g, h, g.param(base + ".wk"));
        const int v = linear_map(g, h, g.param(base + ".wv"));
        int att = g.na_op(q, key, v, k, cfg.backbone.heads[s]);
        att = linear_map(g, att, g.param(base + ".wo"));
        x = g.add(x, att);
        const int m = mlp_map(g, base + ".mlp", g.layer_norm_op(x));
        return g.add(x, m);
    }

    std::array<int, 4> backbone(GraphT<T>& g, int x) const
    {
        // The stem stays norm-free: per-position normalization here would
        // erase local-contrast magnitude, the main cue separating blurred
        // or noisy content from clean content.
        x = g.conv2d_op(x, g.param("embed.conv1.w"), g.param("embed.conv1.b"), 2, 1);
        x = g.gelu_op(x);
        x = g.conv2d_op(x, g.param("embed.conv2.w"), g.param("embed.conv2.b"), 2, 1);
        std::array<int, 4> stages {};
        for (int s = 0; s < 4; ++s) {
            if (s < 3)
                x = g.conv2d_op(x, g.param(stage_name(s) + ".down.w"),
                                g.param(stage_name(s) + ".down.b"), 2, 1);
            else
                x = g.conv2d_op(x, g.param(stage_name(s) + ".down.w"),
                                g.param(stage_name(s) + ".down.b"), 1, 0);
            for (int blk = 0; blk < cfg.backbone.depths[s]; ++blk)
                x = attention_block(g, x, s, blk);
            stages[static_cast<std::size_t>(s)] = x;
        }
        return stages;
    }

    // Aligns all four stage maps to target scale t (project 1x1, then
    // resize), fuses them with a gate over the stage axis, and pools.
    int fused_target(GraphT<T>& g, const std::string& task, const std::array<int, 4>& stages,
                     int t, const ForwardOptions& opt) const
    {
        const int th = g.value(stages[static_cast<std::size_t>(t)]).dim(0);
        const int tw = g.value(stages[static_cast<std::size_t>(t)]).dim(1);
        std::vector<int> aligned;
        for (int j = 0; j < 4; ++j) {
            const std::string base = fuse_name(task, t) + ".proj" + std::to_string(j);
            int p = g.conv2d_op(stages[static_cast<std::size_t>(j)], g.param(base + ".w"),
                                g.param(base + ".b"), 1, 0);
            const ArrayT<T>& vp = g.value(p);
            if (vp.dim(0) != th || vp.dim(1) != tw)
                p = g.bilinear_resize_op(p, th, tw);
            aligned.push_back(p);
        }
        int gates;
        if (opt.force_stage >= 0) {
            require_arg(opt.force_stage < 4, "forced stage out of range");
            ArrayT<T> one_hot = ArrayT<T>::zeros({4});
            one_hot.data[static_cast<std::size_t>(opt.force_stage)] = T(1);
            gates = g.constant(std::move(one_hot));
        } else if (cfg.enable_msfs) {
            std::vector<int> gaps;
            for (int p : aligned)
                gaps.push_back(g.global_avg_pool_op(p));
            gates = g.softmax(mlp_vec(g, fuse_name(task, t) + ".gate", g.concat(gaps)), 0);
        } else {
            gates = g.constant(ArrayT<T>::full({4}, T(0.25)));
        }
        return g.stack_weighted_sum(g.stack(aligned), gates);
    }

    // Pool and concatenate the four fused targets into one task vector
    // of length dims[0]+dims[1]+dims[2]+dims[3].  Pooling is deliberately
    // norm-free so activation energy (a distortion cue) reaches the heads.
    int pool_concat(GraphT<T>& g, const std::string& task, const std::array<int, 4>& stages,
                    const ForwardOptions& opt) const
    {
        std::vector<int> pooled;
        for (int t = 0; t < 4; ++t)
            pooled.push_back(g.global_avg_pool_op(fused_target(g, task, stages, t, opt)));
        return g.concat(pooled);
    }

    // Position-aware classification over the ordered viewport vectors.
    int situation_head(GraphT<T>& g, const std::vector<int>& task_vecs) const
    {
        return g.softmax(mlp_vec(g, "dspn.mlp", g.concat(task_vecs)), 0);
    }

    int uniform_probs(GraphT<T>& g) const { return g.constant(ArrayT<T>::full({4}, T(0.25))); }

    void quality_head(GraphT<T>& g, const std::vector<int>& task_vecs, ForwardNodes& out) const
    {
        const int m = cfg.viewports;
        out.vpfs_sum = g.sum_list(task_vecs);
        if (cfg.enable_vpfs) {
            int h = linear_vec(g, out.vpfs_sum, g.param("vpfs.conv.w"), g.param("vpfs.conv.b"));
            const int logits = mlp_vec(g, "vpfs.mlp", h);
            const int full = g.softmax(logits, 0);
            out.weight_vector = g.topk_mask(full, cfg.select, &out.selected);
            std::vector<int> scores;
            for (int idx : out.selected) {
                const int weighted
                    = g.scale_by_element(task_vecs[static_cast<std::size_t>(idx)],
                                         out.weight_vector, idx);
                scores.push_back(mlp_vec(g, "qspn.reg", weighted));
            }
            out.viewport_scores = scores;
            out.score = g.scale(g.sum_list(scores), 1.0 / static_cast<double>(cfg.select));
        } else {
            out.weight_vector
                = g.constant(ArrayT<T>::full({m}, static_cast<T>(1.0 / m)));
            out.selected.resize(static_cast<std::size_t>(m));
            std::iota(out.selected.begin(), out.selected.end(), 0);
            std::vector<int> scores;
            for (int idx = 0; idx < m; ++idx)
                scores.push_back(mlp_vec(g, "qspn.reg", task_vecs[static_cast<std::size_t>(idx)]));
            out.viewport_scores = scores;
            out.score = g.scale(g.sum_list(scores), 1.0 / static_cast<double>(m));
        }
    }
};

using Model = ModelT<float>;

// Binary checkpoint: magic "IQC1", a fixed-width configuration block, then
// every parameter record (sorted by name) as name, rank, dims, float data.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

} // namespace iqc
