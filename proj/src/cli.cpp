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

#include "iqc/cli.hpp"

#include "iqc/caption.hpp"
#include "iqc/geometry.hpp"
#include "iqc/gradcheck.hpp"
#include "iqc/metrics.hpp"
#include "iqc/runconfig.hpp"
#include "iqc/stats.hpp"
#include "iqc/synth.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace iqc {

namespace {

using nlohmann::json;

// Deferred key=value settings collected from flags; applied after the
// config file so flags always win.
struct Overrides {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> settings;
};

RunConfig resolve_config(const Overrides& ov)
{
    RunConfig cfg;
    if (!ov.config_path.empty())
        cfg = load_run_config(ov.config_path);
    for (const auto& [key, value] : ov.settings)
        apply_setting(cfg, key, value);
    echo_config(std::cerr, cfg);
    return cfg;
}

void add_common_flags(CLI::App* cmd, Overrides& ov)
{
    cmd->add_option("--config", ov.config_path, "key = value configuration file");
    auto opt = [cmd, &ov](const std::string& flag, const std::string& key,
                          const std::string& desc) {
        cmd->add_option_function<std::string>(
            flag, [&ov, key](const std::string& v) { ov.settings.emplace_back(key, v); }, desc);
    };
    auto neg = [cmd, &ov](const std::string& flag, const std::string& key,
                          const std::string& desc) {
        cmd->add_flag_callback(
            flag, [&ov, key] { ov.settings.emplace_back(key, "true"); }, desc);
    };
    opt("--plan.m", "plan.m", "viewports per image");
    opt("--plan.offset-deg", "plan.offset_deg", "longitude step between viewports, degrees");
    opt("--plan.fov", "plan.fov", "viewport field of view, degrees");
    opt("--model.k", "model.k", "viewports kept by the selector");
    opt("--model.input-size", "model.input_size", "square viewport size in pixels");
    opt("--model.embed-dim", "model.embed_dim", "embedding width");
    opt("--model.dims", "model.dims", "stage widths, four comma-separated integers");
    opt("--model.depths", "model.depths", "stage depths, four comma-separated integers");
    opt("--model.heads", "model.heads", "stage head counts, four comma-separated integers");
    opt("--model.kernel", "model.kernel", "attention window size (odd)");
    opt("--model.mlp-ratio", "model.mlp_ratio", "MLP expansion ratio");
    neg("--ablate.no-dspn", "ablate.no_dspn", "disable the situation classification head");
    neg("--ablate.no-msfs", "ablate.no_msfs", "disable learned stage fusion gates");
    neg("--ablate.no-vpfs", "ablate.no_vpfs", "disable viewport selection");
    opt("--train.epochs", "train.epochs", "training epochs");
    opt("--train.batch", "train.batch", "batch size");
    opt("--train.lr-init", "train.lr_init", "initial learning rate");
    opt("--train.lr-min", "train.lr_min", "final learning rate");
    opt("--train.frac", "train.frac", "training split fraction");
    opt("--train.gamma", "train.gamma", "regression loss exponent (1 or 2)");
    opt("--train.aug", "train.aug", "augmented passes over the training split per epoch");
    opt("--train.eval-rolls", "train.eval_rolls",
        "plan rotations averaged per validation prediction");
    opt("--seed", "seed", "run seed");
}

json metric_json(const MetricResult& r)
{
    json j;
    j["metric"] = r.name;
    if (r.infinite)
        j["value"] = "inf";
    else
        j["value"] = r.value;
    return j;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    require_state(os.good(), "cannot write " + path);
    os << text;
}

int cmd_viewports(const Overrides& ov, const std::string& in_path,
                  const std::string& out_dir, bool nearest)
{
    const RunConfig cfg = resolve_config(ov);
    const ErpImage img = load_image(in_path);
    const SamplingPlan plan = equatorial_plan(cfg.model.viewports, cfg.model.plan_offset_deg,
                                              cfg.model.fov_deg,
                                              cfg.model.backbone.input_size,
                                              cfg.model.lon0_deg);
    std::filesystem::create_directories(out_dir);
    json files = json::array();
    for (std::size_t i = 0; i < plan.viewports.size(); ++i) {
        const ErpImage view = nearest
                                  ? extract_viewport_nearest(img, plan.viewports[i])
                                  : extract_viewport(img, plan.viewports[i], Interp::Bilinear);
        char name[32];
        std::snprintf(name, sizeof name, "viewport_%02zu.erpf", i);
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        write_erpf(view, path);
        files.push_back(path);
    }
    json out;
    out["plan"] = plan.name;
    out["count"] = plan.viewports.size();
    out["files"] = files;
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_metrics(const Overrides& ov, const std::string& ref_path, const std::string& dist_path,
                const std::string& list)
{
    resolve_config(ov);
    const ErpImage ref = load_image(ref_path);
    const ErpImage dist = load_image(dist_path);
    std::vector<MetricResult> all = full_reference_suite(ref, dist);
    if (!list.empty()) {
        std::vector<MetricResult> kept;
        std::stringstream ss(list);
        std::string name;
        while (std::getline(ss, name, ',')) {
            bool found = false;
            for (const MetricResult& r : all)
                if (r.name == name) {
                    kept.push_back(r);
                    found = true;
                }
            require_arg(found, "unknown metric '" + name + "'");
        }
        all = std::move(kept);
    }
    for (const MetricResult& r : all)
        std::cout << metric_json(r).dump() << "\n";
    return 0;
}

int cmd_content(const Overrides& ov, const std::string& in_path)
{
    resolve_config(ov);
    const ErpImage img = load_image(in_path);
    json out;
    for (const MetricResult& r : content_suite(img))
        out[r.name] = r.value;
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_mos(const Overrides& ov, const std::string& ratings_path, const std::string& out_path)
{
    resolve_config(ov);
    const RatingTable table = read_ratings_csv(ratings_path);
    const ScreeningReport report = screen_subjects(table);
    const RatingTable kept = drop_rejected(table, report);
    const std::vector<MosRecord> records = compute_mos(kept);
    write_mos_csv(records, out_path);
    json subjects = json::array();
    int rejected = 0;
    for (const SubjectScreen& s : report.subjects) {
        json j;
        j["subject_id"] = s.subject_id;
        j["p"] = s.p;
        j["q"] = s.q;
        j["n"] = s.n_rated;
        j["rejected"] = s.rejected;
        subjects.push_back(j);
        rejected += s.rejected ? 1 : 0;
    }
    json out;
    out["mos_csv"] = out_path;
    out["images"] = records.size();
    out["rejected_subjects"] = rejected;
    out["subjects"] = subjects;
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_train(const Overrides& ov, const std::string& manifest_path,
              const std::string& out_dir)
{
    RunConfig cfg = resolve_config(ov);
    if (!out_dir.empty())
        cfg.train.out_dir = out_dir;
    Model model(cfg.model);
    model.init(cfg.seed);
    const Manifest manifest = read_manifest_csv(manifest_path);
    const TrainResult result = train_model(model, manifest, cfg.train);
    json out;
    out["best_epoch"] = result.best_epoch;
    out["best_val_srcc"] = result.best_val_srcc;
    out["best_checkpoint"] = result.best_path;
    out["final_checkpoint"] = result.final_path;
    out["log"] = result.log_path;
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_eval(const Overrides& ov, const std::string& ckpt_path,
             const std::string& manifest_path, const std::string& per_image_path, int rolls)
{
    const RunConfig cfg = resolve_config(ov);
    const Model model = load_checkpoint(ckpt_path);
    const Manifest manifest = read_manifest_csv(manifest_path);
    const std::vector<EvalRow> rows = evaluate_manifest(model, manifest, rolls);
    std::vector<double> pred, mos;
    std::vector<int> pred_cls, true_cls;
    for (const EvalRow& r : rows) {
        pred.push_back(r.score);
        mos.push_back(r.mos);
        pred_cls.push_back(r.pred_situation);
        true_cls.push_back(r.true_situation);
    }
    const CorrelationReport report = correlate(pred, mos, cfg.seed);
    json out;
    out["plcc"] = report.plcc;
    out["srcc"] = report.srcc;
    if (model.cfg.enable_dspn)
        out["acc"] = classification_accuracy(pred_cls, true_cls);
    out["beta"] = report.beta;
    out["residual"] = report.residual;
    std::cout << out.dump() << "\n";
    if (!per_image_path.empty()) {
        std::ostringstream os;
        for (const EvalRow& r : rows) {
            json j;
            j["id"] = r.id;
            j["score"] = r.score;
            j["calibrated"] = r.calibrated;
            j["pred_situation"] = r.pred_situation;
            j["true_situation"] = r.true_situation;
            j["mos"] = r.mos;
            os << j.dump() << "\n";
        }
        write_text(per_image_path, os.str());
    }
    return 0;
}

int cmd_caption(const Overrides& ov, const std::string& ckpt_path,
                const std::string& image_path, const std::string& table_path,
                const std::string& out_path)
{
    resolve_config(ov);
    const Model model = load_checkpoint(ckpt_path);
    const ErpImage img = load_image(image_path);
    const ModelOutput result = model.evaluate(model.viewports_from_erp(img));
    const double scale = model.store.value("calib.scale").data[0];
    const double bias = model.store.value("calib.bias").data[0];
    const double calibrated = scale * result.score + bias;
    int situation = 0;
    for (int i = 1; i < 4; ++i)
        if (result.probs[static_cast<std::size_t>(i)]
            > result.probs[static_cast<std::size_t>(situation)])
            situation = i;
    const RecommendationTable table = table_path.empty()
                                          ? RecommendationTable::default_table()
                                          : RecommendationTable::from_json_file(table_path);
    const QualityLevel level = score_to_level(calibrated);
    const DistortionSituation sit = static_cast<DistortionSituation>(situation);
    const Recommendation rec = table.lookup(level, sit);
    const std::string text = render_caption(level, sit, rec);
    json record;
    record["caption"] = text;
    record["score"] = result.score;
    record["calibrated"] = calibrated;
    record["probs"] = result.probs;
    record["level"] = level_name(level);
    record["situation"] = situation_name(sit);
    record["recommendation"] = recommendation_name(rec);
    record["viewport_weights"] = result.weights;
    record["selected"] = result.selected;
    std::cout << text << "\n" << record.dump() << "\n";
    if (!out_path.empty())
        write_text(out_path, record.dump() + "\n");
    return 0;
}

int cmd_gradcheck(const Overrides& ov, double tolerance, int seeds)
{
    const RunConfig cfg = resolve_config(ov);
    require_arg(tolerance > 0.0, "tolerance must be positive");
    require_arg(seeds >= 1, "seed count must be positive");
    bool all_pass = true;
    std::map<std::string, GradCheckReport> merged;
    for (int s = 0; s < seeds; ++s) {
        for (const GradCheckReport& r : run_op_gradchecks(cfg.seed + static_cast<std::uint64_t>(s),
                                                          tolerance)) {
            GradCheckReport& m = merged[r.name];
            m.name = r.name;
            m.coords += r.coords;
            m.failures += r.failures;
            m.max_rel_err = std::max(m.max_rel_err, r.max_rel_err);
        }
    }
    for (const auto& [name, r] : merged) {
        json j;
        j["op"] = name;
        j["coords"] = r.coords;
        j["max_rel_err"] = r.max_rel_err;
        j["pass"] = r.passed();
        std::cout << j.dump() << "\n";
        all_pass = all_pass && r.passed();
    }
    require_state(all_pass, "gradient check failed");
    return 0;
}

int cmd_synth(const Overrides& ov, const std::string& out_dir, int count, int width)
{
    const RunConfig cfg = resolve_config(ov);
    SynthConfig scfg;
    scfg.count = count;
    scfg.width = width;
    scfg.seed = cfg.seed;
    scfg.out_dir = out_dir;
    const std::string manifest = synthesize_dataset(scfg);
    json out;
    out["manifest"] = manifest;
    out["count"] = count;
    std::cout << out.dump() << "\n";
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv)
{
    CLI::App app {"omnidirectional image quality captioning pipeline"};
    app.require_subcommand(1);
    int rc = 0;

    Overrides ov;

    auto* viewports = app.add_subcommand("viewports", "extract plan viewports from an image");
    std::string vp_in, vp_out;
    bool vp_nearest = false;
    viewports->add_option("--in", vp_in, "input omnidirectional image")->required();
    viewports->add_option("--out-dir", vp_out, "output directory")->required();
    viewports->add_flag("--nearest", vp_nearest, "nearest-neighbor sampling");
    add_common_flags(viewports, ov);
    viewports->callback([&] { rc = cmd_viewports(ov, vp_in, vp_out, vp_nearest); });

    auto* metrics = app.add_subcommand("metrics", "full-reference quality metrics");
    std::string m_ref, m_dist, m_list;
    metrics->add_option("--ref", m_ref, "reference image")->required();
    metrics->add_option("--dist", m_dist, "distorted image")->required();
    metrics->add_option("--metrics", m_list, "comma-separated metric names (default: all)");
    add_common_flags(metrics, ov);
    metrics->callback([&] { rc = cmd_metrics(ov, m_ref, m_dist, m_list); });

    auto* content = app.add_subcommand("content", "content descriptors (SI, CF)");
    std::string c_in;
    content->add_option("--in", c_in, "input image")->required();
    add_common_flags(content, ov);
    content->callback([&] { rc = cmd_content(ov, c_in); });

    auto* mos = app.add_subcommand("mos", "subject screening and mean opinion scores");
    std::string mos_in, mos_out;
    mos->add_option("--ratings", mos_in, "ratings CSV (subject_id,image_id,score)")->required();
    mos->add_option("--out", mos_out, "output MOS CSV")->required();
    add_common_flags(mos, ov);
    mos->callback([&] { rc = cmd_mos(ov, mos_in, mos_out); });

    auto* train = app.add_subcommand("train", "train the quality captioning model");
    std::string t_manifest, t_out;
    train->add_option("--manifest", t_manifest, "dataset manifest CSV")->required();
    train->add_option("--out-dir", t_out, "checkpoint/log directory");
    add_common_flags(train, ov);
    train->callback([&] { rc = cmd_train(ov, t_manifest, t_out); });

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint against a manifest");
    std::string e_ckpt, e_manifest, e_rows;
    int e_rolls = 1;
    eval->add_option("--checkpoint", e_ckpt, "model checkpoint")->required();
    eval->add_option("--manifest", e_manifest, "dataset manifest CSV")->required();
    eval->add_option("--per-image", e_rows, "write per-image JSON rows to this path");
    eval->add_option("--rolls", e_rolls, "average predictions over this many plan rotations");
    add_common_flags(eval, ov);
    eval->callback([&] { rc = cmd_eval(ov, e_ckpt, e_manifest, e_rows, e_rolls); });

    auto* caption = app.add_subcommand("caption", "caption one image with a trained model");
    std::string cap_ckpt, cap_img, cap_table, cap_out;
    caption->add_option("--checkpoint", cap_ckpt, "model checkpoint")->required();
    caption->add_option("--image", cap_img, "input omnidirectional image")->required();
    caption->add_option("--table", cap_table, "recommendation table JSON");
    caption->add_option("--out", cap_out, "write the JSON record to this path");
    add_common_flags(caption, ov);
    caption->callback([&] { rc = cmd_caption(ov, cap_ckpt, cap_img, cap_table, cap_out); });

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    double g_tol = 1e-6;
    int g_seeds = 1;
    gradcheck->add_option("--tolerance", g_tol, "relative error tolerance");
    gradcheck->add_option("--seeds", g_seeds, "number of seeds to sweep");
    add_common_flags(gradcheck, ov);
    gradcheck->callback([&] { rc = cmd_gradcheck(ov, g_tol, g_seeds); });

    auto* synth = app.add_subcommand("synth", "generate a synthetic rated dataset");
    std::string s_out;
    int s_count = 200, s_width = 256;
    synth->add_option("--out-dir", s_out, "output directory")->required();
    synth->add_option("--n", s_count, "image count");
    synth->add_option("--width", s_width, "ERP width in pixels (height is width/2)");
    add_common_flags(synth, ov);
    synth->callback([&] { rc = cmd_synth(ov, s_out, s_count, s_width); });

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        json j;
        j["error"] = std::string(e.what());
        j["kind"] = "usage";
        std::cerr << j.dump() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        json j;
        j["error"] = std::string(e.what());
        j["kind"] = "argument";
        std::cerr << j.dump() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        json j;
        j["error"] = std::string(e.what());
        j["kind"] = "degenerate_input";
        std::cerr << j.dump() << "\n";
        return 3;
    } catch (const std::exception& e) {
        json j;
        j["error"] = std::string(e.what());
        j["kind"] = "runtime";
        std::cerr << j.dump() << "\n";
        return 1;
    }
    return rc;
}

} // namespace iqc
