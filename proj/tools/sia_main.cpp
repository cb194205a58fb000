#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sia/augmentation.hpp"
#include "sia/classify.hpp"
#include "sia/config.hpp"
#include "sia/dataset.hpp"
#include "sia/errors.hpp"
#include "sia/explain.hpp"
#include "sia/fewshot.hpp"
#include "sia/fsutil.hpp"
#include "sia/pairing.hpp"
#include "sia/seeds.hpp"
#include "sia/siamese.hpp"
#include "sia/synthetic.hpp"

namespace sia::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// Collects human-readable log lines and mirrors them to stdout; flushed into
// the stage directory at the end of each command.
struct StageLog {
    std::ostringstream lines;
    void operator()(const std::string& msg) {
        std::cout << msg << "\n";
        lines << msg << "\n";
    }
    void flush(const fs::path& dir) { atomic_write_text(dir / "log.txt", lines.str()); }
};

void require_fresh_or_force(const fs::path& dir, bool force) {
    if (!fs::exists(dir)) return;
    if (!fs::is_directory(dir) || !fs::is_empty(dir)) {
        if (!force)
            throw RefusedOverwrite("output already exists: " + dir.string() +
                                   " (pass --force to overwrite)");
        fs::remove_all(dir);
    }
}

fs::path prepared_manifest_path(const RunConfig& cfg) {
    if (!cfg.input_manifest.empty()) return cfg.input_manifest;
    return fs::path(cfg.out_dir) / "prepared" / "manifest.json";
}

fs::path default_checkpoint_dir(const RunConfig& cfg) {
    if (!cfg.checkpoint.empty()) return cfg.checkpoint;
    return fs::path(cfg.out_dir) / "model";
}

TowerSpec tower_spec_of(const RunConfig& cfg) {
    return {tower_from_string(cfg.tower), cfg.embedding_dim};
}

TrainingConfig base_training_config(const RunConfig& cfg) {
    TrainingConfig t;
    t.epochs = cfg.epochs;
    t.batch_size = cfg.batch_size;
    t.learning_rate = cfg.learning_rate;
    t.seed = derive_seed(cfg.seed, "train");
    t.freeze_backbone = cfg.freeze_backbone;
    t.loss = cfg.loss == "bce" ? LossKind::bce : LossKind::contrastive;
    return t;
}

TrainingConfig refine_training_config(const RunConfig& cfg) {
    TrainingConfig t;
    t.epochs = cfg.refine_epochs;
    t.batch_size = cfg.refine_batch_size;
    t.learning_rate = cfg.refine_learning_rate;
    t.seed = derive_seed(cfg.seed, "refine");
    t.freeze_backbone = cfg.freeze_backbone;
    t.loss = cfg.loss == "bce" ? LossKind::bce : LossKind::contrastive;
    return t;
}

// ------------------------------------------------------------------ prepare

void cmd_prepare(const RunConfig& cfg, bool force) {
    if (cfg.raw_manifest.empty())
        throw ValidationError("prepare: raw_manifest is not set (config key \"raw_manifest\")");
    fs::path out = fs::path(cfg.out_dir) / "prepared";
    require_fresh_or_force(out, force);
    DirLock lock(out);
    StageLog log;

    DatasetManifest raw = ingest_tiles(cfg.raw_manifest);
    int resampled = 0, padded = 0, cropped = 0, verbatim = 0;
    DatasetManifest prepared;
    prepared.role_map = raw.role_map;
    for (const auto& t : raw.tiles) {
        Tile n = normalize_tile(t, cfg.target_gsd_cm, cfg.target_size);
        if (t.gsd_cm != cfg.target_gsd_cm) ++resampled;
        else if (t.pixels.height < cfg.target_size || t.pixels.width < cfg.target_size) ++padded;
        else if (t.pixels.height > cfg.target_size || t.pixels.width > cfg.target_size) ++cropped;
        else ++verbatim;
        prepared.tiles.push_back(std::move(n));
    }
    save_manifest(prepared, out / "manifest.json", out / "tiles");
    log("[prepare] " + std::to_string(prepared.tiles.size()) + " tiles normalized to " +
        std::to_string(cfg.target_size) + "px @ " + std::to_string(cfg.target_gsd_cm) +
        " cm (resampled " + std::to_string(resampled) + ", padded " + std::to_string(padded) +
        ", cropped " + std::to_string(cropped) + ", verbatim " + std::to_string(verbatim) + ")");
    log.flush(out);
}

// -------------------------------------------------------------------- pairs

void cmd_pairs(const RunConfig& cfg, bool force) {
    fs::path manifest_path = prepared_manifest_path(cfg);
    if (!fs::exists(manifest_path))
        throw ValidationError("pairs: missing upstream artifact: " + manifest_path.string() +
                              " (run `prepare` first)");
    fs::path out = fs::path(cfg.out_dir) / "pairs";
    require_fresh_or_force(out, force);
    DirLock lock(out);
    StageLog log;

    DatasetManifest prepared = ingest_tiles(manifest_path);
    DatasetManifest capped =
        cap_candidates(prepared, cfg.per_class_cap, derive_seed(cfg.seed, "cap"));
    DatasetManifest candidates =
        expand_candidates(capped, cfg.variants_per_tile, derive_seed(cfg.seed, "expand"));

    auto similar = enumerate_similar_pairs(candidates, Role::base_train);
    auto dissimilar = enumerate_dissimilar_pairs(candidates, Role::base_train);
    PairDataset ds = sample_balanced(similar, dissimilar, cfg.pairs_per_side,
                                     derive_seed(cfg.seed, "pairs"));

    // keep only base-train candidates in the stored manifest: that is all the
    // trainer needs, and it keeps the artifact small
    DatasetManifest train_tiles;
    for (const auto& t : candidates.tiles) {
        if (candidates.role_map.at(t.id) != Role::base_train || t.excluded || !t.label) continue;
        train_tiles.tiles.push_back(t);
        train_tiles.role_map[t.id] = Role::base_train;
    }
    save_manifest(train_tiles, out / "candidates" / "manifest.json", out / "candidates" / "tiles");
    save_pairs(ds, out / "pairs.jsonl", out / "pairs.meta.json");
    log("[pairs] enumerated " + std::to_string(similar.size()) + " similar / " +
        std::to_string(dissimilar.size()) + " dissimilar; sampled " +
        std::to_string(ds.n_similar) + "/" + std::to_string(ds.n_dissimilar) + " balanced pairs");
    log.flush(out);
}

// -------------------------------------------------------------------- train

void cmd_train(const RunConfig& cfg, bool force) {
    fs::path pairs_dir = fs::path(cfg.out_dir) / "pairs";
    if (!fs::exists(pairs_dir / "pairs.jsonl"))
        throw ValidationError("train: missing upstream artifact: " +
                              (pairs_dir / "pairs.jsonl").string() + " (run `pairs` first)");
    fs::path out = fs::path(cfg.out_dir) / "model";
    require_fresh_or_force(out, force);
    DirLock lock(out);
    StageLog log;

    PairDataset pairs = load_pairs(pairs_dir / "pairs.jsonl", pairs_dir / "pairs.meta.json");
    DatasetManifest tiles = ingest_tiles(pairs_dir / "candidates" / "manifest.json");

    TrainingConfig tc = base_training_config(cfg);
    log("[train] tower=" + cfg.tower + " pairs=" + std::to_string(pairs.pairs.size()) +
        " epochs=" + std::to_string(tc.epochs));
    ModelCheckpoint cp = train_base(pairs, tiles, tower_spec_of(cfg), tc,
                                    [&](int epoch, double loss) {
                                        log("[train] epoch " + std::to_string(epoch) +
                                            " mean loss " + std::to_string(loss));
                                    });
    save_checkpoint(cp, out);
    json train_log = {{"loss_curve", cp.lineage.back().loss_curve},
                      {"trainable_params", SiameseModel::from_checkpoint(cp)
                                               .trainable_param_count()}};
    atomic_write_json(out / "train_log.json", train_log);
    log("[train] final mean loss " + std::to_string(cp.lineage.back().loss_curve.back()));
    log.flush(out);
}

// ------------------------------------------------------- support selection

SupportSet select_support(const RunConfig& cfg, const DatasetManifest& prepared, int k) {
    FoldPlan plan = build_fold_plan(prepared, k, 1, derive_seed(cfg.seed, "support"),
                                    cfg.pool_cap, std::max(3, k));
    return plan.folds.front().support;
}

// ------------------------------------------------------------------- refine

void cmd_refine(const RunConfig& cfg, bool force) {
    fs::path ckpt = default_checkpoint_dir(cfg);
    if (!fs::exists(fs::path(ckpt) / "model.json"))
        throw ValidationError("refine: missing checkpoint: " + ckpt.string() +
                              " (run `train` first or set \"checkpoint\")");
    fs::path manifest_path = prepared_manifest_path(cfg);
    if (!fs::exists(manifest_path))
        throw ValidationError("refine: missing upstream artifact: " + manifest_path.string());
    fs::path out = fs::path(cfg.out_dir) / "refined";
    require_fresh_or_force(out, force);
    DirLock lock(out);
    StageLog log;

    ModelCheckpoint base = load_checkpoint(ckpt);
    DatasetManifest prepared = ingest_tiles(manifest_path);
    SupportSet support = select_support(cfg, prepared, cfg.shots_k);
    RefinementData data =
        support_refinement_pairs(support, prepared, derive_seed(cfg.seed, "refine_aug"),
                                 cfg.variants_per_tile, cfg.refine_pairs_per_side);
    log("[refine] support classes=" + std::to_string(support.members.size()) +
        " k=" + std::to_string(cfg.shots_k) + " pairs=" + std::to_string(data.pairs.pairs.size()));
    ModelCheckpoint refined = refine(base, data.pairs, data.tiles, refine_training_config(cfg),
                                     [&](int epoch, double loss) {
                                         log("[refine] epoch " + std::to_string(epoch) +
                                             " mean loss " + std::to_string(loss));
                                     });
    save_checkpoint(refined, out);
    json support_doc;
    for (const auto& [label, ids] : support.members) support_doc[label] = ids;
    atomic_write_json(out / "support.json", support_doc);
    log.flush(out);
}

// ----------------------------------------------------------------- classify

struct ScoredQueries {
    SupportSet support;
    std::vector<Prediction> predictions;
    std::vector<std::vector<SimilarityRecord>> records;  // aligned with predictions
    std::vector<const Tile*> queries;
};

ScoredQueries score_and_classify(const RunConfig& cfg, const DatasetManifest& prepared,
                                 const SiameseModel& model) {
    ScoredQueries out;
    out.support = select_support(cfg, prepared, cfg.shots_k);
    std::vector<const Tile*> support_tiles;
    for (const auto& id : out.support.all_ids()) support_tiles.push_back(prepared.find(id));
    SupportIndex index = SupportIndex::build(support_tiles, model);

    out.queries = prepared.active_tiles(Role::query);
    if (out.queries.empty())
        throw ValidationError("no query tiles in manifest (role \"query\")");
    int knn = cfg.knn_k > 0 ? cfg.knn_k : cfg.shots_k;
    for (const Tile* q : out.queries) {
        auto records = score_query(q->pixels, q->id, index, model);
        Prediction p = cfg.method == "avg" ? classify_avg(records) : classify_knn(records, knn);
        if (q->label) p.true_class = *q->label;
        out.predictions.push_back(std::move(p));
        out.records.push_back(std::move(records));
    }
    return out;
}

void cmd_classify(const RunConfig& cfg, bool force) {
    fs::path ckpt = default_checkpoint_dir(cfg);
    if (!fs::exists(fs::path(ckpt) / "model.json"))
        throw ValidationError("classify: missing checkpoint: " + ckpt.string());
    fs::path manifest_path = prepared_manifest_path(cfg);
    if (!fs::exists(manifest_path))
        throw ValidationError("classify: missing upstream artifact: " + manifest_path.string());
    fs::path out = fs::path(cfg.out_dir) / "classify";
    require_fresh_or_force(out, force);
    DirLock lock(out);
    StageLog log;

    DatasetManifest prepared = ingest_tiles(manifest_path);
    SiameseModel model = SiameseModel::from_checkpoint(load_checkpoint(ckpt));
    ScoredQueries sq = score_and_classify(cfg, prepared, model);

    std::ostringstream records_out, predictions_out;
    for (std::size_t i = 0; i < sq.predictions.size(); ++i) {
        for (const auto& r : sq.records[i]) {
            records_out << json{{"query", r.query_id},
                                {"support", r.support_id},
                                {"class", r.support_class},
                                {"score", r.score}}
                               .dump()
                        << "\n";
        }
        const auto& p = sq.predictions[i];
        json agg(p.class_aggregates);
        predictions_out << json{{"query", p.query_id},
                                {"pred", p.predicted_class},
                                {"true", p.true_class ? json(*p.true_class) : json(nullptr)},
                                {"method", cfg.method},
                                {"aggregates", agg}}
                               .dump()
                        << "\n";
    }
    atomic_write_text(out / "records.jsonl", records_out.str());
    atomic_write_text(out / "predictions.jsonl", predictions_out.str());

    bool all_labeled = true;
    for (const auto& p : sq.predictions)
        if (!p.true_class) all_labeled = false;
    if (all_labeled) {
        ClassificationReport rep = evaluate(sq.predictions);
        json per_class;
        for (const auto& [label, m] : rep.per_class)
            per_class[label] = {{"precision", m.precision},
                                {"recall", m.recall},
                                {"f1", m.f1},
                                {"support", m.support}};
        atomic_write_json(out / "report.json",
                          {{"per_class", per_class},
                           {"macro",
                            {{"precision", rep.macro.precision},
                             {"recall", rep.macro.recall},
                             {"f1", rep.macro.f1}}},
                           {"weighted",
                            {{"precision", rep.weighted.precision},
                             {"recall", rep.weighted.recall},
                             {"f1", rep.weighted.f1}}},
                           {"weighted_accuracy", rep.weighted_accuracy},
                           {"warnings", rep.warnings}});
        log("[classify] " + std::to_string(sq.predictions.size()) +
            " queries, weighted accuracy " + std::to_string(rep.weighted_accuracy));
    } else {
        log("[classify] " + std::to_string(sq.predictions.size()) +
            " queries scored (no ground truth; report skipped)");
    }
    log.flush(out);
}

// ------------------------------------------------------------------ explain

void cmd_explain(const RunConfig& cfg, bool force) {
    fs::path ckpt = default_checkpoint_dir(cfg);
    if (!fs::exists(fs::path(ckpt) / "model.json"))
        throw ValidationError("explain: missing checkpoint: " + ckpt.string());
    fs::path manifest_path = prepared_manifest_path(cfg);
    if (!fs::exists(manifest_path))
        throw ValidationError("explain: missing upstream artifact: " + manifest_path.string());
    fs::path out = fs::path(cfg.out_dir) / "explain";
    require_fresh_or_force(out, force);
    DirLock lock(out);
    StageLog log;

    DatasetManifest prepared = ingest_tiles(manifest_path);
    SiameseModel model = SiameseModel::from_checkpoint(load_checkpoint(ckpt));
    ScoredQueries sq = score_and_classify(cfg, prepared, model);

    const int k = cfg.explain_k > 0 ? cfg.explain_k : cfg.shots_k;
    std::vector<ExplanationRecord> explanations;
    for (std::size_t i = 0; i < sq.predictions.size(); ++i) {
        if (!sq.predictions[i].true_class)
            throw ValidationError("explain: query " + sq.predictions[i].query_id +
                                  " has no true label; explanation metrics need ground truth");
        explanations.push_back(select_explanation(sq.records[i], k, sq.predictions[i],
                                                  *sq.predictions[i].true_class));
    }

    std::vector<const Tile*> support_tiles;
    for (const auto& id : sq.support.all_ids()) support_tiles.push_back(prepared.find(id));
    SupportIndex index = SupportIndex::build(support_tiles, model);

    MetricBreakdown cor = correctness(explanations);
    MetricBreakdown cty =
        continuity(sq.queries, index, model, k, derive_seed(cfg.seed, "continuity"));
    auto cst = contrastivity(explanations);

    XaiMetricsReport report;
    report.c_cor = cor.value;
    report.c_cty = cty.value;
    if (cst) report.c_cst = cst->value;
    report.k = k;
    report.n_samples = explanations.size();
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        report.query_ids.push_back(explanations[i].query_id);
        report.per_sample_cor.push_back(cor.per_sample[i]);
        report.per_sample_cty.push_back(cty.per_sample[i]);
        if (cst) report.per_sample_cst.push_back(cst->per_sample[i]);
    }
    json metrics = report.to_json();
    metrics["selection_pool_entropy_diagnostic"] =
        selection_pool_entropy(explanations, index.ids.size());
    atomic_write_json(out / "xai_metrics.json", metrics);

    std::ostringstream exps_out;
    for (const auto& ex : explanations) {
        json sel = json::array();
        for (const auto& s : ex.selected)
            sel.push_back({{"support", s.support_id}, {"class", s.support_class},
                           {"score", s.score}});
        exps_out << json{{"query", ex.query_id},
                         {"pred", ex.predicted_class},
                         {"true", ex.true_class},
                         {"selected", sel}}
                        .dump()
                 << "\n";
    }
    atomic_write_text(out / "explanations.jsonl", exps_out.str());
    render_report(explanations, report, prepared, out / "report");
    log("[explain] N=" + std::to_string(report.n_samples) + " K=" + std::to_string(k) +
        " C_cor=" + std::to_string(report.c_cor) + " C_cty=" + std::to_string(report.c_cty) +
        (report.c_cst ? " C_cst=" + std::to_string(*report.c_cst) : " C_cst=-"));
    log.flush(out);
}

// -------------------------------------------------------------------- sweep

json sweep_all_shots(const RunConfig& cfg, const ModelCheckpoint& base,
                     const DatasetManifest& prepared, const fs::path& out, StageLog& log,
                     bool force) {
    SweepConfig sc;
    sc.refine_config = refine_training_config(cfg);
    sc.method = cfg.method == "avg" ? ClassifyMethod::avg : ClassifyMethod::knn;
    sc.knn_k = cfg.knn_k;
    sc.variants_per_tile = cfg.variants_per_tile;
    sc.refine_pairs_per_side = cfg.refine_pairs_per_side;

    json summary;
    summary["n_folds"] = cfg.n_folds;
    summary["method"] = cfg.method;
    json by_k = json::object();
    for (int k = 1; k <= cfg.shots_k; ++k) {
        fs::path result_file = out / ("sweep_k" + std::to_string(k) + ".json");
        std::string fp = combine_fingerprints(
            {std::to_string(cfg.seed), std::to_string(cfg.n_folds), std::to_string(k),
             cfg.method, std::to_string(cfg.refine_epochs),
             std::to_string(cfg.refine_pairs_per_side), dataset_fingerprint({}, prepared)});
        fs::path sidecar = out / ("sweep_k" + std::to_string(k) + ".fp.json");
        if (!force && fs::exists(result_file) && stage_up_to_date(sidecar, fp)) {
            log("[sweep] k=" + std::to_string(k) + " up to date, skipping");
            by_k[std::to_string(k)] = read_json(result_file);
            continue;
        }
        FoldPlan plan = build_fold_plan(prepared, k, cfg.n_folds,
                                        derive_seed(cfg.seed, "fold_plan:" + std::to_string(k)),
                                        cfg.pool_cap);
        SweepResult result = run_sweep(base, plan, prepared, sc);
        json rj = result.to_json();
        atomic_write_json(result_file, rj);
        write_stage_sidecar(sidecar, fp);
        by_k[std::to_string(k)] = rj;
        log("[sweep] k=" + std::to_string(k) + ": zero-shot F1 " +
            std::to_string(result.zero_shot.mean.f1) + " -> refined F1 " +
            std::to_string(result.refined.mean.f1));
    }
    summary["by_k"] = std::move(by_k);
    return summary;
}

void cmd_sweep(const RunConfig& cfg, bool force) {
    fs::path ckpt = default_checkpoint_dir(cfg);
    if (!fs::exists(fs::path(ckpt) / "model.json"))
        throw ValidationError("sweep: missing checkpoint: " + ckpt.string());
    fs::path manifest_path = prepared_manifest_path(cfg);
    if (!fs::exists(manifest_path))
        throw ValidationError("sweep: missing upstream artifact: " + manifest_path.string());
    fs::path out = fs::path(cfg.out_dir) / "sweep";
    fs::create_directories(out);
    DirLock lock(out);
    StageLog log;

    ModelCheckpoint base = load_checkpoint(ckpt);
    DatasetManifest prepared = ingest_tiles(manifest_path);
    json summary = sweep_all_shots(cfg, base, prepared, out, log, force);
    atomic_write_json(out / "sweep_summary.json", summary);
    log.flush(out);
}

// ---------------------------------------------------------------- synthetic

struct CheckList {
    json checks = json::array();
    bool all_pass = true;
    StageLog& log;
    explicit CheckList(StageLog& l) : log(l) {}
    void add(const std::string& name, bool pass, const std::string& detail) {
        checks.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
        log(std::string(pass ? "[PASS] " : "[FAIL] ") + name + ": " + detail);
        if (!pass) all_pass = false;
    }
};

void cmd_synthetic(RunConfig cfg, bool force, bool quick) {
    fs::path root = fs::path(cfg.out_dir) / "synthetic";
    require_fresh_or_force(root, force);
    DirLock lock(root);
    StageLog log;

    SyntheticSpec spec;
    spec.seed = derive_seed(cfg.seed, "synthetic");
    log("[synthetic] generating texture dataset under " + (root / "data").string());
    write_synthetic_dataset(spec, root / "data");

    // Pipeline defaults sized for a desk-scale run; --quick shrinks further.
    RunConfig pipe = cfg;
    pipe.raw_manifest = (root / "data" / "manifest.json").string();
    pipe.out_dir = root.string();
    pipe.input_manifest.clear();
    pipe.checkpoint.clear();
    pipe.per_class_cap = 10;  // leaves 3 tiles per base class held out
    pipe.pairs_per_side = quick ? 200 : 1200;
    pipe.epochs = quick ? 2 : 6;
    pipe.batch_size = 64;
    pipe.refine_epochs = quick ? 3 : 12;
    pipe.refine_batch_size = 512;
    pipe.refine_learning_rate = 3e-4;
    pipe.refine_pairs_per_side = quick ? 60 : 200;
    pipe.shots_k = 3;
    pipe.n_folds = quick ? 2 : 4;

    cmd_prepare(pipe, force);
    cmd_pairs(pipe, force);
    cmd_train(pipe, force);

    fs::path sweep_dir = root / "sweep";
    fs::create_directories(sweep_dir);
    ModelCheckpoint base = load_checkpoint(root / "model");
    DatasetManifest prepared = ingest_tiles(root / "prepared" / "manifest.json");
    json sweep_summary = sweep_all_shots(pipe, base, prepared, sweep_dir, log, force);
    atomic_write_json(sweep_dir / "sweep_summary.json", sweep_summary);

    cmd_classify(pipe, force);
    cmd_explain(pipe, force);

    // Property checks over the artifacts this run just produced.
    CheckList checks(log);
    json pairs_meta = read_json(root / "pairs" / "pairs.meta.json");
    checks.add("balanced_pairs",
               pairs_meta["similar"] == pairs_meta["dissimilar"],
               "sampled " + pairs_meta["similar"].dump() + "/" +
                   pairs_meta["dissimilar"].dump());
    json train_log = read_json(root / "model" / "train_log.json");
    auto curve = train_log["loss_curve"].get<std::vector<double>>();
    checks.add("training_loss_decreased", curve.back() < curve.front(),
               std::to_string(curve.front()) + " -> " + std::to_string(curve.back()));

    double best_k = static_cast<double>(pipe.shots_k);
    json k3 = sweep_summary["by_k"][std::to_string(pipe.shots_k)];
    double zero_f1 = k3["arms"]["zero_shot"]["mean"]["f1"].get<double>();
    double refined_f1 = k3["arms"]["refined"]["mean"]["f1"].get<double>();
    checks.add("refined_beats_zero_shot", refined_f1 > zero_f1,
               "zero-shot F1 " + std::to_string(zero_f1) + " vs refined F1 " +
                   std::to_string(refined_f1) + " at k=" + std::to_string(pipe.shots_k));
    (void)best_k;

    bool monotone = true;
    std::string trend;
    double prev = -1, prev_std = 0;
    for (int k = 1; k <= pipe.shots_k; ++k) {
        json rk = sweep_summary["by_k"][std::to_string(k)];
        double f1 = rk["arms"]["refined"]["mean"]["f1"].get<double>();
        double sd = rk["arms"]["refined"]["std"]["f1"].get<double>();
        if (prev >= 0 && f1 < prev - prev_std) monotone = false;
        trend += (k > 1 ? " -> " : "") + std::to_string(f1);
        prev = f1;
        prev_std = sd;
    }
    checks.add("f1_nondecreasing_in_k_within_std", monotone, trend);

    json xai = read_json(root / "explain" / "xai_metrics.json");
    checks.add("xai_metrics_in_range",
               xai["c_cor"].get<double>() >= 0 && xai["c_cor"].get<double>() <= 1 &&
                   xai["c_cty"].get<double>() >= 0 && xai["c_cty"].get<double>() <= 1,
               "c_cor " + xai["c_cor"].dump() + ", c_cty " + xai["c_cty"].dump() + ", c_cst " +
                   xai["c_cst"].dump());
    checks.add("report_rendered", fs::exists(root / "explain" / "report" / "index.html"),
               (root / "explain" / "report" / "index.html").string());

    json report = {{"quick", quick},
                   {"acceptance_grade", !quick},
                   {"seed", cfg.seed},
                   {"checks", checks.checks},
                   {"all_pass", checks.all_pass}};
    if (quick)
        log("[synthetic] NOTE: --quick run; results are not acceptance-grade");
    atomic_write_json(root / "acceptance_report.json", report);
    log.flush(root);
    if (!checks.all_pass) throw InternalError("synthetic run failed property checks");
}

}  // namespace sia::cli

int main(int argc, char** argv) {
    using namespace sia;
    using namespace sia::cli;

    CLI::App app{"Few-shot canopy-tile similarity pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool have_seed = false, force = false, quick = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed, "global seed (overrides config)")
        ->each([&](const std::string&) { have_seed = true; });
    app.add_flag("--force", force, "overwrite existing stage outputs");
    app.add_flag("--quick", quick, "reduced-size synthetic run (not acceptance-grade)");

    auto* c_prepare = app.add_subcommand("prepare", "normalize raw tiles into a manifest");
    std::string raw_manifest;
    c_prepare->add_option("--manifest", raw_manifest, "raw manifest JSON (overrides config)");
    auto* c_pairs = app.add_subcommand("pairs", "cap, augment and sample balanced pairs");
    auto* c_train = app.add_subcommand("train", "train the base siamese model");
    auto* c_refine = app.add_subcommand("refine", "refine a checkpoint on few-shot supports");
    auto* c_classify = app.add_subcommand("classify", "score and classify query tiles");
    auto* c_explain = app.add_subcommand("explain", "case-based explanations + quality metrics");
    auto* c_sweep = app.add_subcommand("sweep", "n-fold k-shot refinement sweep");
    auto* c_synth = app.add_subcommand("synthetic", "generate textures and run end to end");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (have_seed) cfg.seed = seed;
        if (!raw_manifest.empty()) cfg.raw_manifest = raw_manifest;
        cfg.validate();

        if (c_prepare->parsed()) cmd_prepare(cfg, force);
        else if (c_pairs->parsed()) cmd_pairs(cfg, force);
        else if (c_train->parsed()) cmd_train(cfg, force);
        else if (c_refine->parsed()) cmd_refine(cfg, force);
        else if (c_classify->parsed()) cmd_classify(cfg, force);
        else if (c_explain->parsed()) cmd_explain(cfg, force);
        else if (c_sweep->parsed()) cmd_sweep(cfg, force);
        else if (c_synth->parsed()) cmd_synthetic(cfg, force, quick);
        return 0;
    } catch (const RefusedOverwrite& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}
