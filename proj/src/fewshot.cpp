#include "sia/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sia/augmentation.hpp"
#include "sia/errors.hpp"
#include "sia/seeds.hpp"

namespace sia {

std::vector<std::string> SupportSet::all_ids() const {
    std::vector<std::string> out;
    for (const auto& [label, ids] : members) {
        (void)label;
        out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
}

namespace {

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    double r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

}  // namespace

FoldPlan build_fold_plan(const DatasetManifest& fewshot_manifest, int k, int n_folds,
                         std::uint64_t seed, int pool_cap, int max_k) {
    if (k < 1 || k > max_k)
        throw ValidationError("build_fold_plan: k=" + std::to_string(k) + " outside [1, " +
                              std::to_string(max_k) + "]");
    if (n_folds < 1) throw ValidationError("build_fold_plan: n_folds must be >= 1");

    auto classes = fewshot_manifest.by_class(Role::fewshot);
    if (classes.empty()) throw ValidationError("build_fold_plan: no active few-shot classes");

    // Cap each class pool, then verify every pool can supply k support plus at
    // least one test tile.
    std::map<std::string, std::vector<std::string>> pools;
    for (const auto& [label, tiles] : classes) {
        std::vector<std::string> ids;
        for (const Tile* t : tiles) ids.push_back(t->id);
        if (pool_cap > 0 && ids.size() > static_cast<std::size_t>(pool_cap)) {
            auto rng = make_rng(seed, "pool:" + label);
            for (std::size_t i = 0; i < static_cast<std::size_t>(pool_cap); ++i) {
                std::uniform_int_distribution<std::size_t> d(i, ids.size() - 1);
                std::swap(ids[i], ids[d(rng)]);
            }
            ids.resize(pool_cap);
            std::sort(ids.begin(), ids.end());
        }
        if (ids.size() < static_cast<std::size_t>(k) + 1)
            throw ValidationError("build_fold_plan: class " + label + " has only " +
                                  std::to_string(ids.size()) + " tiles, needs at least " +
                                  std::to_string(k + 1) + " for k=" + std::to_string(k));
        pools[label] = std::move(ids);
    }

    FoldPlan plan;
    plan.n_folds = n_folds;
    plan.seed = seed;
    std::map<std::string, std::set<std::vector<std::string>>> used;
    for (int f = 0; f < n_folds; ++f) {
        Fold fold;
        fold.support.shots_k = k;
        for (const auto& [label, pool] : pools) {
            auto rng = make_rng(seed, "fold:" + std::to_string(f) + ":" + label);
            std::vector<std::string> ids = pool;
            const bool can_differ =
                binomial(static_cast<int>(pool.size()), k) > static_cast<double>(used[label].size());
            std::vector<std::string> pick;
            for (int attempt = 0; attempt < 4096; ++attempt) {
                std::vector<std::string> shuffled = ids;
                std::shuffle(shuffled.begin(), shuffled.end(), rng);
                pick.assign(shuffled.begin(), shuffled.begin() + k);
                std::sort(pick.begin(), pick.end());
                if (!can_differ || !used[label].count(pick)) break;
            }
            used[label].insert(pick);
            fold.support.members[label] = pick;
            for (const auto& id : pool)
                if (std::find(pick.begin(), pick.end(), id) == pick.end())
                    fold.test_ids.push_back(id);
        }
        // support/test disjointness is structural; assert it anyway
        const auto support_ids = fold.support.all_ids();
        std::set<std::string> sup(support_ids.begin(), support_ids.end());
        for (const auto& id : fold.test_ids)
            if (sup.count(id)) throw InternalError("fold support/test overlap on " + id);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

RefinementData support_refinement_pairs(const SupportSet& support,
                                        const DatasetManifest& fewshot_tiles,
                                        std::uint64_t aug_seed, int variants_per_tile,
                                        std::size_t pairs_per_side) {
    if (support.members.empty())
        throw ValidationError("support_refinement_pairs: empty support set");
    if (support.members.size() < 2)
        throw ValidationError(
            "support_refinement_pairs: a single-class support set yields no dissimilar pairs; "
            "at least two few-shot classes are required");

    // Materialize the support tiles as their own manifest, then expand with
    // the standard augmentation schedule.
    DatasetManifest support_manifest;
    for (const auto& [label, ids] : support.members) {
        (void)label;
        for (const auto& id : ids) {
            const Tile* t = fewshot_tiles.find(id);
            if (!t) throw ValidationError("support tile not found in manifest: " + id);
            support_manifest.tiles.push_back(*t);
            support_manifest.role_map[id] = Role::fewshot;
        }
    }
    RefinementData data;
    data.tiles = expand_candidates(support_manifest, variants_per_tile, aug_seed);
    auto similar = enumerate_similar_pairs(data.tiles, Role::fewshot);
    auto dissimilar = enumerate_dissimilar_pairs(data.tiles, Role::fewshot);
    std::size_t n = std::min({pairs_per_side, similar.size(), dissimilar.size()});
    data.pairs = sample_balanced(similar, dissimilar, n, derive_seed(aug_seed, "support_pairs"));
    return data;
}

namespace {

MetricAggregate report_headline(const ClassificationReport& rep) {
    return {rep.macro.precision, rep.macro.recall, rep.macro.f1, rep.weighted_accuracy};
}

void aggregate_arm(ArmResult& arm) {
    const std::size_t n = arm.per_fold.size();
    if (n == 0) return;
    MetricAggregate sum, sq;
    for (const auto& rep : arm.per_fold) {
        MetricAggregate h = report_headline(rep);
        sum.precision += h.precision;
        sum.recall += h.recall;
        sum.f1 += h.f1;
        sum.accuracy += h.accuracy;
    }
    arm.mean = {sum.precision / n, sum.recall / n, sum.f1 / n, sum.accuracy / n};
    if (n > 1) {
        for (const auto& rep : arm.per_fold) {
            MetricAggregate h = report_headline(rep);
            sq.precision += (h.precision - arm.mean.precision) * (h.precision - arm.mean.precision);
            sq.recall += (h.recall - arm.mean.recall) * (h.recall - arm.mean.recall);
            sq.f1 += (h.f1 - arm.mean.f1) * (h.f1 - arm.mean.f1);
            sq.accuracy += (h.accuracy - arm.mean.accuracy) * (h.accuracy - arm.mean.accuracy);
        }
        arm.stddev = {std::sqrt(sq.precision / (n - 1)), std::sqrt(sq.recall / (n - 1)),
                      std::sqrt(sq.f1 / (n - 1)), std::sqrt(sq.accuracy / (n - 1))};
    }
}

ClassificationReport classify_fold(const SiameseModel& model, const Fold& fold,
                                   const DatasetManifest& tiles, const SweepConfig& config) {
    std::vector<const Tile*> support_tiles;
    for (const auto& id : fold.support.all_ids()) {
        const Tile* t = tiles.find(id);
        if (!t) throw ValidationError("sweep: support tile missing: " + id);
        support_tiles.push_back(t);
    }
    SupportIndex index = SupportIndex::build(support_tiles, model);

    std::vector<Prediction> predictions;
    for (const auto& id : fold.test_ids) {
        const Tile* t = tiles.find(id);
        if (!t) throw ValidationError("sweep: test tile missing: " + id);
        if (!t->label) throw ValidationError("sweep: test tile " + id + " has no label");
        auto records = score_query(t->pixels, id, index, model);
        Prediction p = config.method == ClassifyMethod::avg
                           ? classify_avg(records)
                           : classify_knn(records, config.knn_k > 0 ? config.knn_k
                                                                    : fold.support.shots_k);
        p.true_class = *t->label;
        predictions.push_back(std::move(p));
    }
    return evaluate(predictions);
}

}  // namespace

SweepResult run_sweep(const ModelCheckpoint& base, const FoldPlan& plan,
                      const DatasetManifest& fewshot_tiles, const SweepConfig& config) {
    if (plan.folds.empty()) throw ValidationError("run_sweep: empty fold plan");
    SweepResult result;
    result.k = plan.folds.front().support.shots_k;
    result.n_folds = plan.n_folds;

    SiameseModel base_model = SiameseModel::from_checkpoint(base);
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        const Fold& fold = plan.folds[f];
        result.zero_shot.per_fold.push_back(
            classify_fold(base_model, fold, fewshot_tiles, config));

        // Refinement always restarts from the pristine base checkpoint.
        std::uint64_t fold_seed = derive_seed(plan.seed, "refine_fold:" + std::to_string(f));
        RefinementData data =
            support_refinement_pairs(fold.support, fewshot_tiles, fold_seed,
                                     config.variants_per_tile, config.refine_pairs_per_side);
        TrainingConfig rc = config.refine_config;
        rc.seed = fold_seed;
        ModelCheckpoint refined_cp = refine(base, data.pairs, data.tiles, rc);
        SiameseModel refined_model = SiameseModel::from_checkpoint(refined_cp);
        result.refined.per_fold.push_back(
            classify_fold(refined_model, fold, fewshot_tiles, config));
    }
    aggregate_arm(result.zero_shot);
    aggregate_arm(result.refined);
    return result;
}

nlohmann::json SweepResult::to_json() const {
    auto agg = [](const MetricAggregate& a) {
        return nlohmann::json{{"precision", a.precision},
                              {"recall", a.recall},
                              {"f1", a.f1},
                              {"accuracy", a.accuracy}};
    };
    auto arm = [&](const ArmResult& a) {
        nlohmann::json folds = nlohmann::json::array();
        for (const auto& rep : a.per_fold) {
            folds.push_back({{"precision", rep.macro.precision},
                             {"recall", rep.macro.recall},
                             {"f1", rep.macro.f1},
                             {"accuracy", rep.weighted_accuracy}});
        }
        return nlohmann::json{
            {"per_fold", std::move(folds)}, {"mean", agg(a.mean)}, {"std", agg(a.stddev)}};
    };
    return {{"k", k},
            {"n_folds", n_folds},
            {"arms", {{"zero_shot", arm(zero_shot)}, {"refined", arm(refined)}}}};
}

}  // namespace sia
