#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sia/classify.hpp"
#include "sia/dataset.hpp"
#include "sia/pairing.hpp"
#include "sia/siamese.hpp"

namespace sia {

struct SupportSet {
    int shots_k = 0;
    // class label -> exactly k tile ids
    std::map<std::string, std::vector<std::string>> members;

    std::vector<std::string> all_ids() const;
};

struct Fold {
    SupportSet support;
    std::vector<std::string> test_ids;
};

struct FoldPlan {
    int n_folds = 0;
    std::uint64_t seed = 0;
    std::vector<Fold> folds;
};

// Builds n_folds disjoint support/test splits over the few-shot classes.
// Each class pool is first capped to pool_cap tiles (seeded), then every fold
// draws k support tiles per class; the remainder of the pool is that fold's
// test set. Folds alternate: a class repeats a support selection only when it
// has no unused k-subsets left. k must lie in [1, max_k].
FoldPlan build_fold_plan(const DatasetManifest& fewshot_manifest, int k, int n_folds,
                         std::uint64_t seed, int pool_cap = 6, int max_k = 3);

struct RefinementData {
    PairDataset pairs;       // balanced similar/dissimilar over augmented supports
    DatasetManifest tiles;   // the augmented support tiles the pairs reference
};

// Expands support tiles with the standard augmentation schedule, enumerates
// similar/dissimilar pairs and samples a balanced set (capped at
// pairs_per_side per side when given).
RefinementData support_refinement_pairs(const SupportSet& support,
                                        const DatasetManifest& fewshot_tiles,
                                        std::uint64_t aug_seed, int variants_per_tile = 6,
                                        std::size_t pairs_per_side = SIZE_MAX);

struct MetricAggregate {
    double precision = 0, recall = 0, f1 = 0, accuracy = 0;
};

struct ArmResult {
    std::vector<ClassificationReport> per_fold;
    MetricAggregate mean;
    MetricAggregate stddev;  // sample std across folds; 0 for a single fold
};

struct SweepResult {
    int k = 0;
    int n_folds = 0;
    ArmResult zero_shot;
    ArmResult refined;

    nlohmann::json to_json() const;
};

struct SweepConfig {
    TrainingConfig refine_config;  // per-fold seeds are derived from plan seed
    ClassifyMethod method = ClassifyMethod::avg;
    int knn_k = 0;  // 0 means use the shot count
    int variants_per_tile = 6;
    std::size_t refine_pairs_per_side = SIZE_MAX;
};

// For every fold: score and classify all test tiles against the fold support
// with the unrefined base model (zero-shot arm), then refine a fresh copy of
// the base on the fold's support pairs and classify again (refined arm). Both
// arms share identical partitions. Headline numbers are macro
// precision/recall/F1 plus weighted accuracy.
SweepResult run_sweep(const ModelCheckpoint& base, const FoldPlan& plan,
                      const DatasetManifest& fewshot_tiles, const SweepConfig& config);

}  // namespace sia
