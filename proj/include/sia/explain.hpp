#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sia/classify.hpp"
#include "sia/dataset.hpp"

namespace sia {

struct SelectedSupport {
    std::string support_id;
    std::string support_class;
    double score = 0;
};

// The K highest-scoring supports across the whole support set, descending.
struct ExplanationRecord {
    std::string query_id;
    std::vector<SelectedSupport> selected;
    std::string predicted_class;
    std::string true_class;
};

struct MetricBreakdown {
    double value = 0;
    std::vector<double> per_sample;
};

// Top-K across the entire support set (not per class), sorted by descending
// score; equal scores order by support_id.
ExplanationRecord select_explanation(const std::vector<SimilarityRecord>& records, int k,
                                     const Prediction& prediction, const std::string& true_class);

// Fraction of (sample, slot) positions where the prediction is correct AND
// the selected support carries the predicted class. Misclassified queries
// contribute 0 for every slot.
MetricBreakdown correctness(const std::vector<ExplanationRecord>& explanations);

enum class PerturbMode { random_op, identity };

// Fraction of supports shared between an explanation and its perturbed
// counterpart: |S ∩ S'| / K.
double explanation_overlap(const ExplanationRecord& original, const ExplanationRecord& perturbed);

// The continuity statistic over precomputed (original, perturbed) explanation
// pairs: mean overlap.
MetricBreakdown continuity_from_explanations(
    const std::vector<std::pair<ExplanationRecord, ExplanationRecord>>& pairs);

// Mean fraction of selected supports that persist when each query is
// perturbed by one randomly drawn augmentation operator. identity mode forces
// the no-op perturbation (then the value is exactly 1).
MetricBreakdown continuity(const std::vector<const Tile*>& queries, const SupportIndex& support,
                           const SiameseModel& model, int k, std::uint64_t perturb_seed,
                           PerturbMode mode = PerturbMode::random_op);

// Normalized Shannon entropy of support-selection frequencies, averaged per
// sample. Undefined (nullopt) when K == 1. All explanations must share one K.
std::optional<MetricBreakdown> contrastivity(const std::vector<ExplanationRecord>& explanations);

// Diagnostic only, not a headline metric: entropy of the global selection
// frequency distribution over the whole support pool, normalized by
// log2(pool size).
double selection_pool_entropy(const std::vector<ExplanationRecord>& explanations,
                              std::size_t pool_size);

struct XaiMetricsReport {
    double c_cor = 0;
    double c_cty = 0;
    std::optional<double> c_cst;
    int k = 0;
    std::size_t n_samples = 0;
    std::vector<std::string> query_ids;
    std::vector<double> per_sample_cor;
    std::vector<double> per_sample_cty;
    std::vector<double> per_sample_cst;  // empty when c_cst is undefined

    nlohmann::json to_json() const;
};

// Static HTML page plus annotated PNG panels: one row per query showing the
// query tile, its K selected supports with scores, and per-sample metric
// contributions. Header carries the aggregates.
void render_report(const std::vector<ExplanationRecord>& explanations,
                   const XaiMetricsReport& metrics, const DatasetManifest& tiles,
                   const std::filesystem::path& out_dir);

}  // namespace sia
