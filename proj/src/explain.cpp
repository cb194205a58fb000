#include "sia/explain.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "sia/augmentation.hpp"
#include "sia/errors.hpp"
#include "sia/seeds.hpp"

namespace sia {

ExplanationRecord select_explanation(const std::vector<SimilarityRecord>& records, int k,
                                     const Prediction& prediction,
                                     const std::string& true_class) {
    if (k < 1 || static_cast<std::size_t>(k) > records.size())
        throw ValidationError("select_explanation: K=" + std::to_string(k) +
                              " out of range [1, " + std::to_string(records.size()) + "]");
    std::vector<const SimilarityRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->support_id < b->support_id;
    });
    ExplanationRecord ex;
    ex.query_id = prediction.query_id;
    ex.predicted_class = prediction.predicted_class;
    ex.true_class = true_class;
    for (int i = 0; i < k; ++i)
        ex.selected.push_back({sorted[i]->support_id, sorted[i]->support_class, sorted[i]->score});
    return ex;
}

MetricBreakdown correctness(const std::vector<ExplanationRecord>& explanations) {
    if (explanations.empty()) throw ValidationError("correctness: no explanations");
    MetricBreakdown out;
    double total = 0;
    for (const auto& ex : explanations) {
        double hits = 0;
        if (ex.predicted_class == ex.true_class) {
            for (const auto& s : ex.selected)
                if (s.support_class == ex.predicted_class) hits += 1;
        }
        double contrib = hits / static_cast<double>(ex.selected.size());
        out.per_sample.push_back(contrib);
        total += contrib;
    }
    out.value = total / static_cast<double>(explanations.size());
    return out;
}

namespace {

std::set<std::string> top_k_ids(const std::vector<SimilarityRecord>& records, int k) {
    std::vector<const SimilarityRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->support_id < b->support_id;
    });
    std::set<std::string> ids;
    for (int i = 0; i < k; ++i) ids.insert(sorted[i]->support_id);
    return ids;
}

}  // namespace

double explanation_overlap(const ExplanationRecord& original, const ExplanationRecord& perturbed) {
    if (original.selected.empty() || original.selected.size() != perturbed.selected.size())
        throw ValidationError("explanation_overlap: explanations must share one nonzero K");
    std::set<std::string> after;
    for (const auto& s : perturbed.selected) after.insert(s.support_id);
    std::size_t persist = 0;
    for (const auto& s : original.selected)
        if (after.count(s.support_id)) ++persist;
    return static_cast<double>(persist) / static_cast<double>(original.selected.size());
}

MetricBreakdown continuity_from_explanations(
    const std::vector<std::pair<ExplanationRecord, ExplanationRecord>>& pairs) {
    if (pairs.empty()) throw ValidationError("continuity: no explanation pairs");
    MetricBreakdown out;
    double total = 0;
    for (const auto& [before, after] : pairs) {
        double contrib = explanation_overlap(before, after);
        out.per_sample.push_back(contrib);
        total += contrib;
    }
    out.value = total / static_cast<double>(pairs.size());
    return out;
}

MetricBreakdown continuity(const std::vector<const Tile*>& queries, const SupportIndex& support,
                           const SiameseModel& model, int k, std::uint64_t perturb_seed,
                           PerturbMode mode) {
    if (queries.empty()) throw ValidationError("continuity: no queries");
    if (k < 1 || static_cast<std::size_t>(k) > support.ids.size())
        throw ValidationError("continuity: K out of range");
    std::vector<std::pair<ExplanationRecord, ExplanationRecord>> pairs;
    for (const Tile* q : queries) {
        auto original = score_query(q->pixels, q->id, support, model);
        Image perturbed = q->pixels;
        if (mode == PerturbMode::random_op) {
            auto rng = make_rng(perturb_seed, "continuity:" + q->id);
            perturbed = augment_image(q->pixels, draw_random_perturbation(rng));
        }
        auto shifted = score_query(perturbed, q->id, support, model);
        ExplanationRecord s0, s1;
        s0.query_id = q->id;
        s1.query_id = q->id;
        auto fill = [&](const std::vector<SimilarityRecord>& recs, ExplanationRecord& ex) {
            for (const auto& id : top_k_ids(recs, k)) ex.selected.push_back({id, "", 0});
        };
        fill(original, s0);
        fill(shifted, s1);
        pairs.emplace_back(std::move(s0), std::move(s1));
    }
    return continuity_from_explanations(pairs);
}

std::optional<MetricBreakdown> contrastivity(const std::vector<ExplanationRecord>& explanations) {
    if (explanations.empty()) throw ValidationError("contrastivity: no explanations");
    const std::size_t k = explanations.front().selected.size();
    for (const auto& ex : explanations)
        if (ex.selected.size() != k)
            throw ValidationError("contrastivity: explanations have mixed K");
    if (k == 1) return std::nullopt;  // a single support has no diversity to measure

    // Global selection frequency of each support image across all samples.
    std::unordered_map<std::string, double> freq;
    const double denom = static_cast<double>(explanations.size()) * static_cast<double>(k);
    for (const auto& ex : explanations)
        for (const auto& s : ex.selected) freq[s.support_id] += 1.0 / denom;

    MetricBreakdown out;
    const double norm = std::log2(static_cast<double>(k));
    double total = 0;
    for (const auto& ex : explanations) {
        double entropy = 0;
        for (const auto& s : ex.selected) {
            double p = freq.at(s.support_id);
            entropy -= p * std::log2(p);
        }
        double term = entropy / norm;
        out.per_sample.push_back(term);
        total += term;
    }
    out.value = total / static_cast<double>(explanations.size());
    return out;
}

double selection_pool_entropy(const std::vector<ExplanationRecord>& explanations,
                              std::size_t pool_size) {
    if (pool_size < 2 || explanations.empty()) return 0;
    std::unordered_map<std::string, double> freq;
    double denom = 0;
    for (const auto& ex : explanations) denom += static_cast<double>(ex.selected.size());
    for (const auto& ex : explanations)
        for (const auto& s : ex.selected) freq[s.support_id] += 1.0 / denom;
    double entropy = 0;
    for (const auto& [id, p] : freq) {
        (void)id;
        entropy -= p * std::log2(p);
    }
    return entropy / std::log2(static_cast<double>(pool_size));
}

nlohmann::json XaiMetricsReport::to_json() const {
    nlohmann::json per_sample = nlohmann::json::array();
    for (std::size_t i = 0; i < query_ids.size(); ++i) {
        nlohmann::json row;
        row["query"] = query_ids[i];
        row["correctness"] = per_sample_cor.at(i);
        row["continuity"] = per_sample_cty.at(i);
        row["contrastivity"] =
            per_sample_cst.empty() ? nlohmann::json(nullptr) : nlohmann::json(per_sample_cst.at(i));
        per_sample.push_back(std::move(row));
    }
    return {{"c_cor", c_cor},
            {"c_cty", c_cty},
            {"c_cst", c_cst ? nlohmann::json(*c_cst) : nlohmann::json(nullptr)},
            {"k", k},
            {"n", n_samples},
            {"per_sample", std::move(per_sample)}};
}

}  // namespace sia
