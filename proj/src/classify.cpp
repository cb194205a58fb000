#include "sia/classify.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sia/errors.hpp"

namespace sia {

SupportIndex SupportIndex::build(const std::vector<const Tile*>& support_tiles,
                                 const SiameseModel& model) {
    SupportIndex idx;
    for (const Tile* t : support_tiles) {
        if (!t->label) throw ValidationError("support tile " + t->id + " has no class label");
        idx.ids.push_back(t->id);
        idx.classes.push_back(*t->label);
        idx.embeddings.push_back(model.embed(t->pixels));
    }
    return idx;
}

std::vector<SimilarityRecord> score_query(const Image& query, const std::string& query_id,
                                          const SupportIndex& support, const SiameseModel& model) {
    if (support.ids.empty()) throw ValidationError("score_query: empty support set");
    std::vector<float> qe = model.embed(query);
    std::vector<SimilarityRecord> out;
    out.reserve(support.ids.size());
    for (std::size_t i = 0; i < support.ids.size(); ++i) {
        out.push_back({query_id, support.ids[i], support.classes[i],
                       similarity(qe, support.embeddings[i])});
    }
    return out;
}

namespace {

// Shared tie-break: among candidate classes with equal primary statistic,
// prefer the one whose best individual score is higher, then the
// lexicographically smaller label.
std::string pick_class(const std::map<std::string, double>& primary,
                       const std::map<std::string, double>& max_score) {
    std::string best;
    bool have = false;
    for (const auto& [label, stat] : primary) {
        if (!have) {
            best = label;
            have = true;
            continue;
        }
        double cur = primary.at(best);
        if (stat > cur) {
            best = label;
        } else if (stat == cur) {
            double ms_new = max_score.at(label), ms_best = max_score.at(best);
            if (ms_new > ms_best || (ms_new == ms_best && label < best)) best = label;
        }
    }
    return best;
}

}  // namespace

Prediction classify_avg(const std::vector<SimilarityRecord>& records) {
    if (records.empty()) throw ValidationError("classify_avg: no similarity records");
    std::map<std::string, double> sum, maxs;
    std::map<std::string, std::size_t> count;
    for (const auto& r : records) {
        sum[r.support_class] += r.score;
        count[r.support_class] += 1;
        auto it = maxs.find(r.support_class);
        if (it == maxs.end() || r.score > it->second) maxs[r.support_class] = r.score;
    }
    Prediction p;
    p.query_id = records.front().query_id;
    p.method = ClassifyMethod::avg;
    for (const auto& [label, s] : sum) p.class_aggregates[label] = s / count[label];
    p.predicted_class = pick_class(p.class_aggregates, maxs);
    return p;
}

Prediction classify_knn(const std::vector<SimilarityRecord>& records, int k) {
    if (records.empty()) throw ValidationError("classify_knn: no similarity records");
    if (k < 1 || static_cast<std::size_t>(k) > records.size())
        throw ValidationError("classify_knn: K=" + std::to_string(k) +
                              " out of range [1, " + std::to_string(records.size()) + "]");
    std::vector<const SimilarityRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->support_id < b->support_id;
    });
    std::map<std::string, double> votes, maxs;
    for (int i = 0; i < k; ++i) {
        const auto* r = sorted[i];
        votes[r->support_class] += 1.0;
        auto it = maxs.find(r->support_class);
        if (it == maxs.end() || r->score > it->second) maxs[r->support_class] = r->score;
    }
    Prediction p;
    p.query_id = records.front().query_id;
    p.method = ClassifyMethod::knn;
    p.knn_k = k;
    p.class_aggregates = votes;
    p.predicted_class = pick_class(votes, maxs);
    return p;
}

ClassificationReport evaluate(const std::vector<Prediction>& predictions) {
    if (predictions.empty()) throw ValidationError("evaluate: no predictions");
    std::set<std::string> labels;
    for (const auto& p : predictions) {
        if (!p.true_class)
            throw ValidationError("evaluate: prediction for " + p.query_id + " has no true class");
        labels.insert(*p.true_class);
        labels.insert(p.predicted_class);
    }

    ClassificationReport rep;
    std::size_t correct = 0;
    for (const auto& p : predictions)
        if (p.predicted_class == *p.true_class) ++correct;
    rep.weighted_accuracy = static_cast<double>(correct) / predictions.size();

    double total_support = 0;
    for (const auto& label : labels) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (const auto& p : predictions) {
            bool is_true = (*p.true_class == label);
            bool is_pred = (p.predicted_class == label);
            if (is_true && is_pred) ++tp;
            else if (!is_true && is_pred) ++fp;
            else if (is_true && !is_pred) ++fn;
        }
        PerClassMetrics m;
        m.support = tp + fn;
        if (tp + fp == 0) {
            m.precision = 0;
            if (m.support > 0)
                rep.warnings.push_back("class " + label +
                                       " never predicted; precision reported as 0");
        } else {
            m.precision = static_cast<double>(tp) / (tp + fp);
        }
        m.recall = (tp + fn == 0) ? 0 : static_cast<double>(tp) / (tp + fn);
        m.f1 = (m.precision + m.recall == 0)
                   ? 0
                   : 2 * m.precision * m.recall / (m.precision + m.recall);
        rep.per_class[label] = m;

        rep.macro.precision += m.precision;
        rep.macro.recall += m.recall;
        rep.macro.f1 += m.f1;
        rep.weighted.precision += m.precision * m.support;
        rep.weighted.recall += m.recall * m.support;
        rep.weighted.f1 += m.f1 * m.support;
        total_support += static_cast<double>(m.support);
    }
    const double n_labels = static_cast<double>(labels.size());
    rep.macro.precision /= n_labels;
    rep.macro.recall /= n_labels;
    rep.macro.f1 /= n_labels;
    if (total_support > 0) {
        rep.weighted.precision /= total_support;
        rep.weighted.recall /= total_support;
        rep.weighted.f1 /= total_support;
    }
    return rep;
}

}  // namespace sia
