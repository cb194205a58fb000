#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sia/dataset.hpp"
#include "sia/siamese.hpp"

namespace sia {

struct SimilarityRecord {
    std::string query_id;
    std::string support_id;
    std::string support_class;
    double score = 0.0;  // in [0,1]
};

enum class ClassifyMethod { avg, knn };

struct Prediction {
    std::string query_id;
    std::string predicted_class;
    ClassifyMethod method = ClassifyMethod::avg;
    std::optional<int> knn_k;
    // avg: mean score per class; knn: vote count per class among the top K.
    std::map<std::string, double> class_aggregates;
    std::optional<std::string> true_class;
};

struct PerClassMetrics {
    double precision = 0, recall = 0, f1 = 0;
    std::size_t support = 0;  // number of true samples of the class
};

struct ClassificationReport {
    std::map<std::string, PerClassMetrics> per_class;
    PerClassMetrics macro;
    PerClassMetrics weighted;  // support-weighted averages, labeled separately
    double weighted_accuracy = 0;  // overall fraction correct
    std::vector<std::string> warnings;
};

// The support side of scoring: embeddings are computed once per support tile.
struct SupportIndex {
    std::vector<std::string> ids;
    std::vector<std::string> classes;
    std::vector<std::vector<float>> embeddings;

    static SupportIndex build(const std::vector<const Tile*>& support_tiles,
                              const SiameseModel& model);
};

// One record per support tile; scores via similarity() of the embeddings.
std::vector<SimilarityRecord> score_query(const Image& query, const std::string& query_id,
                                          const SupportIndex& support, const SiameseModel& model);

// Method 1: highest mean similarity per class. Ties break on the higher
// maximum individual score, then lexicographic class label.
Prediction classify_avg(const std::vector<SimilarityRecord>& records);

// Method 2: majority class among the K highest-scoring supports. Vote ties
// break on the higher maximum individual score within the top K, then
// lexicographic class label. Equal scores rank by support_id.
Prediction classify_knn(const std::vector<SimilarityRecord>& records, int k);

// One-vs-rest precision/recall/F1 per class, macro and weighted averages, and
// support-weighted accuracy (fraction correct). Every prediction must carry a
// true class.
ClassificationReport evaluate(const std::vector<Prediction>& predictions);

}  // namespace sia
