#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sia/dataset.hpp"

namespace sia {

struct PairSample {
    std::string tile_a_id;
    std::string tile_b_id;
    int target = 0;  // 1 = same class

    bool operator==(const PairSample&) const = default;
};

struct PairDataset {
    std::vector<PairSample> pairs;
    std::size_t n_similar = 0;
    std::size_t n_dissimilar = 0;
    std::uint64_t seed = 0;
    // Pool sizes before sampling, kept for honest reporting.
    std::size_t enumerated_similar = 0;
    std::size_t enumerated_dissimilar = 0;
};

// All unordered within-class pairs over active labeled tiles: per class of
// size m, m*(m-1)/2 pairs. No self-pairs.
std::vector<PairSample> enumerate_similar_pairs(const DatasetManifest& candidates, Role role);

// All unordered cross-class pairs: sum over class pairs of m_i * m_j.
// Throws when fewer than two classes exist.
std::vector<PairSample> enumerate_dissimilar_pairs(const DatasetManifest& candidates, Role role);

// Uniform sample without replacement of n_per_side pairs from each list. When
// a side holds fewer than n_per_side pairs that whole side is taken and the
// other side is truncated to match, keeping the dataset balanced.
PairDataset sample_balanced(const std::vector<PairSample>& similar,
                            const std::vector<PairSample>& dissimilar, std::size_t n_per_side,
                            std::uint64_t seed);

// JSON-lines {"a": id, "b": id, "target": 0|1} plus a sidecar header with
// counts and seed.
void save_pairs(const PairDataset& ds, const std::filesystem::path& jsonl_file,
                const std::filesystem::path& meta_file);
PairDataset load_pairs(const std::filesystem::path& jsonl_file,
                       const std::filesystem::path& meta_file);

}  // namespace sia
