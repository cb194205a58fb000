#include "sia/pairing.hpp"

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "sia/errors.hpp"

namespace sia {

using nlohmann::json;

std::vector<PairSample> enumerate_similar_pairs(const DatasetManifest& candidates, Role role) {
    std::vector<PairSample> out;
    for (const auto& [label, tiles] : candidates.by_class(role)) {
        (void)label;
        for (std::size_t i = 0; i < tiles.size(); ++i)
            for (std::size_t j = i + 1; j < tiles.size(); ++j)
                out.push_back({tiles[i]->id, tiles[j]->id, 1});
    }
    return out;
}

std::vector<PairSample> enumerate_dissimilar_pairs(const DatasetManifest& candidates, Role role) {
    auto classes = candidates.by_class(role);
    if (classes.size() < 2)
        throw ValidationError("enumerate_dissimilar_pairs: need at least 2 classes, have " +
                              std::to_string(classes.size()));
    std::vector<const std::vector<const Tile*>*> groups;
    for (const auto& [label, tiles] : classes) {
        (void)label;
        groups.push_back(&tiles);
    }
    std::vector<PairSample> out;
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
        for (std::size_t gj = gi + 1; gj < groups.size(); ++gj)
            for (const Tile* a : *groups[gi])
                for (const Tile* b : *groups[gj]) out.push_back({a->id, b->id, 0});
    return out;
}

namespace {

// First `n` slots of a partial Fisher-Yates over [0, pool).
std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(pool);
    for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> d(i, pool - 1);
        std::swap(idx[i], idx[d(rng)]);
    }
    idx.resize(n);
    return idx;
}

}  // namespace

PairDataset sample_balanced(const std::vector<PairSample>& similar,
                            const std::vector<PairSample>& dissimilar, std::size_t n_per_side,
                            std::uint64_t seed) {
    if (similar.empty()) throw ValidationError("sample_balanced: similar side is empty");
    if (dissimilar.empty()) throw ValidationError("sample_balanced: dissimilar side is empty");

    // Take-all fallback: a short side is taken whole and the long side is
    // truncated to the same count.
    std::size_t take = std::min({n_per_side, similar.size(), dissimilar.size()});

    PairDataset ds;
    ds.seed = seed;
    ds.enumerated_similar = similar.size();
    ds.enumerated_dissimilar = dissimilar.size();
    ds.n_similar = take;
    ds.n_dissimilar = take;

    std::mt19937_64 rng(seed);
    for (std::size_t i : sample_indices(similar.size(), take, rng)) ds.pairs.push_back(similar[i]);
    for (std::size_t i : sample_indices(dissimilar.size(), take, rng))
        ds.pairs.push_back(dissimilar[i]);
    return ds;
}

void save_pairs(const PairDataset& ds, const std::filesystem::path& jsonl_file,
                const std::filesystem::path& meta_file) {
    std::ofstream out(jsonl_file);
    if (!out) throw ValidationError("cannot write pairs file: " + jsonl_file.string());
    for (const auto& p : ds.pairs) {
        json line = {{"a", p.tile_a_id}, {"b", p.tile_b_id}, {"target", p.target}};
        out << line.dump() << "\n";
    }
    json meta = {{"similar", ds.n_similar},
                 {"dissimilar", ds.n_dissimilar},
                 {"enumerated_similar", ds.enumerated_similar},
                 {"enumerated_dissimilar", ds.enumerated_dissimilar},
                 {"seed", ds.seed}};
    std::ofstream mo(meta_file);
    if (!mo) throw ValidationError("cannot write pairs meta file: " + meta_file.string());
    mo << meta.dump(2) << "\n";
}

PairDataset load_pairs(const std::filesystem::path& jsonl_file,
                       const std::filesystem::path& meta_file) {
    std::ifstream in(jsonl_file);
    if (!in) throw ValidationError("cannot open pairs file: " + jsonl_file.string());
    PairDataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ds.pairs.push_back({j.at("a").get<std::string>(), j.at("b").get<std::string>(),
                            j.at("target").get<int>()});
    }
    std::ifstream mi(meta_file);
    if (!mi) throw ValidationError("cannot open pairs meta file: " + meta_file.string());
    json meta;
    mi >> meta;
    ds.n_similar = meta.at("similar").get<std::size_t>();
    ds.n_dissimilar = meta.at("dissimilar").get<std::size_t>();
    ds.enumerated_similar = meta.value("enumerated_similar", std::size_t{0});
    ds.enumerated_dissimilar = meta.value("enumerated_dissimilar", std::size_t{0});
    ds.seed = meta.at("seed").get<std::uint64_t>();
    if (ds.n_similar != ds.n_dissimilar)
        throw ValidationError("pairs meta: similar/dissimilar counts are unbalanced");
    return ds;
}

}  // namespace sia
