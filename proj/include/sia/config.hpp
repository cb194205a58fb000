#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace sia {

// One declarative configuration for the whole pipeline. Values come from
// defaults, then an optional JSON config file, then command-line flags, in
// that precedence order.
struct RunConfig {
    // paths
    std::string raw_manifest;  // input of `prepare`
    std::string out_dir = "out";
    std::string checkpoint;       // model consumed by refine/classify/explain/sweep
    std::string input_manifest;   // prepared manifest for downstream stages

    // prepare
    double target_gsd_cm = 6.0;
    int target_size = 128;

    // pairing
    int per_class_cap = 13;
    int variants_per_tile = 6;
    std::size_t pairs_per_side = 10000;

    // base training
    std::string tower = "shallow_cnn";
    int embedding_dim = 128;
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::string loss = "bce";

    // refinement
    int refine_epochs = 50;
    int refine_batch_size = 32;
    double refine_learning_rate = 1e-4;
    std::size_t refine_pairs_per_side = 512;
    bool freeze_backbone = false;

    // few-shot protocol
    int shots_k = 3;
    int n_folds = 4;
    int pool_cap = 6;

    // classification + explanation
    std::string method = "avg";
    int knn_k = 0;     // 0: use the shot count
    int explain_k = 0;  // 0: use the shot count

    // global
    std::uint64_t seed = 42;

    static RunConfig from_file(const std::filesystem::path& file);
    void apply_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

}  // namespace sia
