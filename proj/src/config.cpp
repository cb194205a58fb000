#include "sia/config.hpp"

#include <fstream>

#include "sia/errors.hpp"

namespace sia {

using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::apply_json(const json& j) {
    read_if(j, "raw_manifest", raw_manifest);
    read_if(j, "out_dir", out_dir);
    read_if(j, "checkpoint", checkpoint);
    read_if(j, "input_manifest", input_manifest);
    read_if(j, "target_gsd_cm", target_gsd_cm);
    read_if(j, "target_size", target_size);
    read_if(j, "per_class_cap", per_class_cap);
    read_if(j, "variants_per_tile", variants_per_tile);
    read_if(j, "pairs_per_side", pairs_per_side);
    read_if(j, "tower", tower);
    read_if(j, "embedding_dim", embedding_dim);
    read_if(j, "epochs", epochs);
    read_if(j, "batch_size", batch_size);
    read_if(j, "learning_rate", learning_rate);
    read_if(j, "loss", loss);
    read_if(j, "refine_epochs", refine_epochs);
    read_if(j, "refine_batch_size", refine_batch_size);
    read_if(j, "refine_learning_rate", refine_learning_rate);
    read_if(j, "refine_pairs_per_side", refine_pairs_per_side);
    read_if(j, "freeze_backbone", freeze_backbone);
    read_if(j, "shots_k", shots_k);
    read_if(j, "n_folds", n_folds);
    read_if(j, "pool_cap", pool_cap);
    read_if(j, "method", method);
    read_if(j, "knn_k", knn_k);
    read_if(j, "explain_k", explain_k);
    read_if(j, "seed", seed);
}

RunConfig RunConfig::from_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot open config file: " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config " + file.string() + ": " + e.what());
    }
    RunConfig cfg;
    cfg.apply_json(j);
    return cfg;
}

json RunConfig::to_json() const {
    return {{"raw_manifest", raw_manifest},
            {"out_dir", out_dir},
            {"checkpoint", checkpoint},
            {"input_manifest", input_manifest},
            {"target_gsd_cm", target_gsd_cm},
            {"target_size", target_size},
            {"per_class_cap", per_class_cap},
            {"variants_per_tile", variants_per_tile},
            {"pairs_per_side", pairs_per_side},
            {"tower", tower},
            {"embedding_dim", embedding_dim},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"loss", loss},
            {"refine_epochs", refine_epochs},
            {"refine_batch_size", refine_batch_size},
            {"refine_learning_rate", refine_learning_rate},
            {"refine_pairs_per_side", refine_pairs_per_side},
            {"freeze_backbone", freeze_backbone},
            {"shots_k", shots_k},
            {"n_folds", n_folds},
            {"pool_cap", pool_cap},
            {"method", method},
            {"knn_k", knn_k},
            {"explain_k", explain_k},
            {"seed", seed}};
}

void RunConfig::validate() const {
    if (target_gsd_cm <= 0) throw ValidationError("config: target_gsd_cm must be positive");
    if (target_size < 1) throw ValidationError("config: target_size must be positive");
    if (per_class_cap < 1) throw ValidationError("config: per_class_cap must be >= 1");
    if (variants_per_tile < 0) throw ValidationError("config: variants_per_tile must be >= 0");
    if (epochs < 1 || refine_epochs < 1) throw ValidationError("config: epochs must be >= 1");
    if (batch_size < 1 || refine_batch_size < 1)
        throw ValidationError("config: batch_size must be >= 1");
    if (learning_rate <= 0 || refine_learning_rate <= 0)
        throw ValidationError("config: learning rates must be positive");
    if (tower != "shallow_cnn" && tower != "pretrained_lightweight")
        throw ValidationError("config: unknown tower: " + tower);
    if (loss != "bce" && loss != "contrastive")
        throw ValidationError("config: unknown loss: " + loss);
    if (method != "avg" && method != "knn")
        throw ValidationError("config: unknown method: " + method);
    if (shots_k < 1) throw ValidationError("config: shots_k must be >= 1");
    if (n_folds < 1) throw ValidationError("config: n_folds must be >= 1");
}

}  // namespace sia
