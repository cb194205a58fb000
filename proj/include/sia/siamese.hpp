#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sia/dataset.hpp"
#include "sia/nn/network.hpp"
#include "sia/nn/safetensors.hpp"
#include "sia/pairing.hpp"

namespace sia {

enum class TowerKind { shallow_cnn, pretrained_lightweight };

std::string to_string(TowerKind k);
TowerKind tower_from_string(const std::string& s);

struct TowerSpec {
    TowerKind kind = TowerKind::shallow_cnn;
    int embedding_dim = 128;
};

enum class LossKind { bce, contrastive };

struct TrainingConfig {
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;
    bool freeze_backbone = false;  // pretrained tower only: train just the head
    LossKind loss = LossKind::bce;
    double contrastive_margin = 1.0;

    void validate() const;
    nlohmann::json to_json() const;
};

struct LineageEntry {
    std::string dataset_fingerprint;
    nlohmann::json config;
    int epochs = 0;
    std::vector<double> loss_curve;  // mean training loss per epoch

    nlohmann::json to_json() const;
    static LineageEntry from_json(const nlohmann::json& j);
};

struct ModelCheckpoint {
    TowerSpec tower_spec;
    std::uint64_t seed = 0;
    std::vector<LineageEntry> lineage;
    std::map<std::string, nn::NamedTensor> weights;  // params and buffers
};

// Directory layout: model.safetensors + model.json sidecar.
void save_checkpoint(const ModelCheckpoint& cp, const std::filesystem::path& dir);
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);

// exp(-||a-b||): 1 iff a == b, symmetric, in (0, 1].
double similarity(std::span<const float> a, std::span<const float> b);

// Binary cross-entropy on the similarity score, target in {0,1}. The score is
// clamped to [eps, 1-eps] with eps = 1e-7 before the logs.
double pair_loss(double score, int target);

// Analytic gradient of pair_loss(similarity(a,b), target) w.r.t. both
// embeddings. Returns the loss; score_out receives the unclamped similarity.
double pair_loss_grad(std::span<const float> a, std::span<const float> b, int target,
                      std::span<float> grad_a, std::span<float> grad_b,
                      double* score_out = nullptr);

// Contrastive alternative (config switch): t*d^2 + (1-t)*max(0, margin-d)^2.
double contrastive_loss(double distance, int target, double margin);
double contrastive_loss_grad(std::span<const float> a, std::span<const float> b, int target,
                             double margin, std::span<float> grad_a, std::span<float> grad_b);

// Runtime model. One tower, used for both pair members (weight tying is
// structural: there is only one parameter set).
class SiameseModel {
public:
    static SiameseModel build(const TowerSpec& spec, std::uint64_t init_seed);
    static SiameseModel from_checkpoint(const ModelCheckpoint& cp);

    ModelCheckpoint to_checkpoint(std::uint64_t seed, std::vector<LineageEntry> lineage) const;

    // Inference embedding (eval mode, batch of one). Input must be a
    // normalized 128x128x3 tile; pixel bytes are scaled to [0,1].
    std::vector<float> embed(const Image& img) const;

    const TowerSpec& spec() const { return spec_; }
    std::size_t trainable_param_count() const { return tower_.param_count(); }
    nn::Network& tower() { return tower_; }

    static constexpr int kInputSize = 128;

private:
    TowerSpec spec_;
    mutable nn::Network tower_;  // forward caches make forward non-const
};

// Convenience wrappers matching the operation contracts. Heavy callers should
// build one SiameseModel and reuse it.
std::vector<float> embed(const Tile& tile, const ModelCheckpoint& cp);

using EpochLogger = std::function<void(int epoch, double mean_loss)>;

// Trains a fresh tower on balanced pairs. Every pair id must resolve to a
// tile in `tiles`. Deterministic for a fixed seed on one machine/build.
ModelCheckpoint train_base(const PairDataset& pairs, const DatasetManifest& tiles,
                           const TowerSpec& spec, const TrainingConfig& config,
                           const EpochLogger& log = nullptr);

// Continues training from `base` on support pairs; returns a new checkpoint
// with one more lineage entry. `base` is left untouched.
ModelCheckpoint refine(const ModelCheckpoint& base, const PairDataset& support_pairs,
                       const DatasetManifest& support_tiles, const TrainingConfig& config,
                       const EpochLogger& log = nullptr);

// Fingerprint of a pair dataset plus the tiles it references; recorded in
// training lineage.
std::string dataset_fingerprint(const PairDataset& pairs, const DatasetManifest& tiles);

}  // namespace sia
