#include "sia/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "sia/errors.hpp"
#include "sia/nn/adam.hpp"
#include "sia/seeds.hpp"

namespace sia {

using nlohmann::json;

namespace {
constexpr double kLossEps = 1e-7;
constexpr double kDistFloor = 1e-12;
}  // namespace

std::string to_string(TowerKind k) {
    switch (k) {
        case TowerKind::shallow_cnn: return "shallow_cnn";
        case TowerKind::pretrained_lightweight: return "pretrained_lightweight";
    }
    throw InternalError("unknown tower kind");
}

TowerKind tower_from_string(const std::string& s) {
    if (s == "shallow_cnn") return TowerKind::shallow_cnn;
    if (s == "pretrained_lightweight") return TowerKind::pretrained_lightweight;
    throw ValidationError("unknown tower kind: " + s);
}

void TrainingConfig::validate() const {
    if (epochs < 1) throw ValidationError("TrainingConfig: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("TrainingConfig: batch_size must be >= 1");
    if (learning_rate <= 0) throw ValidationError("TrainingConfig: learning_rate must be > 0");
}

json TrainingConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"seed", seed},
            {"freeze_backbone", freeze_backbone},
            {"loss", loss == LossKind::bce ? "bce" : "contrastive"},
            {"contrastive_margin", contrastive_margin}};
}

json LineageEntry::to_json() const {
    return {{"dataset_fingerprint", dataset_fingerprint},
            {"config", config},
            {"epochs", epochs},
            {"loss_curve", loss_curve}};
}

LineageEntry LineageEntry::from_json(const json& j) {
    LineageEntry e;
    e.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    e.config = j.at("config");
    e.epochs = j.at("epochs").get<int>();
    e.loss_curve = j.value("loss_curve", std::vector<double>{});
    return e;
}

// --------------------------------------------------------- similarity head

double similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw ValidationError("similarity: embedding lengths differ (" + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()) + ")");
    double sq = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - b[i];
        sq += d * d;
    }
    return std::exp(-std::sqrt(sq));
}

double pair_loss(double score, int target) {
    double s = std::clamp(score, kLossEps, 1.0 - kLossEps);
    return target == 1 ? -std::log(s) : -std::log(1.0 - s);
}

double pair_loss_grad(std::span<const float> a, std::span<const float> b, int target,
                      std::span<float> grad_a, std::span<float> grad_b, double* score_out) {
    if (a.size() != b.size() || grad_a.size() != a.size() || grad_b.size() != a.size())
        throw ValidationError("pair_loss_grad: length mismatch");
    double sq = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - b[i];
        sq += d * d;
    }
    double dist = std::sqrt(sq);
    double s = std::exp(-dist);
    if (score_out) *score_out = s;
    double loss = pair_loss(s, target);

    // dL/ds is zero where the clamp is active; FD of the clamped loss agrees.
    double dL_ds = 0.0;
    if (s > kLossEps && s < 1.0 - kLossEps)
        dL_ds = (target == 1) ? -1.0 / s : 1.0 / (1.0 - s);
    // ds/d(dist) = -s; d(dist)/da = (a-b)/dist
    double coeff = dL_ds * (-s) / std::max(dist, kDistFloor);
    for (std::size_t i = 0; i < a.size(); ++i) {
        float g = static_cast<float>(coeff * (static_cast<double>(a[i]) - b[i]));
        grad_a[i] = g;
        grad_b[i] = -g;
    }
    return loss;
}

double contrastive_loss(double distance, int target, double margin) {
    if (target == 1) return distance * distance;
    double m = std::max(0.0, margin - distance);
    return m * m;
}

double contrastive_loss_grad(std::span<const float> a, std::span<const float> b, int target,
                             double margin, std::span<float> grad_a, std::span<float> grad_b) {
    double sq = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - b[i];
        sq += d * d;
    }
    double dist = std::sqrt(sq);
    double loss = contrastive_loss(dist, target, margin);
    double dL_dd = (target == 1) ? 2.0 * dist : -2.0 * std::max(0.0, margin - dist);
    double coeff = dL_dd / std::max(dist, kDistFloor);
    for (std::size_t i = 0; i < a.size(); ++i) {
        float g = static_cast<float>(coeff * (static_cast<double>(a[i]) - b[i]));
        grad_a[i] = g;
        grad_b[i] = -g;
    }
    return loss;
}

// ------------------------------------------------------------------ towers

namespace {

nn::Network build_shallow_tower(int embedding_dim, std::mt19937_64& rng) {
    // Four 3x3 conv blocks, widths 32/64/128/256. The 2x downsampling per
    // block is a stride-2 convolution: pointwise ReLU commutes with
    // subsampling, so this computes conv -> ReLU -> 2x subsample at a quarter
    // of the full-resolution cost.
    nn::Network net;
    int widths[4] = {32, 64, 128, 256};
    int in_c = 3;
    for (int i = 0; i < 4; ++i) {
        net.add(std::make_unique<nn::Conv2d>("tower.conv" + std::to_string(i + 1), in_c, widths[i],
                                             3, 2, 1, true, rng));
        net.add(std::make_unique<nn::ReLU>());
        in_c = widths[i];
    }
    net.add(std::make_unique<nn::GlobalAvgPool>());
    net.add(std::make_unique<nn::Dense>("tower.embed", 256, embedding_dim, rng, 0.1f));
    return net;
}

nn::Network build_lightweight_tower(int embedding_dim, std::mt19937_64& rng) {
    // MobileNetV2-style inverted-residual stack. Weights come from a
    // checkpoint when available; otherwise seeded random init.
    nn::Network net;
    net.add(std::make_unique<nn::Conv2d>("tower.stem", 3, 32, 3, 2, 1, false, rng));
    net.add(std::make_unique<nn::BatchNorm2d>("tower.stem_bn", 32));
    net.add(std::make_unique<nn::ReLU>(6.f));
    struct Stage {
        int t, c, n, s;
    };
    const Stage stages[] = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2}, {6, 64, 4, 2},
                            {6, 96, 3, 1},  {6, 160, 3, 2}, {6, 320, 1, 1}};
    int in_c = 32;
    int block = 0;
    for (const auto& st : stages) {
        for (int i = 0; i < st.n; ++i) {
            int stride = (i == 0) ? st.s : 1;
            net.add(std::make_unique<nn::InvertedResidual>("tower.block" + std::to_string(block++),
                                                           in_c, st.c, stride, st.t, rng));
            in_c = st.c;
        }
    }
    net.add(std::make_unique<nn::Conv2d>("tower.head", in_c, 1280, 1, 1, 0, false, rng));
    net.add(std::make_unique<nn::BatchNorm2d>("tower.head_bn", 1280));
    net.add(std::make_unique<nn::ReLU>(6.f));
    net.add(std::make_unique<nn::GlobalAvgPool>());
    net.add(std::make_unique<nn::Dense>("tower.embed", 1280, embedding_dim, rng, 0.1f));
    return net;
}

nn::Network build_tower(const TowerSpec& spec, std::uint64_t init_seed) {
    if (spec.embedding_dim < 1)
        throw ValidationError("TowerSpec: embedding_dim must be positive");
    auto rng = make_rng(init_seed, "tower_init");
    return spec.kind == TowerKind::shallow_cnn
               ? build_shallow_tower(spec.embedding_dim, rng)
               : build_lightweight_tower(spec.embedding_dim, rng);
}

nn::Tensor image_to_input(const Image& img) {
    if (img.height != SiameseModel::kInputSize || img.width != SiameseModel::kInputSize)
        throw ValidationError("model input must be " + std::to_string(SiameseModel::kInputSize) +
                              "x" + std::to_string(SiameseModel::kInputSize) + ", got " +
                              std::to_string(img.height) + "x" + std::to_string(img.width));
    nn::Tensor t(1, 3, img.height, img.width);
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                t.data[c * plane + y * img.width + x] = img.at(y, x, c) / 255.f;
    return t;
}

void fill_input_slot(nn::Tensor& batch, int slot, const Image& img) {
    nn::Tensor one = image_to_input(img);
    std::copy(one.data.begin(), one.data.end(), batch.sample(slot));
}

}  // namespace

SiameseModel SiameseModel::build(const TowerSpec& spec, std::uint64_t init_seed) {
    SiameseModel m;
    m.spec_ = spec;
    m.tower_ = build_tower(spec, init_seed);
    return m;
}

SiameseModel SiameseModel::from_checkpoint(const ModelCheckpoint& cp) {
    SiameseModel m = build(cp.tower_spec, cp.seed);
    auto load_into = [&](std::vector<nn::Param*> ps) {
        for (nn::Param* p : ps) {
            auto it = cp.weights.find(p->name);
            if (it == cp.weights.end())
                throw ValidationError("checkpoint missing tensor: " + p->name);
            if (it->second.data.size() != p->size())
                throw ValidationError("checkpoint tensor " + p->name + " has wrong size");
            p->value.assign(it->second.data.begin(), it->second.data.end());
        }
    };
    load_into(m.tower_.params());
    load_into(m.tower_.buffers());
    return m;
}

ModelCheckpoint SiameseModel::to_checkpoint(std::uint64_t seed,
                                            std::vector<LineageEntry> lineage) const {
    ModelCheckpoint cp;
    cp.tower_spec = spec_;
    cp.seed = seed;
    cp.lineage = std::move(lineage);
    auto dump = [&](std::vector<nn::Param*> ps) {
        for (nn::Param* p : ps)
            cp.weights[p->name] =
                nn::NamedTensor{p->shape, {p->value.begin(), p->value.end()}};
    };
    dump(tower_.params());
    dump(tower_.buffers());
    return cp;
}

std::vector<float> SiameseModel::embed(const Image& img) const {
    nn::Tensor out = tower_.forward(image_to_input(img), /*train=*/false);
    std::vector<float> e(out.data.begin(), out.data.end());
    for (float v : e)
        if (!std::isfinite(v)) throw InternalError("embedding contains non-finite values");
    return e;
}

std::vector<float> embed(const Tile& tile, const ModelCheckpoint& cp) {
    return SiameseModel::from_checkpoint(cp).embed(tile.pixels);
}

// ---------------------------------------------------------------- training

namespace {

struct TrainContext {
    std::vector<const Image*> img_a, img_b;
    std::vector<int> targets;
};

TrainContext resolve_pairs(const PairDataset& pairs, const DatasetManifest& tiles) {
    std::unordered_map<std::string, const Image*> lookup;
    for (const auto& t : tiles.tiles) lookup[t.id] = &t.pixels;
    TrainContext ctx;
    for (const auto& p : pairs.pairs) {
        auto a = lookup.find(p.tile_a_id);
        auto b = lookup.find(p.tile_b_id);
        if (a == lookup.end())
            throw ValidationError("pair references missing tile: " + p.tile_a_id);
        if (b == lookup.end())
            throw ValidationError("pair references missing tile: " + p.tile_b_id);
        ctx.img_a.push_back(a->second);
        ctx.img_b.push_back(b->second);
        ctx.targets.push_back(p.target);
    }
    return ctx;
}

// Tiles per forward chunk during training. Pairs in a batch usually share
// tiles (heavily so for augmented support sets), so each distinct tile is
// embedded once per phase instead of once per pair slot.
constexpr int kTrainChunk = 16;

std::vector<double> run_training(SiameseModel& model, const TrainContext& ctx,
                                 const TrainingConfig& config, const EpochLogger& log) {
    const int emb = model.spec().embedding_dim;
    nn::Network& tower = model.tower();

    if (config.freeze_backbone) {
        for (nn::Param* p : tower.params())
            if (p->name.rfind("tower.embed", 0) != 0) p->trainable = false;
    }

    nn::Adam opt(config.learning_rate);
    auto params = tower.params();
    const std::size_t n_pairs = ctx.targets.size();
    std::vector<std::size_t> order(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) order[i] = i;

    std::vector<float> ga(emb), gb(emb);
    std::vector<double> curve;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        auto rng = make_rng(config.seed, "epoch:" + std::to_string(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0;
        std::size_t done = 0;
        while (done < n_pairs) {
            const std::size_t take = std::min<std::size_t>(config.batch_size, n_pairs - done);

            // distinct tiles of this batch, in first-appearance order
            std::unordered_map<const Image*, int> index_of;
            std::vector<const Image*> uniques;
            std::vector<std::pair<int, int>> slots;  // pair -> unique indices
            for (std::size_t j = 0; j < take; ++j) {
                std::size_t idx = order[done + j];
                for (const Image* img : {ctx.img_a[idx], ctx.img_b[idx]}) {
                    if (!index_of.count(img)) {
                        index_of[img] = static_cast<int>(uniques.size());
                        uniques.push_back(img);
                    }
                }
                slots.push_back({index_of[ctx.img_a[idx]], index_of[ctx.img_b[idx]]});
            }

            // The dedup path costs two forwards plus one backward per
            // distinct tile; the direct path costs one forward plus one
            // backward per pair slot. Pick whichever is cheaper for this
            // batch (deterministic: depends only on batch composition).
            const bool dedup_wins = 3 * uniques.size() < 2 * (2 * take);
            tower.zero_grad();
            if (dedup_wins) {
                // phase 1: one embedding per distinct tile
                std::vector<std::vector<float>> embeddings(uniques.size());
                auto for_chunks = [&](auto&& fn) {
                    for (std::size_t start = 0; start < uniques.size(); start += kTrainChunk) {
                        int count = static_cast<int>(
                            std::min<std::size_t>(kTrainChunk, uniques.size() - start));
                        nn::Tensor input(count, 3, SiameseModel::kInputSize,
                                         SiameseModel::kInputSize);
                        for (int s = 0; s < count; ++s)
                            fill_input_slot(input, s, *uniques[start + s]);
                        fn(start, count, input);
                    }
                };
                for_chunks([&](std::size_t start, int count, nn::Tensor& input) {
                    nn::Tensor out = tower.forward(input, /*train=*/true);
                    for (int s = 0; s < count; ++s)
                        embeddings[start + s].assign(out.sample(s), out.sample(s) + emb);
                });

                // phase 2: pair losses; embedding gradients accumulate per tile
                std::vector<std::vector<float>> egrads(uniques.size(),
                                                       std::vector<float>(emb, 0.f));
                for (std::size_t j = 0; j < take; ++j) {
                    std::size_t idx = order[done + j];
                    auto [ia, ib] = slots[j];
                    double loss;
                    if (config.loss == LossKind::bce) {
                        loss = pair_loss_grad(embeddings[ia], embeddings[ib], ctx.targets[idx],
                                              ga, gb);
                    } else {
                        loss = contrastive_loss_grad(embeddings[ia], embeddings[ib],
                                                     ctx.targets[idx], config.contrastive_margin,
                                                     ga, gb);
                    }
                    loss_sum += loss;
                    for (int d = 0; d < emb; ++d) {
                        egrads[ia][d] += ga[d];
                        egrads[ib][d] += gb[d];
                    }
                }

                // phase 3: rebuild activations chunk by chunk and backpropagate
                for_chunks([&](std::size_t start, int count, nn::Tensor& input) {
                    tower.forward(input, /*train=*/true);
                    nn::Tensor gy(count, emb, 1, 1);
                    for (int s = 0; s < count; ++s)
                        std::copy(egrads[start + s].begin(), egrads[start + s].end(),
                                  gy.sample(s));
                    tower.backward(gy);
                });
            } else {
                for (std::size_t j = 0; j < take; ++j) {
                    std::size_t idx = order[done + j];
                    nn::Tensor input(2, 3, SiameseModel::kInputSize, SiameseModel::kInputSize);
                    fill_input_slot(input, 0, *ctx.img_a[idx]);
                    fill_input_slot(input, 1, *ctx.img_b[idx]);
                    nn::Tensor out = tower.forward(input, /*train=*/true);
                    std::span<const float> ea(out.sample(0), emb);
                    std::span<const float> eb(out.sample(1), emb);
                    double loss;
                    if (config.loss == LossKind::bce) {
                        loss = pair_loss_grad(ea, eb, ctx.targets[idx], ga, gb);
                    } else {
                        loss = contrastive_loss_grad(ea, eb, ctx.targets[idx],
                                                     config.contrastive_margin, ga, gb);
                    }
                    loss_sum += loss;
                    nn::Tensor gy(2, emb, 1, 1);
                    std::copy(ga.begin(), ga.end(), gy.sample(0));
                    std::copy(gb.begin(), gb.end(), gy.sample(1));
                    tower.backward(gy);
                }
            }
            opt.step(params, static_cast<double>(take));
            done += take;
        }
        double mean_loss = loss_sum / static_cast<double>(n_pairs);
        curve.push_back(mean_loss);
        if (log) log(epoch, mean_loss);
    }

    if (config.freeze_backbone) {
        for (nn::Param* p : tower.params()) p->trainable = true;
    }
    return curve;
}

}  // namespace

std::string dataset_fingerprint(const PairDataset& pairs, const DatasetManifest& tiles) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : pairs.pairs) {
        h = fnv1a64(p.tile_a_id, h);
        h = fnv1a64(p.tile_b_id, h);
        h = fnv1a64(&p.target, sizeof(p.target), h);
    }
    for (const auto& t : tiles.tiles) {
        h = fnv1a64(t.id, h);
        if (!t.pixels.data.empty()) h = fnv1a64(t.pixels.data.data(), t.pixels.data.size(), h);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ModelCheckpoint train_base(const PairDataset& pairs, const DatasetManifest& tiles,
                           const TowerSpec& spec, const TrainingConfig& config,
                           const EpochLogger& log) {
    config.validate();
    if (pairs.pairs.empty()) throw ValidationError("train_base: empty pair dataset");
    TrainContext ctx = resolve_pairs(pairs, tiles);
    SiameseModel model = SiameseModel::build(spec, config.seed);
    auto curve = run_training(model, ctx, config, log);

    LineageEntry entry;
    entry.dataset_fingerprint = dataset_fingerprint(pairs, tiles);
    entry.config = config.to_json();
    entry.epochs = config.epochs;
    entry.loss_curve = std::move(curve);
    return model.to_checkpoint(config.seed, {entry});
}

ModelCheckpoint refine(const ModelCheckpoint& base, const PairDataset& support_pairs,
                       const DatasetManifest& support_tiles, const TrainingConfig& config,
                       const EpochLogger& log) {
    config.validate();
    if (support_pairs.pairs.empty()) throw ValidationError("refine: empty support pairs");
    TrainContext ctx = resolve_pairs(support_pairs, support_tiles);
    SiameseModel model = SiameseModel::from_checkpoint(base);
    auto curve = run_training(model, ctx, config, log);

    LineageEntry entry;
    entry.dataset_fingerprint = dataset_fingerprint(support_pairs, support_tiles);
    entry.config = config.to_json();
    entry.epochs = config.epochs;
    entry.loss_curve = std::move(curve);
    std::vector<LineageEntry> lineage = base.lineage;
    lineage.push_back(std::move(entry));
    return model.to_checkpoint(base.seed, std::move(lineage));
}

// -------------------------------------------------------------- checkpoint

void save_checkpoint(const ModelCheckpoint& cp, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nn::save_safetensors(cp.weights, dir / "model.safetensors");
    json meta;
    meta["tower"] = to_string(cp.tower_spec.kind);
    meta["embedding_dim"] = cp.tower_spec.embedding_dim;
    meta["seed"] = cp.seed;
    json lineage = json::array();
    for (const auto& e : cp.lineage) lineage.push_back(e.to_json());
    meta["lineage"] = std::move(lineage);
    std::ofstream out(dir / "model.json");
    if (!out) throw ValidationError("cannot write checkpoint sidecar in " + dir.string());
    out << meta.dump(2) << "\n";
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "model.json");
    if (!in) throw ValidationError("missing checkpoint sidecar: " + (dir / "model.json").string());
    json meta;
    try {
        in >> meta;
    } catch (const json::exception& e) {
        throw ValidationError("corrupt checkpoint sidecar: " + std::string(e.what()));
    }
    ModelCheckpoint cp;
    cp.tower_spec.kind = tower_from_string(meta.at("tower").get<std::string>());
    cp.tower_spec.embedding_dim = meta.at("embedding_dim").get<int>();
    cp.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& e : meta.at("lineage")) cp.lineage.push_back(LineageEntry::from_json(e));
    cp.weights = nn::load_safetensors(dir / "model.safetensors");
    return cp;
}

}  // namespace sia
