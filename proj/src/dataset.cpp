#include "sia/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sia/errors.hpp"
#include "sia/seeds.hpp"

namespace sia {

using nlohmann::json;

std::string to_string(Role r) {
    switch (r) {
        case Role::base_train: return "base_train";
        case Role::fewshot: return "fewshot";
        case Role::query: return "query";
    }
    throw InternalError("unknown role");
}

Role role_from_string(const std::string& s) {
    if (s == "base_train") return Role::base_train;
    if (s == "fewshot") return Role::fewshot;
    if (s == "query") return Role::query;
    throw ValidationError("unknown role: " + s);
}

std::string to_string(TileSource s) {
    switch (s) {
        case TileSource::uav: return "uav";
        case TileSource::benchmark: return "benchmark";
        case TileSource::synthetic: return "synthetic";
    }
    throw InternalError("unknown tile source");
}

TileSource source_from_string(const std::string& s) {
    if (s == "uav") return TileSource::uav;
    if (s == "benchmark") return TileSource::benchmark;
    if (s == "synthetic") return TileSource::synthetic;
    throw ValidationError("unknown tile source: " + s);
}

const Tile* DatasetManifest::find(const std::string& id) const {
    for (const auto& t : tiles)
        if (t.id == id) return &t;
    return nullptr;
}

std::vector<const Tile*> DatasetManifest::active_tiles(Role role) const {
    std::vector<const Tile*> out;
    for (const auto& t : tiles) {
        if (t.excluded) continue;
        auto it = role_map.find(t.id);
        if (it != role_map.end() && it->second == role) out.push_back(&t);
    }
    return out;
}

std::vector<std::string> DatasetManifest::class_roster(Role role) const {
    std::set<std::string> labels;
    for (const Tile* t : active_tiles(role))
        if (t->label) labels.insert(*t->label);
    return {labels.begin(), labels.end()};
}

std::map<std::string, std::vector<const Tile*>> DatasetManifest::by_class(Role role) const {
    std::map<std::string, std::vector<const Tile*>> out;
    for (const Tile* t : active_tiles(role))
        if (t->label) out[*t->label].push_back(t);
    return out;
}

void DatasetManifest::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& t : tiles) {
        if (t.gsd_cm <= 0) throw ValidationError("tile " + t.id + ": gsd_cm must be positive");
        if (!seen.insert(t.id).second) throw ValidationError("duplicate tile_id: " + t.id);
    }
    for (const auto& [id, role] : role_map) {
        (void)role;
        if (!seen.count(id)) throw ValidationError("role_map references unknown tile_id: " + id);
    }
    for (const auto& t : tiles) {
        if (!role_map.count(t.id))
            throw ValidationError("tile " + t.id + " has no role assignment");
    }
}

DatasetManifest ingest_tiles(const std::filesystem::path& root_path,
                             const std::filesystem::path& manifest_file) {
    std::ifstream in(manifest_file);
    if (!in) throw ValidationError("cannot open manifest file: " + manifest_file.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("manifest " + manifest_file.string() + ": " + e.what());
    }
    if (!doc.contains("tiles") || !doc["tiles"].is_array())
        throw ValidationError("manifest " + manifest_file.string() + ": missing \"tiles\" array");

    DatasetManifest m;
    for (const auto& entry : doc["tiles"]) {
        Tile t;
        t.id = entry.at("id").get<std::string>();
        std::filesystem::path img_path = entry.at("path").get<std::string>();
        if (img_path.is_relative()) img_path = root_path / img_path;
        if (!std::filesystem::exists(img_path))
            throw ValidationError("tile " + t.id + ": image file not found: " + img_path.string());
        t.pixels = load_image(img_path);
        if (entry.contains("label") && !entry["label"].is_null())
            t.label = entry["label"].get<std::string>();
        t.gsd_cm = entry.at("gsd_cm").get<double>();
        if (entry.contains("source")) t.source = source_from_string(entry["source"]);
        if (entry.contains("excluded")) t.excluded = entry["excluded"].get<bool>();
        m.role_map[t.id] = role_from_string(entry.at("role").get<std::string>());
        m.tiles.push_back(std::move(t));
    }
    m.validate();
    return m;
}

Tile normalize_tile(const Tile& tile, double target_gsd_cm, int target_size) {
    if (tile.pixels.empty())
        throw ValidationError("normalize_tile: tile " + tile.id + " has a zero-area raster");
    if (target_gsd_cm <= 0 || target_size <= 0)
        throw ValidationError("normalize_tile: target gsd and size must be positive");

    Tile out = tile;
    double scale = tile.gsd_cm / target_gsd_cm;
    int new_h = static_cast<int>(std::lround(tile.pixels.height * scale));
    int new_w = static_cast<int>(std::lround(tile.pixels.width * scale));
    if (new_h <= 0 || new_w <= 0)
        throw ValidationError("normalize_tile: tile " + tile.id + " resamples to zero area");
    if (new_h != tile.pixels.height || new_w != tile.pixels.width)
        out.pixels = resize_bilinear(tile.pixels, new_h, new_w);
    out.gsd_cm = target_gsd_cm;
    out.pixels = center_crop_or_pad(out.pixels, target_size);
    return out;
}

DatasetManifest normalize_all(const DatasetManifest& manifest, double target_gsd_cm,
                              int target_size) {
    DatasetManifest out;
    out.role_map = manifest.role_map;
    out.tiles.reserve(manifest.tiles.size());
    for (const auto& t : manifest.tiles) out.tiles.push_back(normalize_tile(t, target_gsd_cm, target_size));
    return out;
}

DatasetManifest cap_candidates(const DatasetManifest& manifest, int per_class_cap,
                               std::uint64_t seed) {
    if (per_class_cap < 1) throw ValidationError("cap_candidates: per_class_cap must be >= 1");

    auto classes = manifest.by_class(Role::base_train);
    if (classes.empty()) throw ValidationError("cap_candidates: no active base_train classes");
    for (const auto& [label, tiles] : classes)
        if (tiles.empty()) throw ValidationError("cap_candidates: class " + label + " is empty");

    // One sub-stream per class so a class's selection does not depend on which
    // other classes exist.
    std::unordered_set<std::string> keep;
    for (const auto& [label, tiles] : classes) {
        const std::size_t n = tiles.size();
        const std::size_t cap = std::min<std::size_t>(per_class_cap, n);
        if (cap == n) {
            for (const Tile* t : tiles) keep.insert(t->id);
            continue;
        }
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        auto rng = make_rng(seed, "cap:" + label);
        // Partial Fisher-Yates: the first `cap` slots are a uniform sample
        // without replacement.
        for (std::size_t i = 0; i < cap; ++i) {
            std::uniform_int_distribution<std::size_t> d(i, n - 1);
            std::swap(idx[i], idx[d(rng)]);
        }
        for (std::size_t i = 0; i < cap; ++i) keep.insert(tiles[idx[i]]->id);
    }

    DatasetManifest out;
    for (const auto& t : manifest.tiles) {
        auto it = manifest.role_map.find(t.id);
        if (it == manifest.role_map.end())
            throw ValidationError("cap_candidates: tile " + t.id + " has no role assignment");
        bool is_base = it->second == Role::base_train;
        if (is_base && !t.excluded && t.label && !keep.count(t.id)) continue;
        out.tiles.push_back(t);
        out.role_map[t.id] = it->second;
    }
    return out;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& manifest_file,
                   const std::filesystem::path& image_dir) {
    std::filesystem::create_directories(image_dir);
    json tiles = json::array();
    for (const auto& t : manifest.tiles) {
        std::filesystem::path img = image_dir / (t.id + ".png");
        save_png(t.pixels, img);
        json entry;
        entry["id"] = t.id;
        entry["path"] = std::filesystem::relative(img, manifest_file.parent_path()).generic_string();
        entry["label"] = t.label ? json(*t.label) : json(nullptr);
        entry["gsd_cm"] = t.gsd_cm;
        entry["role"] = to_string(manifest.role_map.at(t.id));
        entry["excluded"] = t.excluded;
        entry["source"] = to_string(t.source);
        tiles.push_back(std::move(entry));
    }
    json doc;
    doc["tiles"] = std::move(tiles);
    std::ofstream out(manifest_file);
    if (!out) throw ValidationError("cannot write manifest: " + manifest_file.string());
    out << doc.dump(2) << "\n";
}

}  // namespace sia
