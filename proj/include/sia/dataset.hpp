#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sia/image.hpp"

namespace sia {

enum class Role { base_train, fewshot, query };
enum class TileSource { uav, benchmark, synthetic };

std::string to_string(Role r);
Role role_from_string(const std::string& s);
std::string to_string(TileSource s);
TileSource source_from_string(const std::string& s);

// One canopy cutout. Value type; normalization and augmentation return copies.
struct Tile {
    std::string id;
    Image pixels;
    std::optional<std::string> label;  // absent for query-only tiles
    double gsd_cm = 0.0;               // ground sample distance, cm/pixel
    TileSource source = TileSource::uav;
    bool excluded = false;
};

// Ordered tile list plus a role per tile id. Immutable by convention: all
// operations below return new manifests.
struct DatasetManifest {
    std::vector<Tile> tiles;
    std::map<std::string, Role> role_map;

    const Tile* find(const std::string& id) const;
    // Active = not excluded. Downstream pairing and support sets only ever
    // see active tiles.
    std::vector<const Tile*> active_tiles(Role role) const;
    // Distinct labels among active tiles of the role, sorted.
    std::vector<std::string> class_roster(Role role) const;
    // label -> active tiles of that label and role, label-sorted.
    std::map<std::string, std::vector<const Tile*>> by_class(Role role) const;

    void validate() const;  // unique ids, role_map keys exist
};

// Loads every tile listed in a manifest JSON file. Relative image paths are
// resolved against root_path (callers normally pass the manifest directory).
DatasetManifest ingest_tiles(const std::filesystem::path& root_path,
                             const std::filesystem::path& manifest_file);
inline DatasetManifest ingest_tiles(const std::filesystem::path& manifest_file) {
    return ingest_tiles(manifest_file.parent_path(), manifest_file);
}

// Resamples to target_gsd_cm (bilinear), then center-crops or zero-pads to
// target_size x target_size. Identity when already conforming, byte-for-byte.
Tile normalize_tile(const Tile& tile, double target_gsd_cm, int target_size);
DatasetManifest normalize_all(const DatasetManifest& manifest, double target_gsd_cm,
                              int target_size);

// Keeps at most per_class_cap tiles in each base_train class, selected by
// seeded uniform sampling without replacement. Tiles of other roles pass
// through untouched.
DatasetManifest cap_candidates(const DatasetManifest& manifest, int per_class_cap,
                               std::uint64_t seed);

// Writes image files into image_dir (PNG, named <id>.png) and a manifest JSON
// next to them with paths relative to the manifest file.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& manifest_file,
                   const std::filesystem::path& image_dir);

}  // namespace sia
