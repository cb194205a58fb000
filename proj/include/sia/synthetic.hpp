#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sia/dataset.hpp"

namespace sia {

// Procedural texture families. Pattern scale parameters live in physical
// units (cm), so a tile rendered at a finer GSD resamples consistently.
// The three dot-lattice variants differ only in disc radius and spacing;
// they exist to be mutually confusable for a model trained on the other
// families until it is refined on a few examples.
enum class TexturePattern {
    blob,
    stripe,
    ring,
    speckle,
    checker,
    dots_fine,
    dots,
    dots_coarse,
    plaid,
    grid
};

TexturePattern pattern_from_string(const std::string& s);
std::string to_string(TexturePattern p);

Image render_texture(TexturePattern pattern, int size_px, double gsd_cm, std::uint64_t seed);

struct SyntheticSpec {
    // Base classes default to the five distinct families; the few-shot
    // classes are three structurally close cellular families the base model
    // never sees.
    std::vector<std::string> base_classes = {"blob", "stripe", "ring", "speckle", "checker"};
    int tiles_per_base_class = 13;
    std::vector<std::string> fewshot_classes = {"dots_fine", "dots", "dots_coarse"};
    int tiles_per_fewshot_class = 6;
    // Extra labeled tiles with the query role, for the classify/explain
    // commands; the sweep itself splits the few-shot pool internally.
    int query_tiles_per_fewshot_class = 3;
    double gsd_cm = 6.0;
    std::uint64_t seed = 42;
    // When set, a fraction of tiles render at other sizes or a finer GSD so
    // ingestion exercises padding, cropping and resampling.
    bool size_jitter = true;
};

// In-memory dataset of raw (not yet normalized) tiles.
DatasetManifest generate_synthetic_manifest(const SyntheticSpec& spec);

// PNG files plus manifest.json under out_dir.
void write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace sia
