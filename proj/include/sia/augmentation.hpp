#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sia/dataset.hpp"

namespace sia {

enum class AugOp { rotate, hflip, vflip, rotate_noise, crop };

std::string to_string(AugOp op);

struct AugmentationSpec {
    AugOp op = AugOp::rotate;
    double rotation_deg = 0.0;   // rotate, rotate_noise; uniform in [0,360) when drawn
    double noise_mu = 0.0;       // rotate_noise
    double noise_sigma = 25.0;   // rotate_noise, in 8-bit pixel units
    double crop_fraction = 0.8;  // crop: window side as a fraction of the input side
    std::uint64_t seed = 0;      // drives noise draws and the crop window
};

// Applies one operator to a 128x128 (or any square) raster. The output keeps
// the input size: rotation zero-fills exposed corners, crops are re-centered
// with zero padding, noise is clipped to [0,255].
Image augment_image(const Image& img, const AugmentationSpec& spec);

// Same, preserving id/label/gsd metadata. The caller picks the augmented id.
Tile augment(const Tile& tile, const AugmentationSpec& spec, const std::string& new_id);

// Draws a spec with random parameters for the given operator.
AugmentationSpec draw_spec(AugOp op, std::mt19937_64& rng);

// One operator chosen uniformly from the five, with random parameters.
// Used as the continuity perturbation.
AugmentationSpec draw_random_perturbation(std::mt19937_64& rng);

// The deterministic operator schedule for candidate expansion: the five
// operators in order, then a second independent rotate draw as variant 6.
// Variants beyond 6 cycle over the stochastic operators (rotate, rotate_noise,
// crop) so repeated deterministic flips never duplicate a candidate.
AugOp variant_op(int variant_index);

// Expands every active labeled tile into itself plus variants_per_tile
// augmented tiles (ids "<id>__aug<j>"). Roles and labels are inherited.
DatasetManifest expand_candidates(const DatasetManifest& capped, int variants_per_tile,
                                  std::uint64_t seed);

}  // namespace sia
