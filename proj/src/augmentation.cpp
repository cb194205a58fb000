#include "sia/augmentation.hpp"

#include <algorithm>
#include <cmath>

#include "sia/errors.hpp"
#include "sia/seeds.hpp"

namespace sia {

std::string to_string(AugOp op) {
    switch (op) {
        case AugOp::rotate: return "rotate";
        case AugOp::hflip: return "hflip";
        case AugOp::vflip: return "vflip";
        case AugOp::rotate_noise: return "rotate_noise";
        case AugOp::crop: return "crop";
    }
    throw InternalError("unknown augmentation op");
}

namespace {

Image add_gaussian_noise(const Image& img, double mu, double sigma, std::mt19937_64& rng) {
    Image out = img;
    // Identical (mu, sigma) on all three channels, independent draw per pixel
    // and channel.
    std::normal_distribution<double> noise(mu, sigma);
    for (auto& v : out.data) {
        double x = static_cast<double>(v) + noise(rng);
        v = static_cast<std::uint8_t>(std::clamp(x, 0.0, 255.0));
    }
    return out;
}

Image random_crop_recentered(const Image& img, double fraction, std::mt19937_64& rng) {
    int side = std::min(img.height, img.width);
    int crop = std::max(1, static_cast<int>(std::lround(side * fraction)));
    std::uniform_int_distribution<int> dy(0, img.height - crop);
    std::uniform_int_distribution<int> dx(0, img.width - crop);
    int y0 = dy(rng);
    int x0 = dx(rng);
    Image window(crop, crop);
    for (int y = 0; y < crop; ++y)
        for (int x = 0; x < crop; ++x)
            for (int c = 0; c < 3; ++c) window.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    // Re-centered with zero padding, not rescaled, so the GSD is preserved.
    return center_crop_or_pad(window, std::max(img.height, img.width));
}

}  // namespace

Image augment_image(const Image& img, const AugmentationSpec& spec) {
    if (img.empty()) throw ValidationError("augment: empty input image");
    switch (spec.op) {
        case AugOp::rotate:
            return rotate_bilinear(img, spec.rotation_deg);
        case AugOp::hflip:
            return hflip(img);
        case AugOp::vflip:
            return vflip(img);
        case AugOp::rotate_noise: {
            std::mt19937_64 rng(spec.seed);
            return add_gaussian_noise(rotate_bilinear(img, spec.rotation_deg), spec.noise_mu,
                                      spec.noise_sigma, rng);
        }
        case AugOp::crop: {
            if (spec.crop_fraction <= 0.0 || spec.crop_fraction > 1.0)
                throw ValidationError("augment: crop_fraction must be in (0, 1]");
            std::mt19937_64 rng(spec.seed);
            return random_crop_recentered(img, spec.crop_fraction, rng);
        }
    }
    throw InternalError("unknown augmentation op");
}

Tile augment(const Tile& tile, const AugmentationSpec& spec, const std::string& new_id) {
    Tile out = tile;
    out.id = new_id;
    out.pixels = augment_image(tile.pixels, spec);
    return out;
}

AugmentationSpec draw_spec(AugOp op, std::mt19937_64& rng) {
    AugmentationSpec spec;
    spec.op = op;
    std::uniform_real_distribution<double> angle(0.0, 360.0);
    switch (op) {
        case AugOp::rotate:
            spec.rotation_deg = angle(rng);
            break;
        case AugOp::rotate_noise:
            spec.rotation_deg = angle(rng);
            spec.seed = rng();
            break;
        case AugOp::crop:
            spec.seed = rng();
            break;
        case AugOp::hflip:
        case AugOp::vflip:
            break;
    }
    return spec;
}

AugmentationSpec draw_random_perturbation(std::mt19937_64& rng) {
    static constexpr AugOp kOps[5] = {AugOp::rotate, AugOp::hflip, AugOp::vflip,
                                      AugOp::rotate_noise, AugOp::crop};
    std::uniform_int_distribution<int> pick(0, 4);
    return draw_spec(kOps[pick(rng)], rng);
}

AugOp variant_op(int variant_index) {
    static constexpr AugOp kSchedule[6] = {AugOp::rotate,       AugOp::hflip, AugOp::vflip,
                                           AugOp::rotate_noise, AugOp::crop,  AugOp::rotate};
    if (variant_index < 6) return kSchedule[variant_index];
    static constexpr AugOp kStochastic[3] = {AugOp::rotate, AugOp::rotate_noise, AugOp::crop};
    return kStochastic[(variant_index - 6) % 3];
}

DatasetManifest expand_candidates(const DatasetManifest& capped, int variants_per_tile,
                                  std::uint64_t seed) {
    if (variants_per_tile < 0)
        throw ValidationError("expand_candidates: variants_per_tile must be >= 0");
    DatasetManifest out;
    for (const auto& t : capped.tiles) {
        Role role = capped.role_map.at(t.id);
        out.tiles.push_back(t);
        out.role_map[t.id] = role;
        if (t.excluded || !t.label) continue;
        auto rng = make_rng(seed, "expand:" + t.id);
        for (int j = 0; j < variants_per_tile; ++j) {
            AugmentationSpec spec = draw_spec(variant_op(j), rng);
            std::string aug_id = t.id + "__aug" + std::to_string(j);
            out.tiles.push_back(augment(t, spec, aug_id));
            out.role_map[aug_id] = role;
        }
    }
    return out;
}

}  // namespace sia
