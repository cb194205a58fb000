#include "sia/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sia/errors.hpp"
#include "sia/seeds.hpp"

namespace sia {

namespace {

constexpr double kPi = std::numbers::pi;

// Deterministic lattice hash -> [0,1), for value noise.
double cell_hash(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
    std::uint64_t h = seed;
    h ^= static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h ^= static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4full;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    h ^= h >> 31;
    return static_cast<double>(h >> 11) / static_cast<double>(1ull << 53);
}

double smooth(double t) { return t * t * (3 - 2 * t); }

// Bilinear value noise over a cell grid of physical size cell_cm.
double value_noise(double u, double v, double cell_cm, std::uint64_t seed) {
    double gu = u / cell_cm, gv = v / cell_cm;
    auto iu = static_cast<std::int64_t>(std::floor(gu));
    auto iv = static_cast<std::int64_t>(std::floor(gv));
    double fu = smooth(gu - std::floor(gu));
    double fv = smooth(gv - std::floor(gv));
    double a = cell_hash(iu, iv, seed), b = cell_hash(iu + 1, iv, seed);
    double c = cell_hash(iu, iv + 1, seed), d = cell_hash(iu + 1, iv + 1, seed);
    return (a * (1 - fu) + b * fu) * (1 - fv) + (c * (1 - fu) + d * fu) * fv;
}

struct TileParams {
    double theta = 0;       // orientation
    double phase_u = 0;     // physical offsets, cm
    double phase_v = 0;
    double scale = 1;       // per-sample wavelength jitter
    std::uint64_t noise_seed = 0;
    double color_jitter[3] = {0, 0, 0};
};

// Bright discs of the given radius on a square lattice.
double disc_lattice(double u, double v, double cell, double radius) {
    double cu = u - cell * std::round(u / cell);
    double cv = v - cell * std::round(v / cell);
    double d = std::hypot(cu, cv);
    return std::clamp((radius - d) / 6.0 + 0.5, 0.0, 1.0);
}

// Pattern intensity in [0,1] at physical position (u,v) cm.
double pattern_value(TexturePattern p, double u, double v, const TileParams& t) {
    // Rotate and shift into the tile's own frame.
    double ru = std::cos(t.theta) * u - std::sin(t.theta) * v + t.phase_u;
    double rv = std::sin(t.theta) * u + std::cos(t.theta) * v + t.phase_v;
    switch (p) {
        case TexturePattern::blob: {
            // Large soft blobs: low-frequency value noise, softly thresholded.
            double n = value_noise(ru, rv, 180.0 * t.scale, t.noise_seed);
            return std::clamp((n - 0.45) * 4.0 + 0.5, 0.0, 1.0);
        }
        case TexturePattern::stripe: {
            // hard-edged bands: the crisp profile separates stripes from the
            // smooth ring gradient at any scale or curvature
            double lambda = 96.0 * t.scale;
            return std::sin(2 * kPi * ru / lambda) > 0 ? 1.0 : 0.0;
        }
        case TexturePattern::ring: {
            // center stays near the tile so the curvature is visible and the
            // pattern never degenerates into a straight grating
            double cu = std::fmod(t.phase_u, 250.0) - 125.0;
            double cv = std::fmod(t.phase_v, 250.0) - 125.0;
            double r = std::hypot(u - cu, v - cv);
            double lambda = 110.0 * t.scale;
            return 0.5 + 0.5 * std::sin(2 * kPi * r / lambda);
        }
        case TexturePattern::speckle: {
            // High-frequency binary-ish noise.
            double n = value_noise(ru, rv, 14.0 * t.scale, t.noise_seed);
            return n > 0.55 ? 1.0 : 0.0;
        }
        case TexturePattern::checker: {
            double cell = 80.0 * t.scale;
            double s = std::sin(2 * kPi * ru / cell) * std::sin(2 * kPi * rv / cell);
            return s > 0 ? 1.0 : 0.0;
        }
        case TexturePattern::dots_fine:
            return disc_lattice(ru, rv, 76.0 * t.scale, 20.0 * t.scale);
        case TexturePattern::dots:
            return disc_lattice(ru, rv, 90.0 * t.scale, 24.0 * t.scale);
        case TexturePattern::dots_coarse:
            return disc_lattice(ru, rv, 107.0 * t.scale, 29.0 * t.scale);
        case TexturePattern::plaid: {
            double lambda = 72.0 * t.scale;
            return 0.25 * (2.0 + std::sin(2 * kPi * ru / lambda) + std::sin(2 * kPi * rv / lambda));
        }
        case TexturePattern::grid: {
            // Thin bright lines on a ~90 cm lattice, ~12 cm wide.
            double cell = 90.0 * t.scale;
            double du = std::abs(ru - cell * std::round(ru / cell));
            double dv = std::abs(rv - cell * std::round(rv / cell));
            double d = std::min(du, dv);
            return std::clamp((12.0 * t.scale - d) / 4.0 + 0.5, 0.0, 1.0);
        }
    }
    throw InternalError("unknown texture pattern");
}

}  // namespace

TexturePattern pattern_from_string(const std::string& s) {
    if (s == "blob") return TexturePattern::blob;
    if (s == "stripe") return TexturePattern::stripe;
    if (s == "ring") return TexturePattern::ring;
    if (s == "speckle") return TexturePattern::speckle;
    if (s == "checker") return TexturePattern::checker;
    if (s == "dots_fine") return TexturePattern::dots_fine;
    if (s == "dots") return TexturePattern::dots;
    if (s == "dots_coarse") return TexturePattern::dots_coarse;
    if (s == "plaid") return TexturePattern::plaid;
    if (s == "grid") return TexturePattern::grid;
    throw ValidationError("unknown texture pattern: " + s);
}

std::string to_string(TexturePattern p) {
    switch (p) {
        case TexturePattern::blob: return "blob";
        case TexturePattern::stripe: return "stripe";
        case TexturePattern::ring: return "ring";
        case TexturePattern::speckle: return "speckle";
        case TexturePattern::checker: return "checker";
        case TexturePattern::dots_fine: return "dots_fine";
        case TexturePattern::dots: return "dots";
        case TexturePattern::dots_coarse: return "dots_coarse";
        case TexturePattern::plaid: return "plaid";
        case TexturePattern::grid: return "grid";
    }
    throw InternalError("unknown texture pattern");
}

Image render_texture(TexturePattern pattern, int size_px, double gsd_cm, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    TileParams t;
    t.theta = unit(rng) * 2 * kPi;
    t.phase_u = unit(rng) * 1000.0;
    t.phase_v = unit(rng) * 1000.0;
    // The five base families vary widely in scale within each class, which
    // drives the trained embedding towards scale invariance. The dot-lattice
    // variants keep a tight scale so that spacing/radius IS their identity:
    // separating them needs the refinement step.
    bool dot_family = pattern == TexturePattern::dots_fine || pattern == TexturePattern::dots ||
                      pattern == TexturePattern::dots_coarse;
    t.scale = dot_family ? 0.93 + 0.14 * unit(rng) : 0.7 + 0.75 * unit(rng);
    t.noise_seed = rng();
    for (double& c : t.color_jitter) c = (unit(rng) - 0.5) * 30.0;

    // Shared foliage-like palette: pattern separates classes, not color.
    const double lo[3] = {34, 62, 30};
    const double hi[3] = {96, 158, 74};
    std::normal_distribution<double> pixel_noise(0.0, 5.0);

    Image img(size_px, size_px);
    for (int y = 0; y < size_px; ++y) {
        for (int x = 0; x < size_px; ++x) {
            double u = (x - size_px / 2.0) * gsd_cm;
            double v = (y - size_px / 2.0) * gsd_cm;
            double f = pattern_value(pattern, u, v, t);
            for (int c = 0; c < 3; ++c) {
                double val = lo[c] + (hi[c] - lo[c]) * f + t.color_jitter[c] + pixel_noise(rng);
                img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(val, 0.0, 255.0));
            }
        }
    }
    return img;
}

DatasetManifest generate_synthetic_manifest(const SyntheticSpec& spec) {
    DatasetManifest m;
    auto add_class = [&](const std::string& name, int count, Role role) {
        TexturePattern pattern = pattern_from_string(name);
        const char* role_tag = role == Role::query ? "query:" : "";
        for (int i = 0; i < count; ++i) {
            std::uint64_t tile_seed =
                derive_seed(spec.seed, role_tag + name + ":" + std::to_string(i));
            int size_px = 128;
            double gsd = spec.gsd_cm;
            if (spec.size_jitter) {
                // Cycle a few raw geometries so prepare has real work to do.
                switch (i % 4) {
                    case 0: break;                                   // already conforming
                    case 1: size_px = 150; break;                    // center crop
                    case 2: size_px = 104; break;                    // zero pad
                    case 3: size_px = 256; gsd = spec.gsd_cm / 2; break;  // resample
                }
            }
            Tile t;
            t.id = (role == Role::query ? name + "_q" : name + "_") + std::to_string(i);
            t.pixels = render_texture(pattern, size_px, gsd, tile_seed);
            t.label = name;
            t.gsd_cm = gsd;
            t.source = TileSource::synthetic;
            m.role_map[t.id] = role;
            m.tiles.push_back(std::move(t));
        }
    };
    for (const auto& name : spec.base_classes)
        add_class(name, spec.tiles_per_base_class, Role::base_train);
    for (const auto& name : spec.fewshot_classes) {
        add_class(name, spec.tiles_per_fewshot_class, Role::fewshot);
        add_class(name, spec.query_tiles_per_fewshot_class, Role::query);
    }
    m.validate();
    return m;
}

void write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
    DatasetManifest m = generate_synthetic_manifest(spec);
    std::filesystem::create_directories(out_dir);
    save_manifest(m, out_dir / "manifest.json", out_dir / "tiles");
}

}  // namespace sia
