#include "sia/augmentation.hpp"

#include <cmath>

#include "doctest.h"
#include "sia/errors.hpp"
#include "test_util.hpp"

using namespace sia;

TEST_CASE("hflip and vflip are involutions, pixel-exact") {
    for (int trial = 0; trial < 4; ++trial) {
        Image img = test::random_image(128, 128, 100 + trial);
        CHECK(hflip(hflip(img)) == img);
        CHECK(vflip(vflip(img)) == img);
    }
}

TEST_CASE("rotation by zero degrees is the identity") {
    Image img = test::random_image(128, 128, 11);
    AugmentationSpec spec;
    spec.op = AugOp::rotate;
    spec.rotation_deg = 0.0;
    CHECK(augment_image(img, spec) == img);
}

TEST_CASE("rotation keeps size and zero-fills exposed corners") {
    Image img = test::constant_image(128, 128, 255);
    AugmentationSpec spec;
    spec.op = AugOp::rotate;
    spec.rotation_deg = 45.0;
    Image out = augment_image(img, spec);
    REQUIRE(out.height == 128);
    REQUIRE(out.width == 128);
    CHECK(out.at(0, 0, 0) == 0);      // corner rotated out of frame
    CHECK(out.at(64, 64, 0) == 255);  // center untouched
}

TEST_CASE("gaussian noise matches its declared moments") {
    // sigma=25 on a constant-128 tile; rotation pinned to 0 so the zero-filled
    // corners do not pollute the statistics.
    Image img = test::constant_image(128, 128, 128);
    AugmentationSpec spec;
    spec.op = AugOp::rotate_noise;
    spec.rotation_deg = 0.0;
    spec.noise_mu = 0.0;
    spec.noise_sigma = 25.0;
    spec.seed = 1234;
    Image out = augment_image(img, spec);

    double sum = 0, sq = 0;
    const double n = static_cast<double>(out.data.size());
    for (auto v : out.data) {
        sum += v;
        sq += static_cast<double>(v) * v;
    }
    double mean = sum / n;
    double std = std::sqrt(sq / n - mean * mean);
    CHECK(mean == doctest::Approx(128.0).epsilon(1.0 / 128.0));
    CHECK(std > 23.0);
    CHECK(std < 27.0);
}

TEST_CASE("noise is clipped to the byte range") {
    Image img = test::constant_image(32, 32, 250);
    AugmentationSpec spec;
    spec.op = AugOp::rotate_noise;
    spec.rotation_deg = 0.0;
    spec.noise_sigma = 60.0;
    spec.seed = 5;
    Image out = augment_image(img, spec);  // would overflow without the clip
    for (auto v : out.data) CHECK(v <= 255);
}

TEST_CASE("crop keeps the frame size and re-centers with a zero border") {
    Image img = test::constant_image(128, 128, 255);
    AugmentationSpec spec;
    spec.op = AugOp::crop;
    spec.crop_fraction = 0.8;
    spec.seed = 77;
    Image out = augment_image(img, spec);
    REQUIRE(out.height == 128);
    REQUIRE(out.width == 128);
    // round(128*0.8)=102 content pixels, so a 13-px zero border at minimum.
    CHECK(out.at(0, 0, 0) == 0);
    CHECK(out.at(6, 64, 0) == 0);
    CHECK(out.at(64, 64, 0) == 255);
    int nonzero = 0;
    for (int y = 0; y < 128; ++y)
        if (out.at(y, 64, 0) != 0) ++nonzero;
    CHECK(nonzero == 102);
}

TEST_CASE("invalid crop fraction is rejected") {
    Image img = test::constant_image(16, 16, 9);
    AugmentationSpec spec;
    spec.op = AugOp::crop;
    spec.crop_fraction = 0.0;
    CHECK_THROWS_AS(augment_image(img, spec), ValidationError);
    spec.crop_fraction = 1.5;
    CHECK_THROWS_AS(augment_image(img, spec), ValidationError);
}

TEST_CASE("expansion yields 1 + variants candidates per tile") {
    DatasetManifest m;
    for (int i = 0; i < 13; ++i) {
        Tile t = test::make_tile("t" + std::to_string(i), test::random_image(128, 128, i), "a");
        m.role_map[t.id] = Role::base_train;
        m.tiles.push_back(std::move(t));
    }
    auto expanded = expand_candidates(m, 6, 42);
    CHECK(expanded.tiles.size() == 91);  // 13 * (1 + 6)
    CHECK(expanded.by_class(Role::base_train).at("a").size() == 91);

    auto same = expand_candidates(m, 0, 42);
    CHECK(same.tiles.size() == 13);
}

TEST_CASE("expansion is deterministic for a fixed seed") {
    DatasetManifest m;
    Tile t = test::make_tile("t0", test::random_image(128, 128, 3), "a");
    m.role_map[t.id] = Role::base_train;
    m.tiles.push_back(std::move(t));

    auto a = expand_candidates(m, 6, 7);
    auto b = expand_candidates(m, 6, 7);
    REQUIRE(a.tiles.size() == b.tiles.size());
    for (std::size_t i = 0; i < a.tiles.size(); ++i) {
        CHECK(a.tiles[i].id == b.tiles[i].id);
        CHECK(a.tiles[i].pixels == b.tiles[i].pixels);
    }
    auto c = expand_candidates(m, 6, 8);
    bool any_differ = false;
    for (std::size_t i = 0; i < a.tiles.size(); ++i)
        if (!(a.tiles[i].pixels == c.tiles[i].pixels)) any_differ = true;
    CHECK(any_differ);
}

TEST_CASE("augmented tiles inherit label, gsd and role") {
    DatasetManifest m;
    Tile t = test::make_tile("t0", test::random_image(128, 128, 3), "mylabel", 6.0);
    m.role_map[t.id] = Role::fewshot;
    m.tiles.push_back(std::move(t));
    auto expanded = expand_candidates(m, 6, 1);
    for (const auto& tile : expanded.tiles) {
        CHECK(tile.label.value() == "mylabel");
        CHECK(tile.gsd_cm == 6.0);
        CHECK(expanded.role_map.at(tile.id) == Role::fewshot);
    }
}

TEST_CASE("variant schedule uses the five operators plus a second rotate") {
    CHECK(variant_op(0) == AugOp::rotate);
    CHECK(variant_op(1) == AugOp::hflip);
    CHECK(variant_op(2) == AugOp::vflip);
    CHECK(variant_op(3) == AugOp::rotate_noise);
    CHECK(variant_op(4) == AugOp::crop);
    CHECK(variant_op(5) == AugOp::rotate);
    // beyond six: stochastic ops only, so no duplicate deterministic flips
    for (int j = 6; j < 12; ++j) {
        AugOp op = variant_op(j);
        CHECK(op != AugOp::hflip);
        CHECK(op != AugOp::vflip);
    }
}
