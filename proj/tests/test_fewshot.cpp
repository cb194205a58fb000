#include "sia/fewshot.hpp"

#include <set>

#include "doctest.h"
#include "sia/errors.hpp"
#include "sia/synthetic.hpp"
#include "test_util.hpp"

using namespace sia;

namespace {

DatasetManifest textured_fewshot_manifest(const std::vector<std::pair<std::string, int>>& classes,
                                          std::uint64_t seed) {
    DatasetManifest m;
    for (const auto& [name, count] : classes) {
        for (int i = 0; i < count; ++i) {
            Tile t = test::make_tile(name + "_" + std::to_string(i),
                                     render_texture(pattern_from_string(name), 128, 6.0,
                                                    seed + i),
                                     name);
            m.role_map[t.id] = Role::fewshot;
            m.tiles.push_back(std::move(t));
        }
    }
    return m;
}

}  // namespace

TEST_CASE("fold plan over the six-species pool shape") {
    // class sizes 6/14/30/16/10/6 with the default pool cap of 6
    auto m = test::id_only_manifest(
        {{"s6", 6}, {"s7", 14}, {"s8", 30}, {"s9", 16}, {"s10", 10}, {"s11", 6}}, Role::fewshot);
    auto plan = build_fold_plan(m, 3, 4, 17);
    REQUIRE(plan.folds.size() == 4);
    for (const auto& fold : plan.folds) {
        CHECK(fold.support.shots_k == 3);
        REQUIRE(fold.support.members.size() == 6);
        for (const auto& [label, ids] : fold.support.members) {
            (void)label;
            CHECK(ids.size() == 3);
        }
        // capped pools of 6 leave 3 test tiles per class
        CHECK(fold.test_ids.size() == 6 * 3);
        const auto sup_ids = fold.support.all_ids();
        std::set<std::string> support(sup_ids.begin(), sup_ids.end());
        for (const auto& id : fold.test_ids) CHECK(!support.count(id));
    }
}

TEST_CASE("minimal alternation: a two-tile class swaps support across folds") {
    auto m = test::id_only_manifest({{"a", 2}, {"b", 2}}, Role::fewshot);
    auto plan = build_fold_plan(m, 1, 2, 5);
    const auto& f0 = plan.folds[0].support.members.at("a");
    const auto& f1 = plan.folds[1].support.members.at("a");
    REQUIRE(f0.size() == 1);
    REQUIRE(f1.size() == 1);
    CHECK(f0[0] != f1[0]);
    // and each fold's test tile is the other one
    for (const auto& fold : plan.folds) {
        const auto sup_ids = fold.support.all_ids();
        std::set<std::string> support(sup_ids.begin(), sup_ids.end());
        CHECK(fold.test_ids.size() == 2);
        for (const auto& id : fold.test_ids) CHECK(!support.count(id));
    }
}

TEST_CASE("support selections alternate while unused subsets remain") {
    auto m = test::id_only_manifest({{"a", 6}, {"b", 6}}, Role::fewshot);
    auto plan = build_fold_plan(m, 3, 4, 23);
    std::set<std::vector<std::string>> seen;
    for (const auto& fold : plan.folds) seen.insert(fold.support.members.at("a"));
    CHECK(seen.size() == 4);  // C(6,3)=20 >= 4, so all distinct
}

TEST_CASE("fold plan is deterministic per seed") {
    auto m = test::id_only_manifest({{"a", 6}, {"b", 8}}, Role::fewshot);
    auto p1 = build_fold_plan(m, 2, 3, 77);
    auto p2 = build_fold_plan(m, 2, 3, 77);
    REQUIRE(p1.folds.size() == p2.folds.size());
    for (std::size_t f = 0; f < p1.folds.size(); ++f) {
        CHECK(p1.folds[f].support.members == p2.folds[f].support.members);
        CHECK(p1.folds[f].test_ids == p2.folds[f].test_ids);
    }
    auto p3 = build_fold_plan(m, 2, 3, 78);
    bool differ = false;
    for (std::size_t f = 0; f < p1.folds.size(); ++f)
        if (p1.folds[f].support.members != p3.folds[f].support.members) differ = true;
    CHECK(differ);
}

TEST_CASE("fold plan rejects bad k and starved classes") {
    auto m = test::id_only_manifest({{"a", 6}}, Role::fewshot);
    CHECK_THROWS_AS(build_fold_plan(m, 0, 2, 1), ValidationError);
    CHECK_THROWS_AS(build_fold_plan(m, 4, 2, 1), ValidationError);
    CHECK(build_fold_plan(m, 4, 2, 1, 6, 5).folds.size() == 2);  // configurable upper bound

    auto starved = test::id_only_manifest({{"a", 6}, {"tiny", 2}}, Role::fewshot);
    CHECK_THROWS_WITH_AS(build_fold_plan(starved, 2, 2, 1), doctest::Contains("tiny"),
                         ValidationError);
}

TEST_CASE("pool cap limits each class before planning") {
    auto m = test::id_only_manifest({{"a", 14}, {"b", 30}}, Role::fewshot);
    auto plan = build_fold_plan(m, 3, 2, 9, 6);
    for (const auto& fold : plan.folds)
        CHECK(fold.test_ids.size() == 2 * (6 - 3));  // pools capped to 6
}

TEST_CASE("support refinement pair counts match the combinatorics") {
    // 6 classes x k=3 -> 21 candidates per class after 7x expansion
    auto m = textured_fewshot_manifest({{"blob", 3}, {"stripe", 3}, {"ring", 3},
                                        {"speckle", 3}, {"checker", 3}, {"dots", 3}},
                                       300);
    SupportSet support;
    support.shots_k = 3;
    for (const auto& [label, tiles] : m.by_class(Role::fewshot)) {
        for (const Tile* t : tiles) support.members[label].push_back(t->id);
    }
    auto data = support_refinement_pairs(support, m, 11);
    // per class C(21,2)=210 similar -> 1260; cross 15*21*21 = 6615; balanced
    CHECK(data.pairs.enumerated_similar == 1260);
    CHECK(data.pairs.enumerated_dissimilar == 6615);
    CHECK(data.pairs.n_similar == 1260);
    CHECK(data.pairs.n_dissimilar == 1260);
    CHECK(data.tiles.tiles.size() == 6 * 3 * 7);
}

TEST_CASE("two one-shot classes balance to 42 pairs per side") {
    auto m = textured_fewshot_manifest({{"blob", 1}, {"stripe", 1}}, 310);
    SupportSet support;
    support.shots_k = 1;
    support.members["blob"] = {"blob_0"};
    support.members["stripe"] = {"stripe_0"};
    auto data = support_refinement_pairs(support, m, 12);
    CHECK(data.pairs.enumerated_similar == 2 * 21);  // C(7,2) per class
    CHECK(data.pairs.enumerated_dissimilar == 49);   // 7*7
    CHECK(data.pairs.n_similar == 42);
    CHECK(data.pairs.n_dissimilar == 42);
}

TEST_CASE("refinement pairs are deterministic under a fixed seed") {
    auto m = textured_fewshot_manifest({{"blob", 2}, {"stripe", 2}}, 320);
    SupportSet support;
    support.shots_k = 2;
    support.members["blob"] = {"blob_0", "blob_1"};
    support.members["stripe"] = {"stripe_0", "stripe_1"};
    auto d1 = support_refinement_pairs(support, m, 13);
    auto d2 = support_refinement_pairs(support, m, 13);
    CHECK(d1.pairs.pairs == d2.pairs.pairs);
    REQUIRE(d1.tiles.tiles.size() == d2.tiles.tiles.size());
    for (std::size_t i = 0; i < d1.tiles.tiles.size(); ++i)
        CHECK(d1.tiles.tiles[i].pixels == d2.tiles.tiles[i].pixels);
}

TEST_CASE("a single-class support set is a protocol error") {
    auto m = textured_fewshot_manifest({{"blob", 2}}, 330);
    SupportSet support;
    support.shots_k = 1;
    support.members["blob"] = {"blob_0"};
    CHECK_THROWS_AS(support_refinement_pairs(support, m, 1), ValidationError);
}

TEST_CASE("single-fold sweep aggregates equal the fold value with zero std") {
    auto m = textured_fewshot_manifest({{"stripe", 3}, {"checker", 3}}, 340);
    auto plan = build_fold_plan(m, 1, 1, 55);

    TrainingConfig base_cfg;
    base_cfg.epochs = 1;
    base_cfg.batch_size = 8;
    base_cfg.seed = 1;
    ModelCheckpoint base =
        SiameseModel::build({TowerKind::shallow_cnn, 32}, 1).to_checkpoint(1, {});

    SweepConfig cfg;
    cfg.refine_config.epochs = 1;
    cfg.refine_config.batch_size = 16;
    cfg.refine_config.learning_rate = 1e-4;
    cfg.refine_pairs_per_side = 8;
    auto result = run_sweep(base, plan, m, cfg);

    REQUIRE(result.zero_shot.per_fold.size() == 1);
    REQUIRE(result.refined.per_fold.size() == 1);
    CHECK(result.zero_shot.mean.f1 ==
          doctest::Approx(result.zero_shot.per_fold[0].macro.f1));
    CHECK(result.zero_shot.stddev.f1 == 0.0);
    CHECK(result.refined.stddev.accuracy == 0.0);
    CHECK(result.k == 1);

    // mean equals an independent recompute over fold records
    double mean = 0;
    for (const auto& rep : result.refined.per_fold) mean += rep.macro.f1;
    mean /= static_cast<double>(result.refined.per_fold.size());
    CHECK(result.refined.mean.f1 == doctest::Approx(mean));

    auto j = result.to_json();
    CHECK(j.at("arms").at("zero_shot").at("per_fold").size() == 1);
    CHECK(j.at("k") == 1);
}
