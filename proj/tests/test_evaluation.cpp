#include "dms/error.hpp"
#include "dms/evaluation.hpp"
#include "dms/scenario.hpp"
#include "id_oracle.hpp"
#include "dms/text.hpp"
#include "test_util.hpp"

#include <algorithm>

#include <doctest.h>

using namespace dms;

TEST_CASE("confusion matrix") {
    const auto diag = confusion({{0, 0}, {1, 1}, {2, 2}, {1, 1}}, 3);
    CHECK(diag.at(1, 1) == 2);
    CHECK(diag.at(0, 1) == 0);
    CHECK(diag.total() == 4);
    CHECK(accuracy(diag) == 1.0);

    const auto one = confusion({{3, 5}}, 9);
    CHECK(one.at(3, 5) == 1);
    CHECK(one.total() == 1);

    const auto empty = confusion({}, 4);
    CHECK(empty.total() == 0);
    CHECK_THROWS_AS(accuracy(empty), MetricError);
    CHECK_THROWS_AS(confusion({{0, 4}}, 4), DimensionError);
    CHECK_THROWS_AS(confusion({{-1, 0}}, 4), DimensionError);
}

TEST_CASE("accuracy and recall") {
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 8;
    cm.at(0, 1) = 2;
    cm.at(1, 0) = 1;
    cm.at(1, 1) = 9;
    CHECK(accuracy(cm) == 0.85);
    CHECK(recall(cm, 1) == 0.9);
    CHECK(recall(cm, 0) == 0.8);

    ConfusionMatrix uniform(2);
    for (auto& c : uniform.counts) c = 5;
    CHECK(accuracy(uniform) == 0.5);

    ConfusionMatrix none(2);
    none.at(1, 0) = 4;
    CHECK(recall(none, 1) == 0.0);
    CHECK_THROWS_AS(recall(none, 0), MetricError);
    CHECK_THROWS_AS(recall(none, 2), DimensionError);
}

TEST_CASE("confusion row sums equal ground-truth counts") {
    Rng rng(2);
    std::vector<std::pair<int, int>> pairs;
    std::vector<std::int64_t> truth(9, 0);
    for (int i = 0; i < 1000; ++i) {
        const int t = static_cast<int>(rng.below(9));
        pairs.emplace_back(t, static_cast<int>(rng.below(9)));
        ++truth[t];
    }
    const auto cm = confusion(pairs, 9);
    for (int t = 0; t < 9; ++t) CHECK(cm.row_sum(t) == truth[t]);
    const double a = accuracy(cm);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
}

TEST_CASE("confusion CSV and table") {
    const auto cm = confusion({{0, 1}, {1, 1}}, 2);
    CHECK(confusion_csv(cm, {"a", "b"}) == "truth\\predicted,a,b\na,0,1\nb,0,1\n");
    CHECK(confusion_table(cm, {"a", "b"}).find("b") != std::string::npos);
    CHECK_THROWS_AS(confusion_csv(cm, {"a"}), DimensionError);
}

TEST_CASE("exact-match trial set is perfect") {
    IdTrialSet set{{}, {}, IdentityDatabase(128)};
    const MockEmbeddingGenerator gen(128, 0.0);
    for (int k = 0; k < 4; ++k) {
        const Embedding e{gen.base(static_cast<std::uint64_t>(k)), Modality::rgb};
        set.database.enroll("r" + std::to_string(k), {e, e, e});
        set.registered.push_back({"r" + std::to_string(k), {e}});
    }
    for (int k = 10; k < 13; ++k) {
        set.unregistered.push_back({"u" + std::to_string(k), {{gen.base(static_cast<std::uint64_t>(k)), Modality::rgb}}});
    }
    set.validate();
    const auto m = evaluate_identification(set, {});
    CHECK(m.accuracy == 1.0);
    CHECK(m.far == 0.0);
    CHECK(m.frr == 0.0);
    CHECK(m.misid_rate == 0.0);
    CHECK(m.registered_queries == 4);
    CHECK(m.unregistered_queries == 3);
}

TEST_CASE("threshold 1 rejects noisy queries") {
    SyntheticTrialParams p;
    p.registered = 3;
    p.unregistered = 2;
    p.queries_per_identity = 6;
    const auto set = make_synthetic_trials(9, p);
    const auto m = evaluate_identification(set, {1.0, 1.0});
    CHECK(m.far == 0.0);
    CHECK(m.frr == 1.0);
}

TEST_CASE("identification agrees with the brute-force oracle") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (double noise : {0.05, 0.8, 1.5}) {
            SyntheticTrialParams p;
            p.registered = 6;
            p.unregistered = 4;
            p.queries_per_identity = 8;
            p.noise = noise;
            const auto set = make_synthetic_trials(seed, p);
            for (double t : {0.3, 0.575, 0.65}) {
                const auto m = evaluate_identification(set, {t, t});
                CHECK(oracle::same(oracle::evaluate(set, t, t), m));
                CHECK(oracle::same(oracle::evaluate(set, t, t, Modality::ir), evaluate_identification(set, {t, t}, Modality::ir)));
            }
        }
    }
}

TEST_CASE("identification needs both populations") {
    IdTrialSet set{{}, {}, IdentityDatabase(2)};
    CHECK_THROWS_AS(evaluate_identification(set, {}), MetricError);
    set.database.enroll("a", {{{1, 0}, Modality::rgb}}, 1);
    set.registered.push_back({"a", {{{1, 0}, Modality::rgb}}});
    CHECK_THROWS_AS(evaluate_identification(set, {}), MetricError);
    set.unregistered.push_back({"a", {{{0, 1}, Modality::rgb}}});
    CHECK_THROWS_AS(set.validate(), MetricError);
}

TEST_CASE("sweep") {
    SyntheticTrialParams p;
    p.registered = 5;
    p.unregistered = 5;
    p.queries_per_identity = 6;
    p.noise = 1.0;
    const auto set = make_synthetic_trials(4, p);
    const auto ends = sweep_threshold(set, Modality::rgb, {0.0, 1.0});
    CHECK(ends[0].metrics.far >= ends[1].metrics.far);
    CHECK(ends[0].metrics.frr <= ends[1].metrics.frr);

    const auto single = sweep_threshold(set, Modality::ir, {0.4});
    REQUIRE(single.size() == 1);
    MatchThresholds th;
    th.ir = 0.4;
    CHECK(single[0].metrics == evaluate_identification(set, th, Modality::ir));

    CHECK_THROWS_AS(sweep_threshold(set, Modality::rgb, {0.5, 0.4}), InvalidArgument);
    const std::string csv = metrics_csv(ends);
    CHECK(csv.rfind("threshold,far,frr,misid,accuracy\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("synthetic trial set shape") {
    const auto set = make_synthetic_trials(1);
    CHECK(set.registered.size() == 15);
    CHECK(set.unregistered.size() == 10);
    CHECK(set.database.size() == 15);
    for (const auto& t : set.registered) CHECK(t.queries.size() == 20);
    const auto r = set.database.records()[0];
    CHECK(r.rgb->count == 3);
    CHECK(r.ir->count == 3);
    CHECK_NOTHROW(set.validate());
}

TEST_CASE("trials file round trip") {
    SyntheticTrialParams p;
    p.registered = 2;
    p.unregistered = 1;
    p.queries_per_identity = 3;
    p.dim = 4;
    const auto set = make_synthetic_trials(6, p);
    const std::string text = serialize_trials(set);
    int dim = 0;
    const auto [reg, unreg] = parse_trials(text, dim);
    CHECK(dim == 4);
    REQUIRE(reg.size() == 2);
    REQUIRE(unreg.size() == 1);
    CHECK(reg[1].queries == set.registered[1].queries);
    CHECK(unreg[0].label == set.unregistered[0].label);

    testutil::TempDir dir("trials");
    text::write_file_atomic(dir / "q.txt", text);
    set.database.save(dir / "db.txt");
    const auto loaded = load_trials(dir / "q.txt", dir / "db.txt");
    CHECK(evaluate_identification(loaded, {}) == evaluate_identification(set, {}));

    CHECK_THROWS_AS(parse_trials("dms-trials v1 dim=2\nregistered 1:a rgb 1\n", dim), ParseError);
    CHECK_THROWS_AS(parse_trials("dms-trials v1 dim=2\nother 1:a rgb 1 2\n", dim), ParseError);
}
