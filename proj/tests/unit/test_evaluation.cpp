// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../oracles.hpp"
#include "uvtranse/errors.hpp"
#include "uvtranse/evaluation.hpp"

using namespace uvt;

namespace {

DetectedObject obj(ObjectId id, std::size_t cls, Box b) { return {id, cls, b, 1.0}; }

GtTriplet gt(ObjectId s, std::size_t sc, Box sb, std::size_t p, ObjectId o, std::size_t oc, Box ob) {
  return {obj(s, sc, sb), p, obj(o, oc, ob)};
}

ScoredTriplet pred(const GtTriplet& g, double score, std::size_t p) {
  return {"img", g.subject, g.object, p, score};
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("task parsing") {
  CHECK(parse_task("predicate") == Task::kPredicate);
  CHECK(parse_task("sggen") == Task::kSGGen);
  CHECK(to_string(Task::kPhrCls) == "phrcls");
  CHECK_THROWS_AS(parse_task("nope"), ConfigError);
  CHECK(localization_for(Task::kPredCls) == Localization::kExact);
  CHECK(localization_for(Task::kPhrase) == Localization::kUnionBox);
  CHECK(localization_for(Task::kRelationship) == Localization::kBothBoxes);
  CHECK(parse_unrel_mode("subj_obj") == UnrelMode::kSubjObj);
  CHECK_THROWS_AS(parse_unrel_mode("both"), ConfigError);
}

TEST_CASE("recall: identical predictions score 1, half-correct scores 0.5") {
  const auto g1 = gt(1, 0, {0, 0, 2, 2}, 1, 2, 1, {3, 3, 2, 2});
  const auto g2 = gt(3, 1, {5, 5, 2, 2}, 0, 4, 0, {1, 6, 2, 2});
  const std::vector<GtTriplet> g{g1, g2};
  const std::vector<ScoredTriplet> exact{pred(g1, 0.9, 1), pred(g2, 0.8, 0)};
  for (auto task : {Task::kPredicate, Task::kPhrase, Task::kRelationship}) {
    CHECK(match_and_recall(exact, g, task, 50, 0.5).value() == 1.0);
  }
  const std::vector<ScoredTriplet> half{pred(g1, 0.9, 1), pred(g2, 0.8, 2)};
  CHECK(match_and_recall(half, g, Task::kPredicate, 50, 0.5).value() == 0.5);
  CHECK_FALSE(match_and_recall(half, {}, Task::kPredicate, 50, 0.5).has_value());
}

TEST_CASE("a prediction matches at most one ground truth") {
  const auto g1 = gt(1, 0, {0, 0, 2, 2}, 1, 2, 1, {3, 3, 2, 2});
  const std::vector<GtTriplet> g{g1, g1};
  const std::vector<ScoredTriplet> one{pred(g1, 0.9, 1)};
  CHECK(match_and_recall(one, g, Task::kPredicate, 50, 0.5).value() == 0.5);
  const std::vector<ScoredTriplet> two{pred(g1, 0.9, 1), pred(g1, 0.8, 1)};
  CHECK(match_and_recall(two, g, Task::kPredicate, 50, 0.5).value() == 1.0);
}

TEST_CASE("recall is non-decreasing in N") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = oracle::random_recall_instance(rng);
    if (inst.gt.empty()) continue;
    for (auto task : {Task::kPredicate, Task::kPhrase, Task::kRelationship}) {
      double prev = 0.0;
      for (std::size_t n = 0; n <= 7; ++n) {
        const double r = match_and_recall(inst.ranked, inst.gt, task, n, 0.5).value();
        CHECK(r >= prev);
        prev = r;
      }
    }
  }
}

TEST_CASE("ranking keeps the top k per pair and breaks ties by subject id") {
  const Box b{0, 0, 1, 1};
  const std::vector<PairScores> pairs{
      {obj(5, 0, b), obj(6, 0, b), {0.1, 0.7, 0.7}},
      {obj(2, 0, b), obj(3, 0, b), {0.7, 0.2, 0.3}},
  };
  const auto r1 = rank_predictions("img", pairs, 1);
  REQUIRE(r1.size() == 2);
  CHECK(r1[0].subject.object_id == 2);
  CHECK(r1[1].subject.object_id == 5);
  CHECK(r1[1].predicate_id == 1);
  const auto r3 = rank_predictions("img", pairs, 3);
  CHECK(r3.size() == 6);
  for (std::size_t i = 1; i < r3.size(); ++i) CHECK(r3[i - 1].score >= r3[i].score);
}

TEST_CASE("k equal to the predicate count scores every predicate of every pair") {
  Rng rng(12);
  std::vector<PairScores> pairs;
  for (int i = 0; i < 5; ++i) {
    Vector s(4);
    for (double& x : s) x = rng.uniform();
    pairs.push_back({obj(i, 0, {0, 0, 1, 1}), obj(10 + i, 1, {1, 1, 1, 1}), s});
  }
  CHECK(rank_predictions("img", pairs, 4).size() == 20);
}

TEST_CASE("recall is invariant to the input order of tied pairs") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PairScores> pairs;
    std::vector<GtTriplet> g;
    for (int i = 0; i < 5; ++i) {
      const Box sb = oracle::lattice_box(rng), ob = oracle::lattice_box(rng);
      const double tied = static_cast<double>(rng.below(2));
      pairs.push_back({obj(i, rng.below(2), sb), obj(10 + i, rng.below(2), ob), {tied, tied}});
      if (rng.uniform() < 0.5) g.push_back({pairs.back().subject, rng.below(2), pairs.back().object});
    }
    if (g.empty()) continue;
    const auto base = rank_predictions("img", pairs, 1);
    for (int perm = 0; perm < 5; ++perm) {
      auto shuffled = pairs;
      rng.shuffle(shuffled.begin(), shuffled.end());
      const auto r = rank_predictions("img", shuffled, 1);
      for (std::size_t n : {1, 2, 3}) {
        CHECK(match_and_recall(r, g, Task::kPredicate, n, 0.5) == match_and_recall(base, g, Task::kPredicate, n, 0.5));
      }
    }
  }
}

TEST_CASE("matching agrees with exhaustive enumeration") {
  Rng rng(14);
  for (int trial = 0; trial < 400; ++trial) {
    const auto inst = oracle::random_recall_instance(rng);
    for (auto task : {Task::kPredicate, Task::kPhrase, Task::kRelationship}) {
      for (std::size_t n : {1, 3, 50}) {
        const auto ref = oracle::enumerate_matches(inst.ranked, inst.gt, task, n, 0.5);
        const auto got = count_matches(inst.ranked, inst.gt, localization_for(task), n, 0.5);
        CHECK(got == ref.policy_matches);
        CHECK(got >= ref.min_matches);
        CHECK(got <= ref.max_matches);
      }
    }
  }
}

TEST_CASE("dataset recall is micro-averaged and skips empty images") {
  const auto g1 = gt(1, 0, {0, 0, 2, 2}, 1, 2, 1, {3, 3, 2, 2});
  const auto g2 = gt(3, 1, {5, 5, 2, 2}, 0, 4, 0, {1, 6, 2, 2});
  const std::vector<std::vector<ScoredTriplet>> ranked{{pred(g1, 0.9, 1)}, {}, {pred(g1, 0.5, 1)}};
  const std::vector<std::vector<GtTriplet>> gts{{g1}, {}, {g1, g2, g2}};
  EvalConfig cfg;
  const auto rep = dataset_recall(ranked, gts, cfg);
  CHECK(rep.images == 2);
  CHECK(rep.gt_total == 4);
  CHECK(rep.recall.at(50) == 0.5);
}

TEST_CASE("average precision examples") {
  CHECK(average_precision({true, true, false}, 2) == 1.0);
  CHECK(average_precision({false, true}, 1) == 0.5);
  CHECK(average_precision({}, 0) == 0.0);
  CHECK(std::abs(average_precision({true, false, true}, 3) - (1.0 + 2.0 / 3.0) / 3.0) < 1e-15);
}

TEST_CASE("retrieval mAP examples and mode ordering") {
  const LabelTriple q{0, 1, 1};
  const Box sb{0, 0, 4, 4}, ob{10, 0, 4, 4};
  const std::vector<UnrelGt> g{{"a", q, sb, ob}};
  const std::vector<UnrelCandidate> first{{"a", obj(1, 0, sb), obj(2, 1, ob), {0.0, 0.9}},
                                          {"a", obj(3, 0, {20, 20, 2, 2}), obj(4, 1, ob), {0.0, 0.1}}};
  const auto r1 = unrel_map(std::vector<LabelTriple>{q}, first, g, UnrelMode::kWithGt);
  CHECK(r1.map == 1.0);
  std::vector<UnrelCandidate> second = first;
  second[0].predicate_scores[1] = 0.05;
  CHECK(unrel_map(std::vector<LabelTriple>{q}, second, g, UnrelMode::kWithGt).map == 0.5);

  const LabelTriple absent{1, 0, 0};
  const auto r3 = unrel_map(std::vector<LabelTriple>{q, absent}, first, g, UnrelMode::kWithGt);
  CHECK(r3.evaluated.size() == 1);
  CHECK(r3.excluded.size() == 1);

  Rng rng(15);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = oracle::random_unrel_instance(rng);
    const double so = unrel_map(inst.queries, inst.candidates, inst.gt, UnrelMode::kSubjObj).map;
    const double s = unrel_map(inst.queries, inst.candidates, inst.gt, UnrelMode::kSubj).map;
    CHECK(so <= s + 1e-12);
  }
}

TEST_CASE("retrieval mAP agrees with the precision/recall table") {
  Rng rng(16);
  for (int trial = 0; trial < 400; ++trial) {
    const auto inst = oracle::random_unrel_instance(rng);
    for (auto mode : {UnrelMode::kWithGt, UnrelMode::kUnion, UnrelMode::kSubj, UnrelMode::kSubjObj}) {
      const double got = unrel_map(inst.queries, inst.candidates, inst.gt, mode).map;
      const double ref = oracle::unrel_reference_map(inst.queries, inst.candidates, inst.gt, mode, 0.3);
      CHECK(std::abs(got - ref) < 1e-12);
    }
  }
}

TEST_CASE("per-predicate mAP") {
  const auto g1 = gt(1, 0, {0, 0, 2, 2}, 1, 2, 1, {3, 3, 2, 2});
  const auto g2 = gt(3, 1, {5, 5, 2, 2}, 0, 4, 0, {1, 6, 2, 2});
  const std::vector<std::vector<ScoredTriplet>> ranked{{pred(g1, 0.9, 1), pred(g2, 0.8, 0)}};
  const std::vector<std::vector<GtTriplet>> gts{{g1, g2}};
  CHECK(predicate_map(ranked, gts, Localization::kBothBoxes, 0.5) == 1.0);
  const std::vector<std::vector<ScoredTriplet>> wrong{{pred(g1, 0.9, 0), pred(g1, 0.1, 1)}};
  CHECK(predicate_map(wrong, gts, Localization::kBothBoxes, 0.5) == 0.5);
}

TEST_CASE("composite score and attribute score examples") {
  CHECK(std::abs(open_images_score(1, 1, 1) - 1.0) < 1e-15);
  CHECK(std::abs(open_images_score(0.5, 0.25, 0.75) - 0.5) < 1e-15);
  CHECK(open_images_score(0, 0, 0) == 0.0);
  CHECK(std::abs(attribute_score(0.9, 0.5) - 0.45) < 1e-15);
  CHECK(attribute_score(1.0, 0.0) == 0.0);
}

TEST_CASE("scene graph nodes and edges") {
  ImageRecord rec;
  rec.image_id = "img";
  rec.dims = {10, 10};
  rec.objects.push_back({7, 0, {0, 0, 2, 2}, 1.0, {}});
  rec.objects.push_back({3, 1, {4, 4, 2, 2}, 1.0, {}});
  const auto empty = emit_scene_graph(rec, {}, 0);
  CHECK(empty.edges.empty());
  REQUIRE(empty.nodes.size() == 2);
  CHECK(empty.nodes[0].object_id == 3);

  const std::vector<ScoredTriplet> ranked{{"img", obj(7, 0, {0, 0, 2, 2}), obj(3, 1, {4, 4, 2, 2}), 2, 0.8},
                                          {"img", obj(3, 1, {4, 4, 2, 2}), obj(7, 0, {0, 0, 2, 2}), 1, 0.4}};
  CHECK(emit_scene_graph(rec, ranked, 0).edges.empty());
  const auto sg = emit_scene_graph(rec, ranked, 1);
  REQUIRE(sg.edges.size() == 1);
  CHECK(sg.edges[0].predicate_id == 2);
  const auto all = emit_scene_graph(rec, ranked, 100);
  CHECK(all.edges.size() == 2);
  for (const auto& e : all.edges) {
    const auto has = [&](ObjectId id) {
      return std::any_of(all.nodes.begin(), all.nodes.end(), [&](const auto& n) { return n.object_id == id; });
    };
    CHECK(has(e.subject_id));
    CHECK(has(e.object_id));
  }
  const auto j = all.to_json();
  CHECK(j["edges"].size() == 2);
  CHECK(j["nodes"].size() == 2);
}

TEST_CASE("eval config validation") {
  EvalConfig cfg;
  cfg.k_per_pair = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EvalConfig{};
  cfg.iou_threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
