// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "uvtranse/cli.hpp"
#include "uvtranse/dataio.hpp"
#include "uvtranse/evaluation.hpp"
#include "uvtranse/geometry.hpp"
#include "uvtranse/language_model.hpp"
#include "uvtranse/pipeline.hpp"
#include "uvtranse/visual_model.hpp"

using namespace uvt;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and limits.
constexpr double kGradTol = 1e-4;
constexpr double kGradTimeLimitS = 60.0;
constexpr double kZeroShotMin = 0.90;
constexpr double kZeroShotMargin = 0.05;
constexpr double kZeroShotTimeLimitS = 600.0;
constexpr double kCAblationMargin = 0.05;
constexpr double kSummationSlack = 0.01;
constexpr double kMapTol = 1e-12;
constexpr std::size_t kOracleInstances = 1000;
constexpr double kFormulaTol = 1e-15;
constexpr double kGeometryTol = 1e-12;
constexpr double kInvarianceRelTol = 1e-9;
constexpr std::size_t kRandomBoxes = 10000;

// Synthetic training protocol shared by the trend criteria.
constexpr double kSynthLr = 1e-2;
constexpr std::size_t kSynthEpochs = 20;
constexpr std::uint64_t kSynthSeed = 1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t checks = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    RunConfig cfg;
    cfg.seed = seed;
    // Visual-only and joint models.
    const auto doc = cmd_gradcheck(cfg);
    for (const auto& row : doc["results"]) {
      ++checks;
      const double e = row["max_rel_error"].get<double>();
      if (e >= worst) {
        worst = e;
        where = fmt("%s seed=%llu %s", row["model"].get<std::string>().c_str(),
                    static_cast<unsigned long long>(seed), row["param"].get<std::string>().c_str());
      }
    }
  }
  const double dt = seconds_since(t0);
  return {checks == 6 && worst < kGradTol && dt < kGradTimeLimitS,
          fmt("%zu model/seed checks, max rel error %.3g (%s) < %.0e; %.1f s < %.0f s", checks, worst, where.c_str(), kGradTol, dt,
              kGradTimeLimitS)};
}

struct SynthRun {
  double zero_shot = 0.0;
  double seen = 0.0;
  double seconds = 0.0;
  bool diverged = false;
};

class SynthBench {
 public:
  SynthBench() {
    SyntheticSpec spec;  // 20 classes, 10 predicates, n_app 32, sigma 0.1, 400/80 images x 5 relations
    spec.seed = kSynthSeed;
    data_ = generate_synthetic(spec);
    holdout_ = {data_.truth.holdout.begin(), data_.truth.holdout.end()};
    for (const auto& r : data_.train) train_relations_ += r.relations.size();
    for (const auto& r : data_.test) test_relations_ += r.relations.size();
  }

  std::string describe() const {
    return fmt("%zu train / %zu test relations, %zu held-out triples", train_relations_, test_relations_,
               holdout_.size());
  }

  const SynthRun& run(const std::string& variant, double C) {
    const std::string key = fmt("%s/%g", variant.c_str(), C);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    ModelConfig mc;
    mc.visual.n_app = 32;
    mc.visual.n_predicates = 10;
    mc.visual.C = C;
    mc.visual.combiner = parse_combiner(variant);
    mc.n_classes = 20;
    RelationModel model(mc, Tensor2(), kSynthSeed);
    TrainOptions opts;
    opts.seed = kSynthSeed;
    opts.lr = kSynthLr;
    opts.epochs = kSynthEpochs;
    opts.sampling.n_predicates = mc.visual.n_predicates;
    const auto t0 = Clock::now();
    const auto res = train_model(model, data_.train, opts);
    SynthRun out;
    out.seconds = seconds_since(t0);
    out.diverged = res.diverged;
    out.zero_shot = predicate_accuracy(model, data_.test, &holdout_).accuracy();
    std::set<LabelTriple> seen;
    for (const auto& t : label_triples(data_.train)) seen.insert(t);
    out.seen = predicate_accuracy(model, data_.test, &seen).accuracy();
    std::printf("  [train] %-10s C=%-4g zero-shot %.4f seen %.4f %.1f s%s\n", variant.c_str(), C, out.zero_shot,
                out.seen, out.seconds, out.diverged ? " (diverged)" : "");
    std::fflush(stdout);
    return cache_.emplace(key, out).first->second;
  }

 private:
  SyntheticData data_;
  std::set<LabelTriple> holdout_;
  std::size_t train_relations_ = 0;
  std::size_t test_relations_ = 0;
  std::map<std::string, SynthRun> cache_;
};

Outcome synthetic_zero_shot(SynthBench& bench) {
  const auto& u = bench.run("uvtranse", 1.0);
  const auto& v = bench.run("vtranse", 1.0);
  const double dt = u.seconds + v.seconds;
  const bool ok = !u.diverged && u.zero_shot >= kZeroShotMin && u.zero_shot >= v.zero_shot + kZeroShotMargin &&
                  dt < kZeroShotTimeLimitS;
  return {ok, fmt("UVTransE %.4f >= %.2f; VTransE %.4f, margin %.4f >= %.2f; %.1f s < %.0f s (%s)", u.zero_shot,
                  kZeroShotMin, v.zero_shot, u.zero_shot - v.zero_shot, kZeroShotMargin, dt, kZeroShotTimeLimitS,
                  bench.describe().c_str())};
}

Outcome c_ablation(SynthBench& bench) {
  const auto& c1 = bench.run("uvtranse", 1.0);
  const auto& c0 = bench.run("uvtranse", 0.0);
  const double margin = c1.zero_shot - c0.zero_shot;
  return {margin >= kCAblationMargin,
          fmt("C=1 %.4f, C=0 %.4f, margin %.4f >= %.2f", c1.zero_shot, c0.zero_shot, margin, kCAblationMargin)};
}

Outcome summation_trend(SynthBench& bench) {
  const auto& sub = bench.run("uvtranse", 1.0);
  const auto& sum = bench.run("summation", 1.0);
  return {sub.zero_shot >= sum.zero_shot - kSummationSlack,
          fmt("subtraction %.4f, summation %.4f, slack %.2f", sub.zero_shot, sum.zero_shot, kSummationSlack)};
}

// ---------------------------------------------------------------------------

Outcome metric_oracles() {
  Rng rng(20240601);
  std::size_t recall_mismatch = 0, recall_order = 0, map_mismatch = 0;
  double worst_map = 0.0;
  const std::array<Task, 3> tasks{Task::kPredicate, Task::kPhrase, Task::kRelationship};
  const std::array<UnrelMode, 4> modes{UnrelMode::kWithGt, UnrelMode::kUnion, UnrelMode::kSubj,
                                       UnrelMode::kSubjObj};
  for (std::size_t i = 0; i < kOracleInstances; ++i) {
    const auto inst = oracle::random_recall_instance(rng, 6, 4);
    for (Task task : tasks) {
      for (std::size_t n : {1, 2, 3, 50, 100}) {
        const auto ref = oracle::enumerate_matches(inst.ranked, inst.gt, task, n, 0.5);
        const auto got = match_and_recall(inst.ranked, inst.gt, task, n, 0.5);
        if (inst.gt.empty()) {
          if (got.has_value()) ++recall_mismatch;
          continue;
        }
        const double want = static_cast<double>(ref.policy_matches) / static_cast<double>(inst.gt.size());
        if (!got || *got != want) ++recall_mismatch;
      }
      if (!inst.gt.empty()) {
        const double r50 = *match_and_recall(inst.ranked, inst.gt, task, 50, 0.5);
        const double r100 = *match_and_recall(inst.ranked, inst.gt, task, 100, 0.5);
        if (r100 < r50) ++recall_order;
      }
    }
    const auto u = oracle::random_unrel_instance(rng, 3, 6, 4);
    for (UnrelMode mode : modes) {
      const double got = unrel_map(u.queries, u.candidates, u.gt, mode, 0.3).map;
      const double ref = oracle::unrel_reference_map(u.queries, u.candidates, u.gt, mode, 0.3);
      const double d = std::abs(got - ref);
      worst_map = std::max(worst_map, d);
      if (!(d <= kMapTol)) ++map_mismatch;
    }
  }
  return {recall_mismatch == 0 && map_mismatch == 0 && recall_order == 0,
          fmt("%zu instances: recall mismatches %zu, mAP mismatches %zu (worst %.2g <= %.0e), R@100<R@50 %zu",
              kOracleInstances, recall_mismatch, map_mismatch, worst_map, kMapTol, recall_order)};
}

Outcome formula_spot_checks() {
  struct Case {
    const char* name;
    double got;
    double want;
  };
  const std::vector<Case> cases{
      {"sum(0.9,0.8,0.5)", triplet_score(0.9, 0.8, 0.5, ScoreMode::kSum), 2.2},
      {"product(0.9,0.8,0.5)", triplet_score(0.9, 0.8, 0.5, ScoreMode::kProduct), 0.36},
      {"product with zero", triplet_score(0.0, 0.8, 0.5, ScoreMode::kProduct), 0.0},
      {"combined sum", combined_score(1.0, 1.0, 0.6, 0.2, 0.5, ScoreMode::kSum), 2.4},
      {"combined product", combined_score(0.9, 0.8, 0.6, 0.2, 0.5, ScoreMode::kProduct), 0.288},
      {"attribute(0.5,0.4)", attribute_score(0.5, 0.4), 0.2},
      {"attribute(1,0.37)", attribute_score(1.0, 0.37), 0.37},
      {"attribute(0,0.37)", attribute_score(0.0, 0.37), 0.0},
      {"open images(0.5,0.25,0.25)", open_images_score(0.5, 0.25, 0.25), 0.3},
      {"open images(1,1,1)", open_images_score(1, 1, 1), 1.0},
      {"open images(1,0,0)", open_images_score(1, 0, 0), 0.2},
  };
  double worst = 0.0;
  std::string where = "-";
  for (const auto& c : cases) {
    const double d = std::abs(c.got - c.want);
    if (d > worst) {
      worst = d;
      where = c.name;
    }
  }
  return {worst <= kFormulaTol, fmt("%zu hand values, worst deviation %.2g (%s) <= %.0e", cases.size(), worst,
                                    where.c_str(), kFormulaTol)};
}

Outcome geometry_checks() {
  double worst = 0.0;
  auto cmp = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  auto cmpv = [&](const auto& got, std::initializer_list<double> want) {
    std::size_t i = 0;
    if (got.size() != want.size()) worst = INFINITY;
    for (double w : want) cmp(got[i++], w);
  };
  const Box a{0, 0, 2, 2};
  const Box u = union_box(a, Box{2, 2, 2, 2});
  cmpv(std::array<double, 4>{u.x, u.y, u.w, u.h}, {0, 0, 4, 4});
  const Box same = union_box(a, a);
  cmpv(std::array<double, 4>{same.x, same.y, same.w, same.h}, {0, 0, 2, 2});
  cmp(iou(a, a), 1.0);
  cmp(iou(a, Box{5, 5, 1, 1}), 0.0);
  cmp(iou(a, Box{1, 1, 2, 2}), 1.0 / 7.0);
  cmpv(box_location_feature({0, 0, 10, 10}, {10, 10}), {0, 0, 1, 1, 1});
  cmpv(box_location_feature(a, {10, 10}), {0, 0, 0.2, 0.2, 0.04});
  cmpv(pair_location_feature(a, {2, 2, 2, 2}, {10, 10}), {-1, -1, 0, 0, 1, 1, 0, 0, 0.16});
  cmpv(pair_location_feature(a, a, {10, 10}), {0, 0, 0, 0, 0, 0, 0, 0, 0.04});
  cmpv(triplet_location_vector({0, 0, 640, 480}, {0, 0, 640, 480}, {640, 480}),
       {0, 0, 1, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1});

  Rng rng(99);
  std::size_t violations = 0;
  auto near = [](double x, double y) { return std::abs(x - y) <= kInvarianceRelTol * (1.0 + std::abs(x)); };
  const ImageDims img{640, 480};
  for (std::size_t t = 0; t < kRandomBoxes; ++t) {
    const Box s{rng.uniform(-50, 500), rng.uniform(-50, 400), rng.uniform(1, 300), rng.uniform(1, 300)};
    const Box o{rng.uniform(-50, 500), rng.uniform(-50, 400), rng.uniform(1, 300), rng.uniform(1, 300)};
    const double v = iou(s, o);
    if (v != iou(o, s) || v < 0.0 || v > 1.0) ++violations;
    const auto p = pair_location_feature(s, o, img);
    const double dx = rng.uniform(-100, 100), dy = rng.uniform(-100, 100);
    const auto q = pair_location_feature({s.x + dx, s.y + dy, s.w, s.h}, {o.x + dx, o.y + dy, o.w, o.h}, img);
    for (int i = 0; i < 8; ++i) violations += near(p[i], q[i]) ? 0 : 1;
    const double c = rng.uniform(0.1, 10.0);
    const auto f = triplet_location_vector(s, o, img);
    const auto g = triplet_location_vector({s.x * c, s.y * c, s.w * c, s.h * c}, {o.x * c, o.y * c, o.w * c, o.h * c},
                                           {img.width * c, img.height * c});
    for (std::size_t i = 0; i < f.size(); ++i) violations += near(f[i], g[i]) ? 0 : 1;
  }
  return {worst <= kGeometryTol && violations == 0,
          fmt("hand examples worst deviation %.2g <= %.0e; %zu random boxes, %zu invariance violations", worst,
              kGeometryTol, kRandomBoxes, violations)};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "uvtranse_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "spec.json");
    f << R"({"n_classes":8,"n_predicates":5,"n_app":16,"images":80,"test_images":16,"seed":3})";
  }
  RunConfig synth;
  synth.spec = (dir / "spec.json").string();
  cmd_synth(synth, (dir / "data").string());

  RunConfig cfg;
  cfg.data = (dir / "data" / "train.jsonl").string();
  cfg.vocab = (dir / "data" / "vocab.json").string();
  cfg.epochs = 3;
  cfg.d_emb = 32;
  cfg.hidden_app = 64;
  cfg.word_dim = 16;
  cfg.gru_hidden = 16;
  cfg.lang_head_hidden = 32;
  cfg.seed = 11;
  const auto log_a = canonical_dump(cmd_train(cfg, (dir / "a.json").string()));
  const auto log_b = canonical_dump(cmd_train(cfg, (dir / "b.json").string()));
  const bool ckpt_same = slurp(dir / "a.json") == slurp(dir / "b.json");

  RunConfig ev = cfg;
  ev.data = (dir / "data" / "test.jsonl").string();
  ev.zero_shot_against = (dir / "data" / "train.jsonl").string();
  ev.checkpoint = (dir / "a.json").string();
  const auto rep_a = canonical_dump(cmd_eval(ev));
  ev.checkpoint = (dir / "b.json").string();
  const auto rep_b = canonical_dump(cmd_eval(ev));
  const bool ok = ckpt_same && rep_a == rep_b && log_a == log_b;
  return {ok, fmt("checkpoints %s (%zu bytes), eval reports %s, train logs %s", ckpt_same ? "identical" : "differ",
                  slurp(dir / "a.json").size(), rep_a == rep_b ? "identical" : "differ",
                  log_a == log_b ? "identical" : "differ")};
}

}  // namespace

int main() {
  SynthBench bench;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient-integrity", gradient_integrity},
      {"synthetic-zero-shot", [&] { return synthetic_zero_shot(bench); }},
      {"c-ablation-trend", [&] { return c_ablation(bench); }},
      {"summation-vs-subtraction", [&] { return summation_trend(bench); }},
      {"metric-oracles", metric_oracles},
      {"formula-spot-checks", formula_spot_checks},
      {"geometry", geometry_checks},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
  return failures;
}
