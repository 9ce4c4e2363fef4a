// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "test_support.hpp"
#include "uvtranse/errors.hpp"
#include "uvtranse/language_model.hpp"
#include "uvtranse/pipeline.hpp"
#include "uvtranse/relation_model.hpp"

using namespace uvt;
using uvt::testing::random_vector;

namespace {

ModelConfig joint_config() {
  ModelConfig mc;
  mc.visual.n_app = 6;
  mc.visual.hidden_app = 10;
  mc.visual.d_emb = 5;
  mc.visual.loc_hidden = 7;
  mc.visual.loc_dim = 3;
  mc.visual.n_predicates = 4;
  mc.n_classes = 3;
  mc.use_language = true;
  mc.word_dim = 4;
  mc.gru_hidden = 3;
  mc.lang_head_hidden = 6;
  return mc;
}

Tensor2 random_words(const ModelConfig& mc, Rng& rng) {
  Tensor2 w(mc.n_classes, mc.word_dim);
  for (double& x : w.data()) x = rng.normal();
  return w;
}

}  // namespace

TEST_SUITE("model-language") {

TEST_CASE("word lookup, averaging and fallback") {
  const auto t = WordTable::builtin_tiny();
  CHECK(t.vectors.size() == 20);
  CHECK(t.lookup("person") == t.vectors.at("person"));
  const auto tl = t.lookup("traffic light");
  const auto& a = t.vectors.at("traffic");
  const auto& b = t.vectors.at("light");
  for (std::size_t i = 0; i < t.dim; ++i) CHECK(std::abs(tl[i] - 0.5 * (a[i] + b[i])) < 1e-15);
  CHECK(t.lookup("zebra") == t.fallback);
}

TEST_CASE("GloVe-format loading validates the dimension") {
  const auto dir = uvt::testing::scratch_dir("words");
  {
    std::ofstream f(dir / "ok.txt");
    f << "person 0.5 -1 2\nhorse 1 1 1\n";
  }
  const auto t = WordTable::load((dir / "ok.txt").string());
  CHECK(t.dim == 3);
  CHECK(t.lookup("person") == Vector{0.5, -1, 2});
  {
    std::ofstream f(dir / "bad.txt");
    f << "person 0.5 -1 2\nhorse 1 1\n";
  }
  CHECK_THROWS_AS(WordTable::load((dir / "bad.txt").string()), ParseError);
  CHECK_THROWS_AS(WordTable::load((dir / "missing.txt").string()), ParseError);
}

TEST_CASE("hashed vectors are deterministic") {
  const std::vector<std::string> names{"a", "b c"};
  const auto x = WordTable::hashed(7, names);
  const auto y = WordTable::hashed(7, names);
  CHECK(x.lookup("a") == y.lookup("a"));
  CHECK(x.lookup("a") != x.lookup("b"));
}

TEST_CASE("zero inputs and zero parameters give a zero Bi-GRU output") {
  Rng rng(1);
  LanguageModel lm(LanguageConfig{5, 4, 3, 6, 4}, rng);
  for (auto& p : lm.parameters()) std::fill(p.value.begin(), p.value.end(), 0.0);
  const auto out = lm.bigru_forward({Vector(4, 0.0), Vector(4, 0.0), Vector(4, 0.0)});
  CHECK(out == Vector(18, 0.0));
}

TEST_CASE("Bi-GRU output size and bounds under the default dimensions") {
  Rng rng(2);
  LanguageModel lm(LanguageConfig{256, 100, 100, 256, 70}, rng);
  const auto inputs = lm.encode_sequence(random_vector(rng, 100), random_vector(rng, 256, 3.0),
                                         random_vector(rng, 100));
  const auto out = lm.bigru_forward(inputs);
  CHECK(out.size() == 600);
  for (double h : out) CHECK((h > -1.0 && h < 1.0));
  const auto z = lm.language_score(out);
  CHECK(z.size() == 70);
  CHECK(std::abs(std::accumulate(z.begin(), z.end(), 0.0) - 1.0) < 1e-12);
  CHECK(lm.language_logits(out) == lm.language_logits(out));
}

TEST_CASE("zero head gives a uniform language score") {
  Rng rng(3);
  LanguageModel lm(LanguageConfig{5, 4, 3, 6, 4}, rng);
  for (auto& p : lm.parameters()) {
    if (p.name.rfind("language.head", 0) == 0) std::fill(p.value.begin(), p.value.end(), 0.0);
  }
  const auto out = lm.bigru_forward({random_vector(rng, 4), random_vector(rng, 4), random_vector(rng, 4)});
  for (double z : lm.language_score(out)) CHECK(std::abs(z - 0.25) < 1e-15);
}

TEST_CASE("reversed sequence with swapped cells swaps the output halves") {
  Rng rng(4);
  LanguageModel lm(LanguageConfig{5, 4, 3, 6, 4}, rng);
  LanguageModel swapped = lm;
  swapped.forward_cell() = lm.backward_cell();
  swapped.backward_cell() = lm.forward_cell();
  for (int trial = 0; trial < 20; ++trial) {
    const std::array<Vector, 3> in{random_vector(rng, 4), random_vector(rng, 4), random_vector(rng, 4)};
    const auto out = lm.bigru_forward(in);
    const auto rev = swapped.bigru_forward({in[2], in[1], in[0]});
    for (std::size_t i = 0; i < 9; ++i) {
      CHECK(rev[i] == out[9 + i]);
      CHECK(rev[9 + i] == out[i]);
    }
  }
}

TEST_CASE("language score length matches the visual output count") {
  auto mc = joint_config();
  mc.visual.use_background = true;
  Rng rng(5);
  RelationModel model(mc, random_words(mc, rng), 5);
  const auto batch = random_batch(mc, 1, rng);
  const auto sc = model.score(batch[0].feats, 0, 1);
  CHECK(sc.z_l.size() == sc.z_p.size());
  CHECK(sc.z_l.size() == 5);
}

TEST_CASE("combined loss and score formulas") {
  CHECK(combined_loss(1.7, 0.3, 1.0) == 1.7);
  CHECK(combined_loss(1.7, 0.3, 0.0) == 0.3);
  CHECK(std::abs(combined_loss(1.0, 3.0, 0.5) - 2.0) < 1e-15);
  CHECK(std::abs(combined_score(1, 1, 0.6, 0.2, 0.5, ScoreMode::kSum) - 2.4) < 1e-15);
  CHECK(std::abs(combined_score(0.9, 0.8, 0.6, 0.2, 0.5, ScoreMode::kProduct) - 0.288) < 1e-15);
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const double zs = rng.uniform(), zo = rng.uniform(), zp = rng.uniform(), zl = rng.uniform();
    for (auto mode : {ScoreMode::kSum, ScoreMode::kProduct}) {
      CHECK(std::abs(combined_score(zs, zo, zp, zl, 1.0, mode) - triplet_score(zs, zo, zp, mode)) < 1e-14);
      const double base = combined_score(zs, zo, zp, zl, 0.5, mode);
      const double d = rng.uniform(0.0, 0.1);
      CHECK(combined_score(zs + d, zo, zp, zl, 0.5, mode) >= base);
      CHECK(combined_score(zs, zo + d, zp, zl, 0.5, mode) >= base);
      CHECK(combined_score(zs, zo, zp + d, zl, 0.5, mode) >= base);
      CHECK(combined_score(zs, zo, zp, zl + d, 0.5, mode) >= base);
    }
  }
}

TEST_CASE("joint model gradients at three seeds") {
  for (bool background : {false, true}) {
    for (bool through : {true}) {
      for (std::uint64_t seed : {1, 2, 3}) {
        auto mc = joint_config();
        mc.visual.use_background = background;
        mc.lang_grad_to_visual = through;
        const auto rep = check_model_gradients(mc, seed, 5);
        INFO("seed=", seed, " background=", background, " through=", through, " worst ", rep.param_name);
        CHECK(rep.max_rel_error < 1e-4);
      }
    }
  }
}

TEST_CASE("language loss reaches the visual projections through p_hat") {
  auto mc = joint_config();
  mc.alpha = 0.0;
  Rng rng(7);
  const auto words = random_words(mc, rng);
  const auto batch = random_batch(mc, 4, rng);
  auto visual_grad_norm = [&](bool through) {
    auto c = mc;
    c.lang_grad_to_visual = through;
    RelationModel model(c, words, 3);
    model.loss(batch, true);
    double n = 0.0;
    for (const auto& p : model.visual().parameters()) {
      if (p.name.rfind("visual.f_", 0) == 0) {
        for (double g : p.grad) n += g * g;
      }
    }
    return n;
  };
  CHECK(visual_grad_norm(true) > 0.0);
  CHECK(visual_grad_norm(false) == 0.0);
}

TEST_CASE("alpha = 1 leaves the language parameters at initialization") {
  auto mc = joint_config();
  mc.alpha = 1.0;
  Rng rng(8);
  RelationModel model(mc, random_words(mc, rng), 8);
  std::vector<Vector> before;
  for (const auto& p : model.language().parameters()) before.emplace_back(p.value.begin(), p.value.end());
  const auto batch = random_batch(mc, 6, rng);
  auto params = model.parameters();
  for (int step = 0; step < 5; ++step) {
    model.loss(batch, true);
    sgd_step(params, 0.1);
  }
  std::size_t i = 0;
  for (const auto& p : model.language().parameters()) {
    CHECK(Vector(p.value.begin(), p.value.end()) == before[i++]);
  }
}

}  // TEST_SUITE
