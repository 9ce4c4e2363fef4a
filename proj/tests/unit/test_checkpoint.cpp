// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "test_support.hpp"
#include "uvtranse/checkpoint.hpp"
#include "uvtranse/errors.hpp"
#include "uvtranse/pipeline.hpp"

using namespace uvt;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ModelConfig small_config(bool language) {
  ModelConfig mc;
  mc.visual.n_app = 6;
  mc.visual.hidden_app = 8;
  mc.visual.d_emb = 5;
  mc.visual.loc_hidden = 6;
  mc.visual.loc_dim = 3;
  mc.visual.n_predicates = 4;
  mc.n_classes = 3;
  mc.use_language = language;
  mc.word_dim = 4;
  mc.gru_hidden = 3;
  mc.lang_head_hidden = 5;
  return mc;
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("canonical JSON sorts keys and round-trips doubles exactly") {
  Json j;
  j["b"] = 0.1;
  j["a"] = {1, 2};
  j["c"] = {{"z", 1}, {"y", -1e-300}};
  const auto text = canonical_dump(j);
  CHECK(text.find("\"a\"") < text.find("\"b\""));
  CHECK(text.find("\"y\"") < text.find("\"z\""));
  const auto back = Json::parse(text);
  CHECK(back["b"].get<double>() == 0.1);
  CHECK(back["c"]["y"].get<double>() == -1e-300);
  CHECK(canonical_dump(back) == text);
  CHECK_THROWS_AS(canonical_dump(Json(std::numeric_limits<double>::quiet_NaN())), DomainError);
}

TEST_CASE("save, load, save is byte-identical") {
  const auto dir = uvt::testing::scratch_dir("ckpt");
  for (bool language : {false, true}) {
    const auto mc = small_config(language);
    Rng rng(3);
    Tensor2 words(mc.n_classes, mc.word_dim);
    for (double& x : words.data()) x = rng.normal();
    RelationModel model(mc, words, 9);
    const auto batch = random_batch(mc, 4, rng);
    auto params = model.parameters();
    model.loss(batch, true);
    sgd_step(params, 0.05);

    const auto a = dir / "a.json";
    const auto b = dir / "b.json";
    save_checkpoint(model, a.string());
    auto loaded = load_checkpoint(a.string());
    save_checkpoint(loaded, b.string());
    CHECK(slurp(a) == slurp(b));

    const auto x = model.score(batch[0].feats, 0, 1);
    const auto y = loaded.score(batch[0].feats, 0, 1);
    CHECK(x.z_p == y.z_p);
    CHECK(x.z_l == y.z_l);
  }
}

TEST_CASE("malformed checkpoints are rejected") {
  const auto dir = uvt::testing::scratch_dir("ckpt_bad");
  const auto mc = small_config(false);
  RelationModel model(mc, {}, 1);
  auto doc = checkpoint_to_json(model);
  doc["version"] = 99;
  CHECK_THROWS(checkpoint_from_json(doc));
  doc = checkpoint_to_json(model);
  doc["params"].erase(doc["params"].begin());
  CHECK_THROWS(checkpoint_from_json(doc));
  CHECK_THROWS(load_checkpoint((dir / "missing.json").string()));
}

}  // TEST_SUITE
