// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "uvtranse/dataio.hpp"
#include "uvtranse/errors.hpp"

namespace uvt {

void SyntheticSpec::validate() const {
  if (n_classes == 0 || n_predicates == 0 || n_app == 0) {
    throw ConfigError("synthetic spec: n_classes, n_predicates and n_app must be >= 1");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("synthetic spec: noise_sigma must be finite and >= 0");
  }
  if (objects_per_image < 2 * relations_per_image || objects_per_image == 0) {
    throw ConfigError("synthetic spec: objects_per_image must be >= 2 * relations_per_image");
  }
  if (!(holdout_fraction >= 0.0 && holdout_fraction <= 1.0)) {
    throw ConfigError("synthetic spec: holdout_fraction must lie in [0, 1]");
  }
  if (predicates_per_pair > n_predicates) {
    throw ConfigError("synthetic spec: predicates_per_pair exceeds n_predicates");
  }
  if (!(image_width > 0.0 && image_height > 0.0)) {
    throw ConfigError("synthetic spec: image dimensions must be positive");
  }
  for (const auto& t : holdout_pairs) {
    if (t.subject_class >= n_classes || t.object_class >= n_classes || t.predicate >= n_predicates) {
      throw ConfigError("synthetic spec: holdout triple (" + std::to_string(t.subject_class) + ", " +
                        std::to_string(t.predicate) + ", " + std::to_string(t.object_class) +
                        ") is outside the vocabulary");
    }
  }
  const std::size_t total = n_classes * n_classes * n_predicates;
  const std::size_t holdout = holdout_pairs.empty() ? n_holdout : holdout_pairs.size();
  if (holdout >= total) throw ConfigError("synthetic spec: every label triple would be held out");
}

Json SyntheticSpec::to_json() const {
  Json j;
  j["n_classes"] = n_classes;
  j["n_predicates"] = n_predicates;
  j["n_app"] = n_app;
  j["noise_sigma"] = noise_sigma;
  j["images"] = images;
  j["test_images"] = test_images;
  j["objects_per_image"] = objects_per_image;
  j["relations_per_image"] = relations_per_image;
  Json h = Json::array();
  for (const auto& t : holdout_pairs) h.push_back(Json::array({t.subject_class, t.predicate, t.object_class}));
  j["holdout_pairs"] = std::move(h);
  j["n_holdout"] = n_holdout;
  j["holdout_fraction"] = holdout_fraction;
  j["predicates_per_pair"] = predicates_per_pair;
  j["prototype_scale"] = prototype_scale;
  j["translation_scale"] = translation_scale;
  j["image_width"] = image_width;
  j["image_height"] = image_height;
  j["seed"] = seed;
  return j;
}

SyntheticSpec SyntheticSpec::from_json(const Json& j) {
  SyntheticSpec s;
  try {
    s.n_classes = j.value("n_classes", s.n_classes);
    s.n_predicates = j.value("n_predicates", s.n_predicates);
    s.n_app = j.value("n_app", s.n_app);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.images = j.value("images", s.images);
    s.test_images = j.value("test_images", s.test_images);
    s.objects_per_image = j.value("objects_per_image", s.objects_per_image);
    s.relations_per_image = j.value("relations_per_image", s.relations_per_image);
    if (j.contains("holdout_pairs")) {
      for (const auto& t : j.at("holdout_pairs")) {
        if (!t.is_array() || t.size() != 3) throw ConfigError("holdout_pairs entries must be [s, p, o]");
        s.holdout_pairs.push_back({t[0].get<std::size_t>(), t[1].get<std::size_t>(), t[2].get<std::size_t>()});
      }
    }
    s.n_holdout = j.value("n_holdout", s.n_holdout);
    s.holdout_fraction = j.value("holdout_fraction", s.holdout_fraction);
    s.predicates_per_pair = j.value("predicates_per_pair", s.predicates_per_pair);
    s.prototype_scale = j.value("prototype_scale", s.prototype_scale);
    s.translation_scale = j.value("translation_scale", s.translation_scale);
    s.image_width = j.value("image_width", s.image_width);
    s.image_height = j.value("image_height", s.image_height);
    s.seed = j.value("seed", s.seed);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

Json SyntheticTruth::to_json() const {
  auto mat = [](const Tensor2& t) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      Json row = Json::array();
      for (double v : t.row(r)) row.push_back(v);
      rows.push_back(std::move(row));
    }
    return rows;
  };
  Json j;
  j["prototypes"] = mat(prototypes);
  j["translations"] = mat(translations);
  Json h = Json::array();
  for (const auto& t : holdout) h.push_back(Json::array({t.subject_class, t.predicate, t.object_class}));
  j["holdout"] = std::move(h);
  Json pp = Json::object();
  for (const auto& [pair, preds] : pair_predicates) {
    pp[std::to_string(pair.first) + "," + std::to_string(pair.second)] = preds;
  }
  j["pair_predicates"] = std::move(pp);
  return j;
}

namespace {

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : spec_(spec), rng_(spec.seed) {}

  SyntheticData run() {
    SyntheticData out;
    auto& truth = out.truth;
    truth.prototypes = gaussian_matrix(spec_.n_classes, spec_.prototype_scale);
    truth.translations = gaussian_matrix(spec_.n_predicates, spec_.translation_scale);
    for (std::size_t a = 0; a < spec_.n_classes; ++a) {
      for (std::size_t b = 0; b < spec_.n_classes; ++b) truth.pair_predicates[{a, b}] = draw_predicates();
    }
    truth.holdout = spec_.holdout_pairs.empty() ? draw_holdout() : spec_.holdout_pairs;
    holdout_.insert(truth.holdout.begin(), truth.holdout.end());
    truth_ = &truth;

    for (std::size_t i = 0; i < spec_.images; ++i) {
      out.train.push_back(make_image("train_" + pad(i), false));
    }
    for (std::size_t i = 0; i < spec_.test_images; ++i) {
      out.test.push_back(make_image("test_" + pad(i), true));
    }
    for (std::size_t c = 0; c < spec_.n_classes; ++c) out.vocab.classes.push_back("c" + std::to_string(c));
    for (std::size_t p = 0; p < spec_.n_predicates; ++p) {
      out.vocab.predicates.push_back("p" + std::to_string(p));
    }
    return out;
  }

 private:
  static std::string pad(std::size_t i) {
    std::string s = std::to_string(i);
    return std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
  }

  Tensor2 gaussian_matrix(std::size_t rows, double scale) {
    Tensor2 t(rows, spec_.n_app);
    for (double& v : t.data()) v = rng_.normal() * scale;
    return t;
  }

  std::vector<std::size_t> draw_predicates() {
    std::vector<std::size_t> all(spec_.n_predicates);
    for (std::size_t p = 0; p < all.size(); ++p) all[p] = p;
    if (spec_.predicates_per_pair == 0 || spec_.predicates_per_pair >= all.size()) return all;
    for (std::size_t i = 0; i < spec_.predicates_per_pair; ++i) {
      std::swap(all[i], all[i + rng_.below(all.size() - i)]);
    }
    all.resize(spec_.predicates_per_pair);
    std::sort(all.begin(), all.end());
    return all;
  }

  std::vector<LabelTriple> draw_holdout() {
    std::set<LabelTriple> chosen;
    std::vector<LabelTriple> out;
    while (out.size() < spec_.n_holdout) {
      LabelTriple t{rng_.below(spec_.n_classes), rng_.below(spec_.n_predicates), rng_.below(spec_.n_classes)};
      if (chosen.insert(t).second) out.push_back(t);
    }
    return out;
  }

  LabelTriple draw_training_triple() {
    for (;;) {
      const std::size_t a = rng_.below(spec_.n_classes);
      const std::size_t b = rng_.below(spec_.n_classes);
      std::vector<std::size_t> options;
      for (std::size_t p : truth_->pair_predicates.at({a, b})) {
        if (!holdout_.count({a, p, b})) options.push_back(p);
      }
      if (options.empty()) continue;
      return {a, options[rng_.below(options.size())], b};
    }
  }

  ObjectInstance make_object(ObjectId id, std::size_t cls) {
    ObjectInstance o;
    o.object_id = id;
    o.class_id = cls;
    o.score = 1.0;
    const double w = rng_.uniform(0.1, 0.5) * spec_.image_width;
    const double h = rng_.uniform(0.1, 0.5) * spec_.image_height;
    o.box = {rng_.uniform(0.0, spec_.image_width - w), rng_.uniform(0.0, spec_.image_height - h), w, h};
    o.feature.resize(spec_.n_app);
    const auto proto = truth_->prototypes.row(cls);
    for (std::size_t k = 0; k < spec_.n_app; ++k) o.feature[k] = proto[k] + noise();
    return o;
  }

  double noise() { return spec_.noise_sigma == 0.0 ? 0.0 : rng_.normal() * spec_.noise_sigma; }

  ImageRecord make_image(std::string id, bool test) {
    ImageRecord rec;
    rec.image_id = std::move(id);
    rec.dims = {spec_.image_width, spec_.image_height};
    std::map<std::pair<ObjectId, ObjectId>, std::size_t> related;
    ObjectId next = 0;
    for (std::size_t r = 0; r < spec_.relations_per_image; ++r) {
      LabelTriple t;
      if (test && !truth_->holdout.empty() && rng_.uniform() < spec_.holdout_fraction) {
        t = truth_->holdout[rng_.below(truth_->holdout.size())];
      } else {
        t = draw_training_triple();
      }
      const ObjectId s = next++;
      const ObjectId o = next++;
      rec.objects.push_back(make_object(s, t.subject_class));
      rec.objects.push_back(make_object(o, t.object_class));
      rec.relations.push_back({s, t.predicate, o});
      related[{s, o}] = t.predicate;
    }
    while (rec.objects.size() < spec_.objects_per_image) {
      rec.objects.push_back(make_object(next++, rng_.below(spec_.n_classes)));
    }
    for (const auto& s : rec.objects) {
      for (const auto& o : rec.objects) {
        if (s.object_id == o.object_id) continue;
        Vector u(spec_.n_app);
        auto it = related.find({s.object_id, o.object_id});
        for (std::size_t k = 0; k < spec_.n_app; ++k) {
          u[k] = s.feature[k] + o.feature[k] + noise();
          if (it != related.end()) u[k] += truth_->translations(it->second, k);
        }
        rec.union_features[{s.object_id, o.object_id}] = std::move(u);
      }
    }
    return rec;
  }

  const SyntheticSpec& spec_;
  Rng rng_;
  const SyntheticTruth* truth_ = nullptr;
  std::set<LabelTriple> holdout_;
};

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  return Generator(spec).run();
}

}  // namespace uvt
