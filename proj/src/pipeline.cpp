// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "uvtranse/errors.hpp"

namespace uvt {

namespace {

std::uint64_t epoch_mix(std::uint64_t seed, std::size_t epoch) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(epoch) + 1));
}

}  // namespace

std::vector<LabeledTriplet> epoch_examples(const Dataset& train, const TrainOptions& opts,
                                           std::size_t epoch) {
  const std::uint64_t s = epoch_mix(opts.seed, epoch);
  std::vector<LabeledTriplet> out;
  for (const auto& rec : train) {
    Rng rng(image_seed(s, rec.image_id));
    for (auto& t : sample_training_triplets(rec, opts.sampling, rng)) out.push_back(std::move(t.example));
  }
  Rng order(s + 0x5851F42D4C957F2DULL);
  order.shuffle(out.begin(), out.end());
  return out;
}

TrainResult train_model(RelationModel& model, const Dataset& train, const TrainOptions& opts,
                        const EpochCallback& on_epoch) {
  if (opts.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(opts.lr > 0.0) || !std::isfinite(opts.lr)) throw ConfigError("learning rate must be positive");
  TrainResult result;
  auto params = model.parameters();
  model.zero_grad();
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto examples = epoch_examples(train, opts, epoch);
    double total = 0.0;
    std::size_t batches = 0;
    try {
      for (std::size_t b = 0; b < examples.size(); b += opts.batch_size) {
        const std::size_t e = std::min(examples.size(), b + opts.batch_size);
        const auto lv = model.loss(std::span<const LabeledTriplet>(examples).subspan(b, e - b), true);
        sgd_step(params, opts.lr);
        total += lv.total;
        ++batches;
        ++result.steps;
      }
    } catch (const TrainingError& err) {
      model.zero_grad();
      result.diverged = true;
      result.failure = err.what();
      return result;
    }
    const double mean = batches == 0 ? 0.0 : total / static_cast<double>(batches);
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

std::vector<std::size_t> top_proposals(const ImageRecord& rec, std::size_t top) {
  std::vector<std::size_t> idx(rec.objects.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& oa = rec.objects[a];
    const auto& ob = rec.objects[b];
    if (oa.score != ob.score) return oa.score > ob.score;
    return oa.object_id < ob.object_id;
  });
  if (top > 0 && idx.size() > top) idx.resize(top);
  return idx;
}

Vector predicate_probabilities(const RelationModel& model, const TripletFeatures& feats,
                               std::size_t subject_class, std::size_t object_class) {
  const auto sc = model.score(feats, subject_class, object_class);
  const std::size_t n = model.config().visual.n_predicates;
  Vector out(sc.z_p.begin(), sc.z_p.begin() + static_cast<std::ptrdiff_t>(n));
  if (!sc.z_l.empty()) {
    const double a = model.config().alpha;
    for (std::size_t p = 0; p < n; ++p) out[p] = a * sc.z_p[p] + (1.0 - a) * sc.z_l[p];
  }
  return out;
}

std::vector<PairScores> score_pairs(const RelationModel& model, const ImageRecord& rec,
                                    const PredictOptions& opts) {
  const auto keep = top_proposals(rec, opts.top_proposals);
  const auto& cfg = model.config();
  const std::size_t n = cfg.visual.n_predicates;
  std::vector<PairScores> out;
  for (std::size_t si : keep) {
    for (std::size_t oi : keep) {
      if (si == oi) continue;
      const auto& s = rec.objects[si];
      const auto& o = rec.objects[oi];
      const auto feats = build_triplet_features(rec, si, oi);
      const auto sc = model.score(feats, s.class_id, o.class_id);
      PairScores ps;
      ps.subject = {s.object_id, s.class_id, s.box, s.score};
      ps.object = {o.object_id, o.class_id, o.box, o.score};
      ps.predicate_scores.resize(n);
      for (std::size_t p = 0; p < n; ++p) {
        ps.predicate_scores[p] =
            sc.z_l.empty() ? triplet_score(s.score, o.score, sc.z_p[p], cfg.visual.score_mode)
                           : combined_score(s.score, o.score, sc.z_p[p], sc.z_l[p], cfg.alpha,
                                            cfg.visual.score_mode);
      }
      out.push_back(std::move(ps));
    }
  }
  return out;
}

std::vector<std::vector<PairScores>> score_dataset(const RelationModel& model, const Dataset& data,
                                                   const PredictOptions& opts) {
  std::vector<std::vector<PairScores>> out(data.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.threads, data.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = score_pairs(model, data[i], opts);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < data.size(); i += workers) out[i] = score_pairs(model, data[i], opts);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

AccuracyReport predicate_accuracy(const RelationModel& model, const Dataset& data,
                                  const std::set<LabelTriple>* only) {
  AccuracyReport rep;
  for (const auto& rec : data) {
    for (const auto& r : rec.relations) {
      const std::size_t si = rec.index_of(r.subject_id);
      const std::size_t oi = rec.index_of(r.object_id);
      const LabelTriple t{rec.objects[si].class_id, r.predicate_id, rec.objects[oi].class_id};
      if (only && !only->count(t)) continue;
      const auto probs = predicate_probabilities(model, build_triplet_features(rec, si, oi),
                                                 t.subject_class, t.object_class);
      ++rep.total;
      if (argmax(probs) == r.predicate_id) ++rep.correct;
    }
  }
  return rep;
}

std::vector<LabeledTriplet> random_batch(const ModelConfig& config, std::size_t n, Rng& rng) {
  const auto& v = config.visual;
  std::vector<LabeledTriplet> out(n);
  for (auto& ex : out) {
    for (auto* f : {&ex.feats.app_s, &ex.feats.app_o, &ex.feats.app_u}) {
      f->resize(v.n_app);
      for (double& x : *f) x = rng.normal();
    }
    for (double& x : ex.feats.loc) x = rng.normal();
    ex.target = rng.below(v.n_outputs());
    ex.subject_class = rng.below(std::max<std::size_t>(1, config.n_classes));
    ex.object_class = rng.below(std::max<std::size_t>(1, config.n_classes));
  }
  return out;
}

GradReport check_model_gradients(const ModelConfig& config, std::uint64_t seed, std::size_t batch,
                                 std::size_t samples) {
  Rng rng(seed ^ 0xD1B54A32D192ED03ULL);
  Tensor2 words(config.n_classes, config.word_dim);
  for (double& x : words.data()) x = rng.normal();
  RelationModel model(config, config.use_language ? std::move(words) : Tensor2(), seed);
  const auto examples = random_batch(config, batch, rng);
  auto params = model.parameters();
  return gradient_check(
      params, [&](bool backprop) { return model.loss(examples, backprop).total; }, seed, samples);
}

}  // namespace uvt
