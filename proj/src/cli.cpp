// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "uvtranse/checkpoint.hpp"
#include "uvtranse/dataio.hpp"
#include "uvtranse/errors.hpp"
#include "uvtranse/evaluation.hpp"
#include "uvtranse/language_model.hpp"
#include "uvtranse/pipeline.hpp"

namespace uvt {

void RunConfig::apply_profile(const std::string& name) {
  if (name == "vrd") {
    C = 1.0;
    lr = 1e-3;
    score_mode = "sum";
    use_background = false;
    top_proposals = 30;
  } else if (name == "vg" || name == "openimages") {
    C = 0.1;
    lr = 1e-2;
    score_mode = "product";
    use_background = true;
    top_proposals = 50;
    neg_ratio = 3.0;
    budget = 32;
  } else {
    throw ConfigError("unknown profile '" + name + "' (expected vrd, vg or openimages)");
  }
  profile = name;
}

void RunConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch-size must be >= 1");
  if (!(C >= 0.0) || !std::isfinite(C)) throw ConfigError("C must be finite and >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(neg_ratio >= 0.0) || !std::isfinite(neg_ratio)) throw ConfigError("neg-ratio must be >= 0");
  if (budget == 0) throw ConfigError("budget must be >= 1");
  if (k_per_pair == 0) throw ConfigError("k must be >= 1");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("iou threshold must lie in (0, 1]");
  if (!(unrel_iou > 0.0 && unrel_iou <= 1.0)) throw ConfigError("unrel iou must lie in (0, 1]");
  if (recall_at.empty()) throw ConfigError("recall_at must not be empty");
  parse_score_mode(score_mode);
  parse_combiner(variant);
  parse_unrel_mode(mode);
  if (task != "unrel") parse_task(task);
}

Json RunConfig::to_json() const {
  Json j;
  j["profile"] = profile;
  j["seed"] = seed;
  j["epochs"] = epochs;
  j["lr"] = lr;
  j["batch_size"] = batch_size;
  j["C"] = C;
  j["alpha"] = alpha;
  j["neg_ratio"] = neg_ratio;
  j["budget"] = budget;
  j["iou_match"] = iou_match;
  j["k_per_pair"] = k_per_pair;
  j["score_mode"] = score_mode;
  j["use_language"] = use_language;
  j["use_background"] = use_background;
  j["variant"] = variant;
  j["use_location"] = use_location;
  j["d_emb"] = d_emb;
  j["hidden_app"] = hidden_app;
  j["loc_hidden"] = loc_hidden;
  j["loc_dim"] = loc_dim;
  j["word_dim"] = word_dim;
  j["gru_hidden"] = gru_hidden;
  j["lang_head_hidden"] = lang_head_hidden;
  j["task"] = task;
  j["mode"] = mode;
  j["iou_threshold"] = iou_threshold;
  j["unrel_iou"] = unrel_iou;
  j["recall_at"] = recall_at;
  j["top_proposals"] = top_proposals;
  j["top_n"] = top_n;
  j["threads"] = threads;
  j["paths"] = {{"data", data},
                {"vocab", vocab},
                {"words", words},
                {"zero_shot_against", zero_shot_against},
                {"detections", detections},
                {"spec", spec}};
  return j;
}

namespace {

template <typename T>
void take(const Json& j, const char* key, T& field, std::set<std::string>& seen) {
  if (!j.contains(key)) return;
  seen.insert(key);
  field = j.at(key).get<T>();
}

}  // namespace

void RunConfig::merge_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::set<std::string> seen;
  try {
    take(j, "profile", profile, seen);
    take(j, "seed", seed, seen);
    take(j, "epochs", epochs, seen);
    take(j, "lr", lr, seen);
    take(j, "batch_size", batch_size, seen);
    take(j, "C", C, seen);
    take(j, "alpha", alpha, seen);
    take(j, "neg_ratio", neg_ratio, seen);
    take(j, "budget", budget, seen);
    take(j, "iou_match", iou_match, seen);
    take(j, "k_per_pair", k_per_pair, seen);
    take(j, "score_mode", score_mode, seen);
    take(j, "use_language", use_language, seen);
    take(j, "use_background", use_background, seen);
    take(j, "variant", variant, seen);
    take(j, "use_location", use_location, seen);
    take(j, "d_emb", d_emb, seen);
    take(j, "hidden_app", hidden_app, seen);
    take(j, "loc_hidden", loc_hidden, seen);
    take(j, "loc_dim", loc_dim, seen);
    take(j, "word_dim", word_dim, seen);
    take(j, "gru_hidden", gru_hidden, seen);
    take(j, "lang_head_hidden", lang_head_hidden, seen);
    take(j, "task", task, seen);
    take(j, "mode", mode, seen);
    take(j, "iou_threshold", iou_threshold, seen);
    take(j, "unrel_iou", unrel_iou, seen);
    take(j, "recall_at", recall_at, seen);
    take(j, "top_proposals", top_proposals, seen);
    take(j, "top_n", top_n, seen);
    take(j, "threads", threads, seen);
    if (j.contains("paths")) {
      seen.insert("paths");
      const Json& p = j.at("paths");
      std::set<std::string> pseen;
      take(p, "data", data, pseen);
      take(p, "vocab", vocab, pseen);
      take(p, "words", words, pseen);
      take(p, "zero_shot_against", zero_shot_against, pseen);
      take(p, "detections", detections, pseen);
      take(p, "spec", spec, pseen);
      for (const auto& [k, v] : p.items()) {
        if (!pseen.count(k)) throw ConfigError("unknown config key 'paths." + k + "'");
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [k, v] : j.items()) {
    if (!seen.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
}

ModelConfig RunConfig::model_config(std::size_t n_app, std::size_t n_classes,
                                    std::size_t n_predicates) const {
  ModelConfig mc;
  mc.visual.n_app = n_app;
  mc.visual.d_emb = d_emb;
  mc.visual.hidden_app = hidden_app;
  mc.visual.loc_hidden = loc_hidden;
  mc.visual.loc_dim = loc_dim;
  mc.visual.n_predicates = n_predicates;
  mc.visual.C = C;
  mc.visual.use_background = use_background;
  mc.visual.score_mode = parse_score_mode(score_mode);
  mc.visual.combiner = parse_combiner(variant);
  mc.visual.use_location = use_location;
  mc.n_classes = n_classes;
  mc.use_language = use_language;
  mc.word_dim = word_dim;
  mc.gru_hidden = gru_hidden;
  mc.lang_head_hidden = lang_head_hidden;
  mc.alpha = alpha;
  mc.validate();
  return mc;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string fingerprint(const std::string& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(read_file(path))));
  return buf;
}

std::size_t feature_dim(const Dataset& data) {
  for (const auto& rec : data) {
    if (!rec.objects.empty()) return rec.objects.front().feature.size();
  }
  throw ValidationError("dataset has no objects; the appearance feature size is unknown");
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required ") + flag);
}

DatasetLimits checkpoint_limits(const ModelConfig& mc) {
  DatasetLimits l;
  l.n_classes = mc.n_classes;
  l.n_predicates = mc.visual.n_predicates;
  l.n_app = mc.visual.n_app;
  return l;
}

void check_vocab(const RunConfig& cfg, const ModelConfig& mc) {
  if (cfg.vocab.empty()) return;
  const Vocab v = Vocab::load(cfg.vocab);
  if (v.classes.size() != mc.n_classes || v.predicates.size() != mc.visual.n_predicates) {
    throw ConfigError("vocab " + cfg.vocab + " does not match the checkpoint (" +
                      std::to_string(mc.n_classes) + " classes, " + std::to_string(mc.visual.n_predicates) +
                      " predicates)");
  }
}

Json save_doc(RelationModel& model, const RunConfig& cfg) {
  Json doc = checkpoint_to_json(model);
  doc["run_config"] = cfg.to_json();
  return doc;
}

void write_atomic(const std::string& path, const Json& doc) {
  const std::string tmp = path + ".tmp";
  write_canonical_file(tmp, doc);
  std::filesystem::rename(tmp, path);
}

Json accuracy_json(const AccuracyReport& r) {
  return {{"correct", r.correct}, {"total", r.total}, {"accuracy", r.accuracy()}};
}

std::set<LabelTriple> relation_triples(const Dataset& data) { return label_triples(data); }

}  // namespace

Json cmd_train(const RunConfig& cfg, const std::string& out) {
  cfg.validate();
  require(cfg.data, "--data");
  require(cfg.vocab, "--vocab");
  require(out, "--out");
  const Vocab vocab = Vocab::load(cfg.vocab);
  const Dataset train = load_dataset(cfg.data, DatasetLimits::from_vocab(vocab));
  const std::size_t n_app = feature_dim(train);

  RunConfig eff = cfg;
  Tensor2 class_words;
  if (cfg.use_language) {
    const WordTable words = cfg.words.empty() ? WordTable::hashed(cfg.word_dim, vocab.classes)
                                              : WordTable::load(cfg.words);
    eff.word_dim = words.dim;
    class_words = Tensor2(vocab.classes.size(), words.dim);
    for (std::size_t c = 0; c < vocab.classes.size(); ++c) {
      const Vector w = words.lookup(vocab.classes[c]);
      std::copy(w.begin(), w.end(), class_words.row(c).begin());
    }
  }
  const ModelConfig mc = eff.model_config(n_app, vocab.classes.size(), vocab.predicates.size());
  RelationModel model(mc, std::move(class_words), eff.seed);

  TrainOptions opts;
  opts.seed = eff.seed;
  opts.epochs = eff.epochs;
  opts.lr = eff.lr;
  opts.batch_size = eff.batch_size;
  opts.sampling.neg_ratio = eff.neg_ratio;
  opts.sampling.iou_match = eff.iou_match;
  opts.sampling.budget = eff.budget;
  opts.sampling.use_background = eff.use_background;
  opts.sampling.n_predicates = mc.visual.n_predicates;

  write_atomic(out, save_doc(model, eff));
  const auto result = train_model(model, train, opts, [&](std::size_t, double) {
    write_atomic(out, save_doc(model, eff));
  });

  Json log;
  log["config"] = eff.to_json();
  log["model"] = model_config_to_json(mc);
  log["epoch_loss"] = result.epoch_loss;
  log["steps"] = result.steps;
  log["status"] = result.diverged ? "diverged" : "ok";
  if (result.diverged) log["failure"] = result.failure;
  return log;
}

Json cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  require(cfg.checkpoint, "--checkpoint");
  require(cfg.data, "--data");
  const RelationModel model = load_checkpoint(cfg.checkpoint);
  const ModelConfig& mc = model.config();
  check_vocab(cfg, mc);
  if (cfg.k_per_pair > mc.visual.n_predicates) {
    throw ConfigError("--k " + std::to_string(cfg.k_per_pair) + " exceeds the checkpoint's " +
                      std::to_string(mc.visual.n_predicates) + " predicates");
  }
  const auto limits = checkpoint_limits(mc);
  const Dataset data = load_dataset(cfg.data, limits);

  const bool unrel = cfg.task == "unrel";
  const bool gt_boxes = unrel ? parse_unrel_mode(cfg.mode) == UnrelMode::kWithGt
                              : localization_for(parse_task(cfg.task)) == Localization::kExact;
  if (gt_boxes && !cfg.detections.empty()) {
    throw ConfigError("task '" + cfg.task + "' scores ground-truth boxes; --detections does not apply");
  }
  std::map<std::string, const ImageRecord*> det_by_id;
  Dataset detections;
  if (!cfg.detections.empty()) {
    detections = load_dataset(cfg.detections, limits);
    for (const auto& d : detections) det_by_id[d.image_id] = &d;
  }
  Dataset proposals;
  proposals.reserve(data.size());
  for (const auto& rec : data) {
    if (cfg.detections.empty()) {
      proposals.push_back(rec);
      continue;
    }
    auto it = det_by_id.find(rec.image_id);
    ImageRecord p;
    if (it != det_by_id.end()) {
      p = *it->second;
    } else {
      p.image_id = rec.image_id;
      p.dims = rec.dims;
    }
    proposals.push_back(std::move(p));
  }

  std::optional<ZeroShotSplit> split;
  if (!cfg.zero_shot_against.empty()) split = split_zero_shot(load_dataset(cfg.zero_shot_against, limits), data);

  PredictOptions popts;
  popts.top_proposals = gt_boxes ? 0 : cfg.top_proposals;
  popts.threads = cfg.threads;

  Json metrics;
  if (!unrel) {
    const Task task = parse_task(cfg.task);
    const auto scores = score_dataset(model, proposals, popts);
    std::vector<std::vector<ScoredTriplet>> ranked(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      ranked[i] = rank_predictions(data[i].image_id, scores[i], cfg.k_per_pair);
    }
    EvalConfig ec;
    ec.task = task;
    ec.k_per_pair = cfg.k_per_pair;
    ec.recall_at = cfg.recall_at;
    ec.iou_threshold = cfg.iou_threshold;
    auto block = [&](const Dataset& gt_data) {
      std::vector<std::vector<GtTriplet>> gt;
      for (const auto& rec : gt_data) gt.push_back(gt_triplets(rec));
      Json b = dataset_recall(ranked, gt, ec).to_json();
      if (gt_boxes) {
        b["predicate_accuracy"] = accuracy_json(predicate_accuracy(model, gt_data));
      } else {
        const double map_rel = predicate_map(ranked, gt, Localization::kBothBoxes, cfg.iou_threshold);
        const double map_phr = predicate_map(ranked, gt, Localization::kUnionBox, cfg.iou_threshold);
        EvalConfig rel = ec;
        rel.task = Task::kRelationship;
        rel.recall_at = {50};
        const double r50 = dataset_recall(ranked, gt, rel).recall.at(50);
        b["map_rel"] = map_rel;
        b["map_phr"] = map_phr;
        b["open_images_score"] = open_images_score(r50, map_rel, map_phr);
      }
      return b;
    };
    metrics["all"] = block(data);
    if (split) {
      metrics["seen"] = block(split->seen);
      metrics["zero_shot"] = block(split->zero_shot);
      metrics["seen_relations"] = split->seen_count;
      metrics["zero_shot_relations"] = split->zero_shot_count;
    }
  } else {
    const UnrelMode mode = parse_unrel_mode(cfg.mode);
    std::vector<UnrelCandidate> candidates;
    if (mode == UnrelMode::kWithGt) {
      for (const auto& rec : proposals) {
        for (std::size_t si = 0; si < rec.objects.size(); ++si) {
          for (std::size_t oi = 0; oi < rec.objects.size(); ++oi) {
            if (si == oi) continue;
            const auto& s = rec.objects[si];
            const auto& o = rec.objects[oi];
            candidates.push_back({rec.image_id,
                                  {s.object_id, s.class_id, s.box, s.score},
                                  {o.object_id, o.class_id, o.box, o.score},
                                  predicate_probabilities(model, build_triplet_features(rec, si, oi),
                                                          s.class_id, o.class_id)});
          }
        }
      }
    } else {
      const auto scores = score_dataset(model, proposals, popts);
      for (std::size_t i = 0; i < proposals.size(); ++i) {
        for (const auto& ps : scores[i]) {
          candidates.push_back({proposals[i].image_id, ps.subject, ps.object, ps.predicate_scores});
        }
      }
    }
    std::vector<UnrelGt> gt;
    for (const auto& rec : data) {
      for (const auto& r : rec.relations) {
        const auto* s = rec.find(r.subject_id);
        const auto* o = rec.find(r.object_id);
        gt.push_back({rec.image_id, {s->class_id, r.predicate_id, o->class_id}, s->box, o->box});
      }
    }
    const auto all = relation_triples(data);
    const std::vector<LabelTriple> queries(all.begin(), all.end());
    metrics["all"] = unrel_map(queries, candidates, gt, mode, cfg.unrel_iou).to_json();
    if (split) {
      const auto zs = relation_triples(split->zero_shot);
      const std::vector<LabelTriple> zq(zs.begin(), zs.end());
      metrics["zero_shot"] = unrel_map(zq, candidates, gt, mode, cfg.unrel_iou).to_json();
    }
  }

  Json report;
  report["config"] = cfg.to_json();
  report["checkpoint_fingerprint"] = fingerprint(cfg.checkpoint);
  report["model"] = model_config_to_json(mc);
  report["task"] = cfg.task;
  report["images"] = data.size();
  report["metrics"] = std::move(metrics);
  return report;
}

Json cmd_predict(const RunConfig& cfg) {
  cfg.validate();
  require(cfg.checkpoint, "--checkpoint");
  require(cfg.data, "--data");
  const RelationModel model = load_checkpoint(cfg.checkpoint);
  check_vocab(cfg, model.config());
  const Dataset data = load_dataset(cfg.data, checkpoint_limits(model.config()));
  PredictOptions popts;
  popts.top_proposals = cfg.top_proposals;
  popts.threads = cfg.threads;
  const auto scores = score_dataset(model, data, popts);
  Json graphs = Json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto ranked = rank_predictions(data[i].image_id, scores[i], cfg.k_per_pair);
    graphs.push_back(emit_scene_graph(data[i], ranked, cfg.top_n).to_json());
  }
  Json doc;
  doc["config"] = cfg.to_json();
  doc["checkpoint_fingerprint"] = fingerprint(cfg.checkpoint);
  doc["graphs"] = std::move(graphs);
  return doc;
}

Json cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  require(out_dir, "--out");
  SyntheticSpec spec;
  if (!cfg.spec.empty()) {
    spec = SyntheticSpec::from_json(read_json_file(cfg.spec));
  } else {
    spec.seed = cfg.seed;
  }
  const auto data = generate_synthetic(spec);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  save_dataset(data.train, (dir / "train.jsonl").string());
  save_dataset(data.test, (dir / "test.jsonl").string());
  data.vocab.save((dir / "vocab.json").string());
  write_canonical_file((dir / "truth.json").string(), {{"spec", spec.to_json()}, {"truth", data.truth.to_json()}});
  std::size_t train_rel = 0;
  std::size_t test_rel = 0;
  for (const auto& r : data.train) train_rel += r.relations.size();
  for (const auto& r : data.test) test_rel += r.relations.size();
  Json summary;
  summary["spec"] = spec.to_json();
  summary["train_images"] = data.train.size();
  summary["test_images"] = data.test.size();
  summary["train_relations"] = train_rel;
  summary["test_relations"] = test_rel;
  summary["files"] = {"train.jsonl", "test.jsonl", "vocab.json", "truth.json"};
  return summary;
}

Json cmd_gradcheck(const RunConfig& cfg) {
  cfg.validate();
  // Compact dimensions keep the finite differences well above round-off.
  ModelConfig mc;
  mc.visual.n_app = 8;
  mc.visual.hidden_app = 16;
  mc.visual.d_emb = 8;
  mc.visual.loc_hidden = 8;
  mc.visual.loc_dim = 4;
  mc.visual.n_predicates = 5;
  mc.visual.C = cfg.C;
  mc.visual.use_background = cfg.use_background;
  mc.visual.score_mode = parse_score_mode(cfg.score_mode);
  mc.visual.combiner = parse_combiner(cfg.variant);
  mc.visual.use_location = cfg.use_location;
  mc.n_classes = 4;
  mc.word_dim = 6;
  mc.gru_hidden = 5;
  mc.lang_head_hidden = 12;
  mc.alpha = cfg.alpha;

  Json rows = Json::array();
  bool pass = true;
  for (const bool lang : {false, true}) {
    mc.use_language = lang;
    const GradReport r = check_model_gradients(mc, cfg.seed);
    const bool ok = r.max_rel_error < kGradcheckTolerance;
    pass = pass && ok;
    rows.push_back({{"model", lang ? "joint" : "visual"},
                    {"max_rel_error", r.max_rel_error},
                    {"param", r.param_name},
                    {"analytic", r.analytic},
                    {"numeric", r.numeric},
                    {"checked", r.checked},
                    {"pass", ok}});
  }
  Json doc;
  doc["config"] = cfg.to_json();
  doc["tolerance"] = kGradcheckTolerance;
  doc["results"] = std::move(rows);
  doc["pass"] = pass;
  return doc;
}

namespace {

struct Overrides {
  std::string profile;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, k, top_proposals, top_n, threads, budget;
  std::optional<double> lr, C, alpha, neg_ratio, iou;
  std::optional<std::string> score_mode, variant, task, mode;
  std::optional<std::string> data, vocab, words, checkpoint, zero_shot_against, detections, spec;
  bool no_language = false;
  bool background = false;
  bool no_location = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--profile", o.profile, "Hyperparameter bundle: vrd | vg | openimages");
  app->add_option("--config", o.config, "JSON config mirroring the echoed run config");
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--threads", o.threads, "Worker threads for scoring");
}

void add_model_flags(CLI::App* app, Overrides& o) {
  app->add_option("--epochs", o.epochs, "Training epochs");
  app->add_option("--lr", o.lr, "SGD learning rate");
  app->add_option("--batch-size", o.batch_size, "Mini-batch size");
  app->add_option("--C", o.C, "Norm penalty weight");
  app->add_option("--alpha", o.alpha, "Visual / language weighting");
  app->add_option("--neg-ratio", o.neg_ratio, "Negatives per positive with --background");
  app->add_option("--budget", o.budget, "Sampled triplets per image");
  app->add_option("--score-mode", o.score_mode, "sum | product");
  app->add_option("--variant", o.variant, "uvtranse | summation | vtranse | appearance");
  app->add_flag("--no-language", o.no_language, "Visual-only model");
  app->add_flag("--background", o.background, "Train a background class on negative pairs");
  app->add_flag("--no-location", o.no_location, "Drop the location features");
}

void add_eval_flags(CLI::App* app, Overrides& o) {
  app->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  app->add_option("--k", o.k, "Predicates kept per pair");
  app->add_option("--top-proposals", o.top_proposals, "Proposal cap per image (0 = all)");
  app->add_option("--iou", o.iou, "IoU threshold for detection tasks");
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg;
  std::optional<Json> file;
  if (!o.config.empty()) file = read_json_file(o.config);
  std::string profile = o.profile;
  if (profile.empty() && file && file->contains("profile")) profile = file->at("profile").get<std::string>();
  cfg.apply_profile(profile.empty() ? "vrd" : profile);
  if (file) cfg.merge_json(*file);
  if (!o.profile.empty()) cfg.profile = o.profile;
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.k) cfg.k_per_pair = *o.k;
  if (o.top_proposals) cfg.top_proposals = *o.top_proposals;
  if (o.top_n) cfg.top_n = *o.top_n;
  if (o.threads) cfg.threads = *o.threads;
  if (o.budget) cfg.budget = *o.budget;
  if (o.lr) cfg.lr = *o.lr;
  if (o.C) cfg.C = *o.C;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.neg_ratio) cfg.neg_ratio = *o.neg_ratio;
  if (o.iou) cfg.iou_threshold = *o.iou;
  if (o.score_mode) cfg.score_mode = *o.score_mode;
  if (o.variant) cfg.variant = *o.variant;
  if (o.task) cfg.task = *o.task;
  if (o.mode) cfg.mode = *o.mode;
  if (o.data) cfg.data = *o.data;
  if (o.vocab) cfg.vocab = *o.vocab;
  if (o.words) cfg.words = *o.words;
  if (o.checkpoint) cfg.checkpoint = *o.checkpoint;
  if (o.zero_shot_against) cfg.zero_shot_against = *o.zero_shot_against;
  if (o.detections) cfg.detections = *o.detections;
  if (o.spec) cfg.spec = *o.spec;
  if (o.no_language) cfg.use_language = false;
  if (o.background) cfg.use_background = true;
  if (o.no_location) cfg.use_location = false;
  cfg.validate();
  return cfg;
}

void emit(const Json& doc, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << canonical_dump(doc) << '\n';
  } else {
    write_canonical_file(out_path, doc);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"UVTransE visual relationship detection toolkit", "uvtranse"};
  app.require_subcommand(1);
  Overrides o;

  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(train, o);
  add_model_flags(train, o);
  train->add_option("--data", o.data, "Training dataset (JSONL)");
  train->add_option("--vocab", o.vocab, "Vocabulary file");
  train->add_option("--words", o.words, "Word vectors (GloVe text format)");
  train->add_option("--out", o.out, "Checkpoint path");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, o);
  add_eval_flags(eval, o);
  eval->add_option("--data", o.data, "Test dataset (JSONL)");
  eval->add_option("--vocab", o.vocab, "Vocabulary file checked against the checkpoint");
  eval->add_option("--task", o.task, "predicate | phrase | relationship | predcls | phrcls | sggen | unrel");
  eval->add_option("--mode", o.mode, "Retrieval localization: with_gt | union | subj | subj_obj");
  eval->add_option("--zero-shot-against", o.zero_shot_against, "Training dataset defining seen triples");
  eval->add_option("--detections", o.detections, "Detected objects (JSONL) for detection tasks");
  eval->add_option("--out", o.out, "Report path (stdout when omitted)");

  auto* predict = app.add_subcommand("predict", "Emit scene graphs");
  add_common(predict, o);
  add_eval_flags(predict, o);
  predict->add_option("--data", o.data, "Dataset of detected objects (JSONL)");
  predict->add_option("--vocab", o.vocab, "Vocabulary file checked against the checkpoint");
  predict->add_option("--top-n", o.top_n, "Edges per scene graph");
  predict->add_option("--out", o.out, "Output path (stdout when omitted)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, o);
  synth->add_option("--spec", o.spec, "Synthetic spec (JSON)");
  synth->add_option("--out", o.out, "Output directory")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  add_common(grad, o);
  add_model_flags(grad, o);
  grad->add_option("--out", o.out, "Report path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (train->parsed()) {
      const Json log = cmd_train(cfg, o.out);
      out << canonical_dump(log) << '\n';
      if (log.at("status") != "ok") {
        err << "error: training diverged: " << log.at("failure").get<std::string>()
            << " (last good checkpoint kept at " << o.out << ")\n";
        return kExitNumeric;
      }
    } else if (eval->parsed()) {
      emit(cmd_eval(cfg), o.out, out);
    } else if (predict->parsed()) {
      emit(cmd_predict(cfg), o.out, out);
    } else if (synth->parsed()) {
      out << canonical_dump(cmd_synth(cfg, o.out)) << '\n';
    } else if (grad->parsed()) {
      const Json doc = cmd_gradcheck(cfg);
      emit(doc, o.out, out);
      if (!doc.at("pass").get<bool>()) {
        err << "error: gradient check exceeded " << kGradcheckTolerance << '\n';
        return kExitNumeric;
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ValidationError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const TrainingError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace uvt
