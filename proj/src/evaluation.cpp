// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "uvtranse/errors.hpp"

namespace uvt {

Task parse_task(const std::string& name) {
  if (name == "predicate") return Task::kPredicate;
  if (name == "phrase") return Task::kPhrase;
  if (name == "relationship") return Task::kRelationship;
  if (name == "predcls") return Task::kPredCls;
  if (name == "phrcls") return Task::kPhrCls;
  if (name == "sggen") return Task::kSGGen;
  throw ConfigError("unknown task '" + name + "'");
}

std::string to_string(Task task) {
  switch (task) {
    case Task::kPredicate: return "predicate";
    case Task::kPhrase: return "phrase";
    case Task::kRelationship: return "relationship";
    case Task::kPredCls: return "predcls";
    case Task::kPhrCls: return "phrcls";
    case Task::kSGGen: return "sggen";
  }
  return "predicate";
}

Localization localization_for(Task task) {
  switch (task) {
    case Task::kPredicate:
    case Task::kPredCls: return Localization::kExact;
    case Task::kPhrase: return Localization::kUnionBox;
    case Task::kRelationship:
    case Task::kPhrCls:
    case Task::kSGGen: return Localization::kBothBoxes;
  }
  return Localization::kExact;
}

std::vector<GtTriplet> gt_triplets(const ImageRecord& rec) {
  std::vector<GtTriplet> out;
  out.reserve(rec.relations.size());
  for (const auto& r : rec.relations) {
    const auto* s = rec.find(r.subject_id);
    const auto* o = rec.find(r.object_id);
    if (!s || !o) throw ValidationError("image " + rec.image_id + ": dangling relation endpoint");
    out.push_back({{s->object_id, s->class_id, s->box, s->score},
                   r.predicate_id,
                   {o->object_id, o->class_id, o->box, o->score}});
  }
  return out;
}

void EvalConfig::validate() const {
  if (k_per_pair < 1) throw ConfigError("k_per_pair must be >= 1");
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("IoU threshold must lie in (0, 1]");
  if (recall_at.empty()) throw ConfigError("at least one recall cut-off is required");
}

namespace {

bool rank_before(const ScoredTriplet& a, const ScoredTriplet& b) {
  return std::make_tuple(-a.score, a.subject.object_id, a.object.object_id, a.predicate_id) <
         std::make_tuple(-b.score, b.subject.object_id, b.object.object_id, b.predicate_id);
}

}  // namespace

std::vector<ScoredTriplet> rank_predictions(const std::string& image_id,
                                            std::span<const PairScores> pairs, std::size_t k_per_pair) {
  if (k_per_pair < 1) throw ConfigError("k_per_pair must be >= 1");
  std::vector<ScoredTriplet> out;
  for (const auto& pair : pairs) {
    std::vector<std::size_t> order(pair.predicate_scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return pair.predicate_scores[a] > pair.predicate_scores[b];
    });
    const std::size_t keep = std::min(k_per_pair, order.size());
    for (std::size_t i = 0; i < keep; ++i) {
      out.push_back({image_id, pair.subject, pair.object, order[i], pair.predicate_scores[order[i]]});
    }
  }
  std::sort(out.begin(), out.end(), rank_before);
  return out;
}

double localization_overlap(const ScoredTriplet& pred, const GtTriplet& gt, Localization loc,
                            double iou_threshold) {
  switch (loc) {
    case Localization::kExact:
      return pred.subject.box == gt.subject.box && pred.object.box == gt.object.box ? 1.0 : -1.0;
    case Localization::kUnionBox: {
      const double v = iou(union_box(pred.subject.box, pred.object.box), union_box(gt.subject.box, gt.object.box));
      return v >= iou_threshold ? v : -1.0;
    }
    case Localization::kBothBoxes: {
      const double vs = iou(pred.subject.box, gt.subject.box);
      const double vo = iou(pred.object.box, gt.object.box);
      return vs >= iou_threshold && vo >= iou_threshold ? std::min(vs, vo) : -1.0;
    }
  }
  return -1.0;
}

std::size_t count_matches(std::span<const ScoredTriplet> ranked, std::span<const GtTriplet> gt,
                          Localization loc, std::size_t top_n, double iou_threshold) {
  std::vector<bool> used(gt.size(), false);
  std::size_t matched = 0;
  const std::size_t n = std::min(top_n, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = ranked[i];
    double best = -1.0;
    std::size_t best_j = gt.size();
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (used[j]) continue;
      const auto& g = gt[j];
      if (g.predicate_id != p.predicate_id || g.subject.class_id != p.subject.class_id ||
          g.object.class_id != p.object.class_id) {
        continue;
      }
      const double ov = localization_overlap(p, g, loc, iou_threshold);
      if (ov >= 0.0 && ov > best) {
        best = ov;
        best_j = j;
      }
    }
    if (best_j < gt.size()) {
      used[best_j] = true;
      ++matched;
    }
  }
  return matched;
}

std::optional<double> match_and_recall(std::span<const ScoredTriplet> ranked,
                                       std::span<const GtTriplet> gt, Task task, std::size_t top_n,
                                       double iou_threshold) {
  if (gt.empty()) return std::nullopt;
  const auto m = count_matches(ranked, gt, localization_for(task), top_n, iou_threshold);
  return static_cast<double>(m) / static_cast<double>(gt.size());
}

Json RecallReport::to_json() const {
  Json j;
  Json r = Json::object();
  Json m = Json::object();
  for (const auto& [n, v] : recall) r[std::to_string(n)] = v;
  for (const auto& [n, v] : matched) m[std::to_string(n)] = v;
  j["recall"] = std::move(r);
  j["matched"] = std::move(m);
  j["gt_total"] = gt_total;
  j["images"] = images;
  return j;
}

RecallReport dataset_recall(std::span<const std::vector<ScoredTriplet>> ranked,
                            std::span<const std::vector<GtTriplet>> gt, const EvalConfig& cfg) {
  cfg.validate();
  if (ranked.size() != gt.size()) throw ShapeError("dataset_recall: one prediction list per image");
  RecallReport rep;
  const auto loc = localization_for(cfg.task);
  for (std::size_t n : cfg.recall_at) rep.matched[n] = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i].empty()) continue;
    ++rep.images;
    rep.gt_total += gt[i].size();
    for (std::size_t n : cfg.recall_at) {
      rep.matched[n] += count_matches(ranked[i], gt[i], loc, n, cfg.iou_threshold);
    }
  }
  for (std::size_t n : cfg.recall_at) {
    rep.recall[n] = rep.gt_total == 0 ? 0.0
                                      : static_cast<double>(rep.matched[n]) / static_cast<double>(rep.gt_total);
  }
  return rep;
}

double average_precision(const std::vector<bool>& hits, std::size_t n_positives) {
  if (n_positives == 0) return 0.0;
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    if (!hits[k]) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(n_positives);
}

UnrelMode parse_unrel_mode(const std::string& name) {
  if (name == "with_gt") return UnrelMode::kWithGt;
  if (name == "union") return UnrelMode::kUnion;
  if (name == "subj") return UnrelMode::kSubj;
  if (name == "subj_obj") return UnrelMode::kSubjObj;
  throw ConfigError("unknown retrieval mode '" + name + "'");
}

std::string to_string(UnrelMode mode) {
  switch (mode) {
    case UnrelMode::kWithGt: return "with_gt";
    case UnrelMode::kUnion: return "union";
    case UnrelMode::kSubj: return "subj";
    case UnrelMode::kSubjObj: return "subj_obj";
  }
  return "with_gt";
}

Json UnrelResult::to_json() const {
  Json j;
  j["map"] = map;
  Json q = Json::array();
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    const auto& t = evaluated[i];
    q.push_back({{"query", {t.subject_class, t.predicate, t.object_class}}, {"ap", average_precisions[i]}});
  }
  j["queries"] = std::move(q);
  Json ex = Json::array();
  for (const auto& t : excluded) ex.push_back({t.subject_class, t.predicate, t.object_class});
  j["excluded"] = std::move(ex);
  return j;
}

namespace {

auto box_key(const Box& b) { return std::make_tuple(b.x, b.y, b.w, b.h); }

double unrel_overlap(const UnrelCandidate& c, const UnrelGt& g, UnrelMode mode, double thr) {
  switch (mode) {
    case UnrelMode::kWithGt:
      return c.subject.box == g.subject && c.object.box == g.object ? 1.0 : -1.0;
    case UnrelMode::kUnion: {
      const double v = iou(union_box(c.subject.box, c.object.box), union_box(g.subject, g.object));
      return v >= thr ? v : -1.0;
    }
    case UnrelMode::kSubj: {
      const double v = iou(c.subject.box, g.subject);
      return v >= thr ? v : -1.0;
    }
    case UnrelMode::kSubjObj: {
      const double vs = iou(c.subject.box, g.subject);
      const double vo = iou(c.object.box, g.object);
      return vs >= thr && vo >= thr ? std::min(vs, vo) : -1.0;
    }
  }
  return -1.0;
}

}  // namespace

UnrelResult unrel_map(std::span<const LabelTriple> queries, std::span<const UnrelCandidate> candidates,
                      std::span<const UnrelGt> gt, UnrelMode mode, double iou_threshold) {
  UnrelResult res;
  double sum = 0.0;
  for (const auto& q : queries) {
    std::vector<std::size_t> gt_idx;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt[j].triple == q) gt_idx.push_back(j);
    }
    if (gt_idx.empty()) {
      res.excluded.push_back(q);
      continue;
    }
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto& c = candidates[i];
      if (c.subject.class_id == q.subject_class && c.object.class_id == q.object_class &&
          q.predicate < c.predicate_scores.size()) {
        cand.push_back(i);
      }
    }
    std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
      const auto& ca = candidates[a];
      const auto& cb = candidates[b];
      return std::make_tuple(-ca.predicate_scores[q.predicate], ca.image_id, box_key(ca.subject.box),
                             box_key(ca.object.box)) <
             std::make_tuple(-cb.predicate_scores[q.predicate], cb.image_id, box_key(cb.subject.box),
                             box_key(cb.object.box));
    });
    std::vector<bool> used(gt_idx.size(), false);
    std::vector<bool> hits;
    hits.reserve(cand.size());
    for (std::size_t i : cand) {
      const auto& c = candidates[i];
      double best = -1.0;
      std::size_t best_k = gt_idx.size();
      for (std::size_t k = 0; k < gt_idx.size(); ++k) {
        const auto& g = gt[gt_idx[k]];
        if (used[k] || g.image_id != c.image_id) continue;
        const double ov = unrel_overlap(c, g, mode, iou_threshold);
        if (ov >= 0.0 && ov > best) {
          best = ov;
          best_k = k;
        }
      }
      if (best_k < gt_idx.size()) used[best_k] = true;
      hits.push_back(best_k < gt_idx.size());
    }
    const double ap = average_precision(hits, gt_idx.size());
    res.evaluated.push_back(q);
    res.average_precisions.push_back(ap);
    sum += ap;
  }
  res.map = res.evaluated.empty() ? 0.0 : sum / static_cast<double>(res.evaluated.size());
  return res;
}

double predicate_map(std::span<const std::vector<ScoredTriplet>> ranked,
                     std::span<const std::vector<GtTriplet>> gt, Localization loc,
                     double iou_threshold) {
  if (ranked.size() != gt.size()) throw ShapeError("predicate_map: one prediction list per image");
  std::set<std::size_t> predicates;
  for (const auto& image : gt) {
    for (const auto& g : image) predicates.insert(g.predicate_id);
  }
  if (predicates.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t p : predicates) {
    struct Entry {
      double score;
      std::size_t image;
      const ScoredTriplet* pred;
    };
    std::vector<Entry> entries;
    std::size_t n_gt = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      for (const auto& g : gt[i]) n_gt += g.predicate_id == p;
      for (const auto& t : ranked[i]) {
        if (t.predicate_id == p) entries.push_back({t.score, i, &t});
      }
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return std::make_tuple(-a.score, a.image, a.pred->subject.object_id, a.pred->object.object_id) <
             std::make_tuple(-b.score, b.image, b.pred->subject.object_id, b.pred->object.object_id);
    });
    std::vector<std::vector<bool>> used(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) used[i].assign(gt[i].size(), false);
    std::vector<bool> hits;
    for (const auto& e : entries) {
      const auto& image_gt = gt[e.image];
      double best = -1.0;
      std::size_t best_j = image_gt.size();
      for (std::size_t j = 0; j < image_gt.size(); ++j) {
        const auto& g = image_gt[j];
        if (used[e.image][j] || g.predicate_id != p || g.subject.class_id != e.pred->subject.class_id ||
            g.object.class_id != e.pred->object.class_id) {
          continue;
        }
        const double ov = localization_overlap(*e.pred, g, loc, iou_threshold);
        if (ov >= 0.0 && ov > best) {
          best = ov;
          best_j = j;
        }
      }
      if (best_j < image_gt.size()) used[e.image][best_j] = true;
      hits.push_back(best_j < image_gt.size());
    }
    sum += average_precision(hits, n_gt);
  }
  return sum / static_cast<double>(predicates.size());
}

double open_images_score(double recall50_rel, double map_rel, double map_phr) {
  return 0.2 * recall50_rel + 0.4 * map_rel + 0.4 * map_phr;
}

double attribute_score(double z_s, double z_a) { return z_s * z_a; }

Json SceneGraph::to_json() const {
  Json j;
  j["image_id"] = image_id;
  Json ns = Json::array();
  for (const auto& n : nodes) {
    ns.push_back({{"object_id", n.object_id},
                  {"class", n.class_id},
                  {"box", {n.box.x, n.box.y, n.box.w, n.box.h}},
                  {"score", n.score}});
  }
  Json es = Json::array();
  for (const auto& e : edges) {
    es.push_back({{"s", e.subject_id}, {"o", e.object_id}, {"predicate", e.predicate_id}, {"score", e.score}});
  }
  j["nodes"] = std::move(ns);
  j["edges"] = std::move(es);
  return j;
}

SceneGraph emit_scene_graph(const ImageRecord& image, std::span<const ScoredTriplet> ranked,
                            std::size_t top_n) {
  SceneGraph g;
  g.image_id = image.image_id;
  std::set<ObjectId> ids;
  for (const auto& o : image.objects) {
    g.nodes.push_back({o.object_id, o.class_id, o.box, o.score});
    ids.insert(o.object_id);
  }
  const std::size_t n = std::min(top_n, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = ranked[i];
    // Edge endpoints that are not among the image's objects still become nodes.
    for (const auto* d : {&t.subject, &t.object}) {
      if (ids.insert(d->object_id).second) g.nodes.push_back({d->object_id, d->class_id, d->box, d->score});
    }
    g.edges.push_back({t.subject.object_id, t.object.object_id, t.predicate_id, t.score});
  }
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const SceneGraph::Node& a, const SceneGraph::Node& b) { return a.object_id < b.object_id; });
  return g;
}

}  // namespace uvt
