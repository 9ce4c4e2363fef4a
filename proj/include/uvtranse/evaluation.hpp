// SPDX-License-Identifier: Apache-2.0
//
// Ranking and metric protocols: top-k-per-pair ranking, greedy Recall@N for
// the predicate / phrase / relationship detection families, retrieval mAP with
// four localization modes, per-predicate mAP, the Open Images composite score,
// attribute scoring and scene-graph emission.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uvtranse/canonical_json.hpp"
#include "uvtranse/dataio.hpp"
#include "uvtranse/geometry.hpp"

namespace uvt {

enum class Task { kPredicate, kPhrase, kRelationship, kPredCls, kPhrCls, kSGGen };

Task parse_task(const std::string& name);
std::string to_string(Task task);

/// How a prediction is localized against a ground-truth triplet.
enum class Localization {
  kExact,     // boxes identical (ground-truth boxes given)
  kUnionBox,  // IoU of the two union boxes
  kBothBoxes  // subject IoU and object IoU
};

Localization localization_for(Task task);

struct DetectedObject {
  ObjectId object_id = 0;
  std::size_t class_id = 0;
  Box box;
  double score = 1.0;
};

struct ScoredTriplet {
  std::string image_id;
  DetectedObject subject;
  DetectedObject object;
  std::size_t predicate_id = 0;
  double score = 0.0;
};

/// Scores of every (non-background) predicate for one ordered object pair.
struct PairScores {
  DetectedObject subject;
  DetectedObject object;
  Vector predicate_scores;
};

struct GtTriplet {
  DetectedObject subject;
  std::size_t predicate_id = 0;
  DetectedObject object;
};

std::vector<GtTriplet> gt_triplets(const ImageRecord& rec);

struct EvalConfig {
  Task task = Task::kPredicate;
  std::size_t k_per_pair = 1;
  std::vector<std::size_t> recall_at = {50, 100};
  double iou_threshold = 0.5;

  void validate() const;
};

/// Keeps the top `k_per_pair` predicates of every pair, then sorts the image's
/// predictions by (-score, subject_id, object_id, predicate_id).
std::vector<ScoredTriplet> rank_predictions(const std::string& image_id,
                                            std::span<const PairScores> pairs, std::size_t k_per_pair);

/// Overlap used to compare a prediction with a ground truth; negative when
/// the localization test fails.
double localization_overlap(const ScoredTriplet& pred, const GtTriplet& gt, Localization loc,
                            double iou_threshold);

/// Number of ground-truth triplets matched by the top-N predictions. Each
/// prediction, in rank order, takes the still-unmatched ground truth with the
/// same labels and the largest passing overlap (lowest index on ties).
std::size_t count_matches(std::span<const ScoredTriplet> ranked, std::span<const GtTriplet> gt,
                          Localization loc, std::size_t top_n, double iou_threshold);

/// matched / |gt| for one image; nullopt when the image has no ground truth.
std::optional<double> match_and_recall(std::span<const ScoredTriplet> ranked,
                                       std::span<const GtTriplet> gt, Task task, std::size_t top_n,
                                       double iou_threshold);

struct RecallReport {
  std::map<std::size_t, double> recall;
  std::map<std::size_t, std::size_t> matched;
  std::size_t gt_total = 0;
  std::size_t images = 0;

  Json to_json() const;
};

/// Micro-averaged Recall@N over images (total matched / total ground truth);
/// images without ground truth are skipped.
RecallReport dataset_recall(std::span<const std::vector<ScoredTriplet>> ranked,
                            std::span<const std::vector<GtTriplet>> gt, const EvalConfig& cfg);

/// Non-interpolated AP: sum of precision at each hit divided by n_positives.
double average_precision(const std::vector<bool>& hits, std::size_t n_positives);

enum class UnrelMode { kWithGt, kUnion, kSubj, kSubjObj };

UnrelMode parse_unrel_mode(const std::string& name);
std::string to_string(UnrelMode mode);

struct UnrelCandidate {
  std::string image_id;
  DetectedObject subject;
  DetectedObject object;
  Vector predicate_scores;  // indexed by predicate id
};

struct UnrelGt {
  std::string image_id;
  LabelTriple triple;
  Box subject;
  Box object;
};

struct UnrelResult {
  double map = 0.0;
  std::vector<LabelTriple> evaluated;
  std::vector<double> average_precisions;
  std::vector<LabelTriple> excluded;  // queries without ground truth

  Json to_json() const;
};

/// Retrieval mAP over triplet queries. Candidates whose classes agree with a
/// query are ranked dataset-wide by the query predicate's score; a candidate
/// is a hit when it localizes a not-yet-retrieved ground-truth instance of the
/// query under `mode`.
UnrelResult unrel_map(std::span<const LabelTriple> queries, std::span<const UnrelCandidate> candidates,
                      std::span<const UnrelGt> gt, UnrelMode mode, double iou_threshold = 0.3);

/// Mean over predicates with ground truth of the per-predicate AP, ranking all
/// predictions of that predicate across images.
double predicate_map(std::span<const std::vector<ScoredTriplet>> ranked,
                     std::span<const std::vector<GtTriplet>> gt, Localization loc,
                     double iou_threshold);

/// 0.2 * R@50 + 0.4 * mAP_rel + 0.4 * mAP_phr.
double open_images_score(double recall50_rel, double map_rel, double map_phr);

/// z_s * z_a.
double attribute_score(double z_s, double z_a);

struct SceneGraph {
  struct Node {
    ObjectId object_id = 0;
    std::size_t class_id = 0;
    Box box;
    double score = 0.0;
  };
  struct Edge {
    ObjectId subject_id = 0;
    ObjectId object_id = 0;
    std::size_t predicate_id = 0;
    double score = 0.0;
  };
  std::string image_id;
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  Json to_json() const;
};

/// Nodes are all objects of the image (sorted by id); edges are the first
/// `top_n` ranked triplets.
SceneGraph emit_scene_graph(const ImageRecord& image, std::span<const ScoredTriplet> ranked,
                            std::size_t top_n);

}  // namespace uvt
