// SPDX-License-Identifier: Apache-2.0
//
// Canonical dataset format and the data-side operations: loading with full
// validation, training-triplet sampling with background negatives, zero-shot
// splitting and a synthetic generator with a known additive structure.
//
// Dataset files are JSON lines. Line 1 is a header {"schema_version": 1, ...};
// every following line is one image record:
//   {"image_id": str, "width": W, "height": H,
//    "objects": [{"object_id", "class_id", "box": [x, y, w, h], "score", "feature": [...]}],
//    "relations": [[s_id, p_id, o_id], ...],
//    "attributes": [[o_id, a_id], ...],              (optional)
//    "union_features": {"s_id,o_id": [...], ...}}     (optional)
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "uvtranse/canonical_json.hpp"
#include "uvtranse/geometry.hpp"
#include "uvtranse/numkernel.hpp"
#include "uvtranse/rng.hpp"
#include "uvtranse/visual_model.hpp"

namespace uvt {

inline constexpr int kDatasetSchemaVersion = 1;

using ObjectId = std::int64_t;

struct ObjectInstance {
  ObjectId object_id = 0;
  std::size_t class_id = 0;
  Box box;
  double score = 1.0;
  Vector feature;

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

struct Relation {
  ObjectId subject_id = 0;
  std::size_t predicate_id = 0;
  ObjectId object_id = 0;

  friend bool operator==(const Relation&, const Relation&) = default;
};

struct Attribute {
  ObjectId object_id = 0;
  std::size_t attribute_id = 0;

  friend bool operator==(const Attribute&, const Attribute&) = default;
};

struct ImageRecord {
  std::string image_id;
  ImageDims dims;
  std::vector<ObjectInstance> objects;
  std::vector<Relation> relations;
  std::vector<Attribute> attributes;
  std::map<std::pair<ObjectId, ObjectId>, Vector> union_features;

  const ObjectInstance* find(ObjectId id) const;
  std::size_t index_of(ObjectId id) const;  // throws IndexError

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

using Dataset = std::vector<ImageRecord>;

struct Vocab {
  std::vector<std::string> classes;
  std::vector<std::string> predicates;
  std::vector<std::string> attributes;

  static Vocab load(const std::string& path);
  void save(const std::string& path) const;
  Json to_json() const;
};

/// Optional bounds checked by the loader on top of the structural invariants.
struct DatasetLimits {
  std::optional<std::size_t> n_classes;
  std::optional<std::size_t> n_predicates;
  std::optional<std::size_t> n_attributes;
  std::optional<std::size_t> n_app;

  static DatasetLimits from_vocab(const Vocab& vocab);
};

/// Throws ParseError (with line number) on malformed lines and
/// ValidationError (with image id and field) on invariant violations.
Dataset load_dataset(const std::string& path, const DatasetLimits& limits = {});
Dataset parse_dataset(const std::string& text, const DatasetLimits& limits = {},
                      const std::string& source = "<memory>");
void save_dataset(const Dataset& data, const std::string& path);
std::string dataset_to_string(const Dataset& data);

Json record_to_json(const ImageRecord& rec);
ImageRecord record_from_json(const Json& j);
void validate_record(const ImageRecord& rec, const DatasetLimits& limits);

/// Features of the ordered pair (subject, object). The union appearance
/// feature comes from rec.union_features when present, otherwise it is the
/// elementwise max of the two object features and `union_synthesized` is set.
TripletFeatures build_triplet_features(const ImageRecord& rec, std::size_t subject_index,
                                       std::size_t object_index);

struct SamplingOptions {
  double neg_ratio = 3.0;
  double iou_match = 0.5;
  std::size_t budget = 32;
  bool use_background = false;
  std::size_t n_predicates = 0;  // background target index
};

struct SampledTriplet {
  LabeledTriplet example;
  ObjectId subject_id = 0;
  ObjectId object_id = 0;
  bool positive = false;
};

/// Positives are ground-truth relations plus object pairs whose subject and
/// object boxes both overlap a ground-truth relation's boxes at IoU >=
/// iou_match (best summed IoU wins, ties to the lowest relation index).
/// Other pairs are background negatives, drawn only when use_background is
/// set. At most floor(budget / (1 + neg_ratio)) positives and the rest of the
/// budget in negatives are kept; without background up to `budget` positives.
std::vector<SampledTriplet> sample_training_triplets(const ImageRecord& rec,
                                                     const SamplingOptions& opts, Rng& rng);

/// seed XOR hash(image_id): per-image randomness independent of iteration order.
std::uint64_t image_seed(std::uint64_t seed, const std::string& image_id);

struct LabelTriple {
  std::size_t subject_class = 0;
  std::size_t predicate = 0;
  std::size_t object_class = 0;

  auto operator<=>(const LabelTriple&) const = default;
};

std::set<LabelTriple> label_triples(const Dataset& data);

struct ZeroShotSplit {
  Dataset seen;       // test records restricted to relations whose label triple occurs in train
  Dataset zero_shot;  // the complement
  std::size_t seen_count = 0;
  std::size_t zero_shot_count = 0;
};

ZeroShotSplit split_zero_shot(const Dataset& train, const Dataset& test);

struct SyntheticSpec {
  std::size_t n_classes = 20;
  std::size_t n_predicates = 10;
  std::size_t n_app = 32;
  double noise_sigma = 0.1;
  std::size_t images = 400;       // training images
  std::size_t test_images = 80;
  std::size_t objects_per_image = 10;
  std::size_t relations_per_image = 5;
  /// Explicit zero-shot label triples; when empty, `n_holdout` are drawn.
  std::vector<LabelTriple> holdout_pairs;
  std::size_t n_holdout = 20;
  /// Share of test relations drawn from the held-out triples.
  double holdout_fraction = 0.5;
  /// Predicates plausible for each ordered class pair in training (0 = all).
  std::size_t predicates_per_pair = 2;
  double prototype_scale = 1.0;
  double translation_scale = 1.0;
  double image_width = 640.0;
  double image_height = 480.0;
  std::uint64_t seed = 1;

  void validate() const;
  Json to_json() const;
  static SyntheticSpec from_json(const Json& j);
};

struct SyntheticTruth {
  Tensor2 prototypes;    // n_classes x n_app
  Tensor2 translations;  // n_predicates x n_app
  std::vector<LabelTriple> holdout;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> pair_predicates;

  Json to_json() const;
};

struct SyntheticData {
  Dataset train;
  Dataset test;
  Vocab vocab;
  SyntheticTruth truth;
};

/// Object features are class prototype + N(0, sigma); the union feature of a
/// related pair is subject + object + t_predicate + N(0, sigma), and of an
/// unrelated pair subject + object + N(0, sigma). Held-out triples occur only
/// in the test split.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace uvt
