// SPDX-License-Identifier: Apache-2.0
//
// Training loop and inference over datasets: epoch sampling, SGD, pairwise
// scoring of object proposals and predicate accuracy.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include "uvtranse/dataio.hpp"
#include "uvtranse/evaluation.hpp"
#include "uvtranse/relation_model.hpp"

namespace uvt {

struct TrainOptions {
  std::uint64_t seed = 1;
  std::size_t epochs = 20;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  SamplingOptions sampling;
};

struct TrainResult {
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
  bool diverged = false;
  std::string failure;
};

/// Called after each completed epoch with its index (0-based) and mean loss.
using EpochCallback = std::function<void(std::size_t, double)>;

/// Examples sampled for one epoch, in training order. The per-image sampling
/// stream depends only on (seed, epoch, image_id).
std::vector<LabeledTriplet> epoch_examples(const Dataset& train, const TrainOptions& opts,
                                           std::size_t epoch);

/// Mini-batch SGD. On a non-finite loss or gradient the run stops with
/// `diverged` set; parameters keep the values of the last successful step.
TrainResult train_model(RelationModel& model, const Dataset& train, const TrainOptions& opts,
                        const EpochCallback& on_epoch = {});

struct PredictOptions {
  std::size_t top_proposals = 0;  // 0 keeps every object
  std::size_t threads = 1;
};

/// The image's objects ordered by (-score, object_id), capped at `top`.
std::vector<std::size_t> top_proposals(const ImageRecord& rec, std::size_t top);

/// Non-background predicate scores of every ordered pair among the kept
/// proposals: the visual softmax (blended with the language softmax when the
/// model has one) combined with the object scores under the model's score mode.
std::vector<PairScores> score_pairs(const RelationModel& model, const ImageRecord& rec,
                                    const PredictOptions& opts);

/// Predicate probabilities of one pair without object-score weighting.
Vector predicate_probabilities(const RelationModel& model, const TripletFeatures& feats,
                               std::size_t subject_class, std::size_t object_class);

/// score_pairs over a dataset, split across `threads` workers by image index;
/// the result is independent of the thread count.
std::vector<std::vector<PairScores>> score_dataset(const RelationModel& model, const Dataset& data,
                                                   const PredictOptions& opts);

struct AccuracyReport {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

/// Top-1 predicate accuracy over ground-truth relations given ground-truth
/// boxes and classes. With `only`, counts just relations whose label triple is
/// in the set.
AccuracyReport predicate_accuracy(const RelationModel& model, const Dataset& data,
                                  const std::set<LabelTriple>* only = nullptr);

/// Random batch of `n` labeled triplets for a model configuration; targets
/// cover the background class when it is enabled.
std::vector<LabeledTriplet> random_batch(const ModelConfig& config, std::size_t n, Rng& rng);

/// Finite-difference check of RelationModel::loss on a random batch.
GradReport check_model_gradients(const ModelConfig& config, std::uint64_t seed, std::size_t batch = 4,
                                 std::size_t samples = 128);

}  // namespace uvt
