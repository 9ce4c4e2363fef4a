// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: train / eval / predict / synth / gradcheck.
// Exit codes: 0 success, 1 usage or config error, 2 data validation error,
// 3 numerical failure.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uvtranse/canonical_json.hpp"
#include "uvtranse/relation_model.hpp"

namespace uvt {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

struct RunConfig {
  std::string profile = "vrd";
  std::uint64_t seed = 1;
  std::size_t epochs = 20;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  double C = 1.0;
  double alpha = 0.5;
  double neg_ratio = 3.0;
  std::size_t budget = 32;
  double iou_match = 0.5;
  std::size_t k_per_pair = 1;
  std::string score_mode = "sum";
  bool use_language = true;
  bool use_background = false;
  std::string variant = "uvtranse";
  bool use_location = true;

  std::size_t d_emb = 256;
  std::size_t hidden_app = 512;
  std::size_t loc_hidden = 32;
  std::size_t loc_dim = 16;
  std::size_t word_dim = 100;
  std::size_t gru_hidden = 100;
  std::size_t lang_head_hidden = 256;

  std::string task = "predicate";
  std::string mode = "with_gt";
  double iou_threshold = 0.5;
  double unrel_iou = 0.3;
  std::vector<std::size_t> recall_at = {50, 100};
  std::size_t top_proposals = 30;
  std::size_t top_n = 100;
  std::size_t threads = 1;

  // Inputs. Output destinations are not part of the echoed config.
  std::string data;
  std::string vocab;
  std::string words;
  std::string checkpoint;
  std::string zero_shot_against;
  std::string detections;
  std::string spec;

  /// Applies the named hyperparameter bundle (vrd | vg | openimages).
  void apply_profile(const std::string& name);
  void validate() const;
  Json to_json() const;
  /// Overwrites the fields present in `j`; unknown keys are rejected.
  void merge_json(const Json& j);

  ModelConfig model_config(std::size_t n_app, std::size_t n_classes, std::size_t n_predicates) const;
};

/// Trains and writes the checkpoint to `out` after every epoch, so a
/// numerical failure leaves the last good epoch on disk. Returns the training
/// log; its "status" is "ok" or "diverged".
Json cmd_train(const RunConfig& cfg, const std::string& out);
Json cmd_eval(const RunConfig& cfg);
Json cmd_predict(const RunConfig& cfg);
/// Writes train.jsonl, test.jsonl, vocab.json and truth.json into `out_dir`.
Json cmd_synth(const RunConfig& cfg, const std::string& out_dir);
/// Gradient check of the visual-only and joint models at cfg.seed.
Json cmd_gradcheck(const RunConfig& cfg);

inline constexpr double kGradcheckTolerance = 1e-4;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace uvt
