// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uvtranse/language_model.hpp"
#include "uvtranse/visual_model.hpp"

namespace uvt {

struct ModelConfig {
  UVTransEConfig visual;
  std::size_t n_classes = 0;
  bool use_language = false;
  std::size_t word_dim = 100;
  std::size_t gru_hidden = 100;
  std::size_t lang_head_hidden = 256;
  double alpha = 0.5;
  /// Lets the language loss back-propagate through proj(p_hat) into the
  /// visual projections.
  bool lang_grad_to_visual = true;

  void validate() const;
};

/// Visual model plus the optional language module, trained jointly on
/// alpha * L_vis + (1 - alpha) * L_lang.
class RelationModel {
 public:
  struct Scores {
    Vector z_p;  // visual softmax over all outputs
    Vector z_l;  // language softmax; empty without the language module
  };

  RelationModel() = default;
  /// `class_words` holds one word vector per object class (n_classes x
  /// word_dim); ignored when the language module is disabled.
  RelationModel(const ModelConfig& config, Tensor2 class_words, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  VisualModel& visual() { return visual_; }
  const VisualModel& visual() const { return visual_; }
  bool has_language() const { return language_.has_value(); }
  LanguageModel& language() { return *language_; }
  const Tensor2& class_words() const { return class_words_; }

  Scores score(const TripletFeatures& feats, std::size_t subject_class,
               std::size_t object_class) const;

  /// Batch-mean objective. With `backprop`, accumulates its exact gradient.
  LossValue loss(std::span<const LabeledTriplet> batch, bool backprop);

  std::vector<ParamRef> parameters();
  void zero_grad();

 private:
  std::span<const double> word(std::size_t cls) const;

  ModelConfig config_;
  VisualModel visual_;
  std::optional<LanguageModel> language_;
  Tensor2 class_words_;
};

}  // namespace uvt
