// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/relation_model.hpp"

#include <cmath>

#include "uvtranse/errors.hpp"

namespace uvt {

void ModelConfig::validate() const {
  visual.validate();
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (use_language) {
    if (n_classes == 0) throw ConfigError("language module needs the number of object classes");
    if (word_dim == 0 || gru_hidden == 0 || lang_head_hidden == 0) {
      throw ConfigError("language dimensions must all be >= 1");
    }
  }
}

RelationModel::RelationModel(const ModelConfig& config, Tensor2 class_words, std::uint64_t seed)
    : config_(config), class_words_(std::move(class_words)) {
  config_.validate();
  Rng rng(seed);
  visual_ = VisualModel(config_.visual, rng);
  if (config_.use_language) {
    if (class_words_.rows() != config_.n_classes || class_words_.cols() != config_.word_dim) {
      throw ShapeError("class word table must be n_classes x word_dim");
    }
    LanguageConfig lc;
    lc.d_emb = config_.visual.d_emb;
    lc.word_dim = config_.word_dim;
    lc.hidden = config_.gru_hidden;
    lc.head_hidden = config_.lang_head_hidden;
    lc.n_outputs = config_.visual.n_outputs();
    language_.emplace(lc, rng);
  }
}

std::span<const double> RelationModel::word(std::size_t cls) const {
  if (cls >= class_words_.rows()) {
    throw IndexError("class id " + std::to_string(cls) + " has no word vector");
  }
  return class_words_.row(cls);
}

RelationModel::Scores RelationModel::score(const TripletFeatures& feats, std::size_t subject_class,
                                           std::size_t object_class) const {
  Scores s;
  const Embeddings emb = visual_.embed(feats);
  const Vector p_hat = visual_.predicate_embedding(emb);
  s.z_p = softmax(visual_.predicate_logits(p_hat, emb.e_loc));
  if (language_) {
    const auto inputs = language_->encode_sequence(word(subject_class), p_hat, word(object_class));
    s.z_l = language_->language_score(language_->bigru_forward(inputs));
  }
  return s;
}

LossValue RelationModel::loss(std::span<const LabeledTriplet> batch, bool backprop) {
  LossValue lv;
  if (batch.empty()) return lv;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const double C = config_.visual.C;
  const double alpha = language_ ? config_.alpha : 1.0;
  double lang_ce = 0.0;

  for (const auto& ex : batch) {
    const auto vt = visual_.forward(ex.feats);
    auto vce = softmax_cross_entropy(vt.logits, ex.target);
    const double pen = visual_.norm_penalty(vt.emb);
    lv.cross_entropy += vce.loss * inv;
    lv.penalty += pen * inv;

    Vector dp_extra;
    if (language_) {
      const auto lt = language_->forward(word(ex.subject_class), vt.p_hat, word(ex.object_class));
      auto lce = softmax_cross_entropy(lt.logits, ex.target);
      lang_ce += lce.loss * inv;
      if (backprop && alpha < 1.0) {
        for (double& g : lce.grad_logits) g *= (1.0 - alpha) * inv;
        Vector dp = language_->backward(lt, lce.grad_logits);
        if (config_.lang_grad_to_visual) dp_extra = std::move(dp);
      }
    }
    if (backprop) {
      for (double& g : vce.grad_logits) g *= alpha * inv;
      visual_.backward(vt, vce.grad_logits, dp_extra, alpha * C * inv);
    }
  }
  const double vis = lv.cross_entropy + C * lv.penalty;
  lv.total = language_ ? combined_loss(vis, lang_ce, alpha) : vis;
  if (!std::isfinite(lv.total)) throw TrainingError("non-finite training loss");
  return lv;
}

std::vector<ParamRef> RelationModel::parameters() {
  auto out = visual_.parameters();
  if (language_) {
    auto lp = language_->parameters();
    out.insert(out.end(), lp.begin(), lp.end());
  }
  return out;
}

void RelationModel::zero_grad() {
  visual_.zero_grad();
  if (language_) language_->zero_grad();
}

}  // namespace uvt
