// SPDX-License-Identifier: Apache-2.0
//
// Visual relation model. Subject, object and union appearance features are
// projected into a shared embedding space by three MLPs; the predicate
// embedding is the union embedding minus the subject and object embeddings.
// It is concatenated with an embedding of the 19-d location vector and fed to
// a two-layer head whose last weight rows act as the learned predicate vectors.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uvtranse/geometry.hpp"
#include "uvtranse/numkernel.hpp"

namespace uvt {

/// How the three appearance embeddings are combined into the predicate
/// embedding. The non-default variants are the ablation baselines.
enum class Combiner {
  kUnionSubtract,  // e_u - e_s - e_o
  kUnionSum,       // e_u + e_s + e_o
  kVTransE,        // e_o - e_s, no union feature
  kAppearance,     // one projection of concat(s, o, u)
};

enum class ScoreMode { kSum, kProduct };

std::string to_string(Combiner c);
std::string to_string(ScoreMode m);
Combiner parse_combiner(const std::string& name);
ScoreMode parse_score_mode(const std::string& name);

struct UVTransEConfig {
  std::size_t n_app = 0;
  std::size_t d_emb = 256;
  std::size_t hidden_app = 512;
  std::size_t loc_hidden = 32;
  std::size_t loc_dim = 16;
  std::size_t n_predicates = 0;
  double C = 1.0;
  bool use_background = false;
  ScoreMode score_mode = ScoreMode::kSum;
  Combiner combiner = Combiner::kUnionSubtract;
  bool use_location = true;
  bool head_hidden_relu = true;

  /// Predicates plus the background class when enabled.
  std::size_t n_outputs() const { return n_predicates + (use_background ? 1 : 0); }
  std::size_t background_index() const { return n_predicates; }
  void validate() const;
};

struct TripletFeatures {
  Vector app_s;
  Vector app_o;
  Vector app_u;
  std::array<double, kLocationDim> loc{};
  /// Set when app_u was synthesized rather than read from data.
  bool union_synthesized = false;
};

struct Embeddings {
  Vector e_s;
  Vector e_o;
  Vector e_u;
  Vector e_loc;
};

/// One training example: features, target output index and the class ids of
/// the two endpoints (used by the language module).
struct LabeledTriplet {
  TripletFeatures feats;
  std::size_t target = 0;
  std::size_t subject_class = 0;
  std::size_t object_class = 0;
};

struct LossValue {
  double total = 0.0;
  double cross_entropy = 0.0;
  double penalty = 0.0;
};

class VisualModel {
 public:
  struct Trace {
    MlpTrace s, o, u, loc, head;
    Embeddings emb;
    Vector p_hat;
    Vector logits;
  };

  VisualModel() = default;
  /// Glorot-initialized parameters drawn from `rng`.
  VisualModel(const UVTransEConfig& config, Rng& rng);

  const UVTransEConfig& config() const { return config_; }
  UVTransEConfig& mutable_config() { return config_; }

  Embeddings embed(const TripletFeatures& feats) const;
  Vector predicate_embedding(const Embeddings& emb) const;
  Vector predicate_logits(std::span<const double> p_hat, std::span<const double> e_loc) const;
  /// Softmax over all outputs, background included.
  Vector predicate_score(const TripletFeatures& feats) const;

  Trace forward(const TripletFeatures& feats) const;

  /// Accumulates gradients of
  ///   dlogits . logits + dp_hat_extra . p_hat + penalty_weight * sum [|e|^2 - 1]_+
  /// where the sum runs over the appearance embeddings of this combiner.
  void backward(const Trace& trace, std::span<const double> dlogits,
                std::span<const double> dp_hat_extra, double penalty_weight);

  /// sum over appearance embeddings of [|e|^2 - 1]_+.
  double norm_penalty(const Embeddings& emb) const;

  std::vector<ParamRef> parameters();
  void zero_grad();

 private:
  void check_dims(const TripletFeatures& feats) const;

  UVTransEConfig config_;
  Mlp f_s_;
  Mlp f_o_;
  Mlp f_u_;  // for kAppearance: projection of concat(s, o, u)
  Mlp loc_mlp_;
  Mlp head_;
};

/// Mean softmax cross-entropy plus C times the mean norm penalty over the
/// batch. Accumulates the exact gradient of that mean into the model.
LossValue visual_loss(VisualModel& model, std::span<const LabeledTriplet> batch, double C);

/// Sum mode: z_s + z_p + z_o. Product mode: z_s * z_o * z_p.
double triplet_score(double z_s, double z_o, double z_p, ScoreMode mode);

}  // namespace uvt
