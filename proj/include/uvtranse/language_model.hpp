// SPDX-License-Identifier: Apache-2.0
//
// Bi-directional GRU language module. The three time steps are the subject
// word vector, the predicate embedding projected to word dimension, and the
// object word vector. The six hidden states are concatenated and classified by
// a two-layer head.
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uvtranse/numkernel.hpp"
#include "uvtranse/visual_model.hpp"

namespace uvt {

struct WordTable {
  std::size_t dim = 100;
  std::map<std::string, Vector, std::less<>> vectors;
  Vector fallback;  // used for unknown tokens; zero unless set

  explicit WordTable(std::size_t d = 100) : dim(d), fallback(d, 0.0) {}

  /// Whitespace-separated names are averaged token by token; unknown tokens
  /// contribute the fallback vector.
  Vector lookup(std::string_view name) const;
  void insert(std::string token, Vector v);

  /// GloVe text format: "token v1 ... v_dim" per line. All rows must share
  /// one dimension.
  static WordTable load(const std::string& path);
  /// Deterministic pseudo-random unit-scale vectors keyed on the token text.
  /// Used when no pretrained table is supplied.
  static WordTable hashed(std::size_t dim, std::span<const std::string> names);
  /// Small embedded 20-word table used by the test suite.
  static WordTable builtin_tiny();
};

struct GruTrace {
  Vector x, h_prev, z, r, rh, n, h;
};

/// Standard GRU cell:
///   z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br),
///   n = tanh(Wn x + Un (r * h) + bn), h' = (1 - z) * h + z * n.
class GruCell {
 public:
  GruCell() = default;
  GruCell(std::size_t input, std::size_t hidden);

  std::size_t input_dim() const { return wz_.in(); }
  std::size_t hidden_dim() const { return wz_.out(); }

  void init_glorot(Rng& rng);
  Vector forward(std::span<const double> x, std::span<const double> h, GruTrace* trace = nullptr) const;
  /// Returns (dL/dx, dL/dh_prev) and accumulates parameter gradients.
  std::pair<Vector, Vector> backward(const GruTrace& trace, std::span<const double> dh);

  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();

 private:
  LinearLayer wz_, wr_, wn_;  // input weights with bias
  LinearLayer uz_, ur_, un_;  // recurrent weights, no bias
};

struct LanguageConfig {
  std::size_t d_emb = 256;
  std::size_t word_dim = 100;
  std::size_t hidden = 100;
  std::size_t head_hidden = 256;
  std::size_t n_outputs = 0;
};

class LanguageModel {
 public:
  struct Trace {
    Vector p_hat;
    std::array<Vector, 3> inputs;
    std::array<GruTrace, 3> fwd;
    std::array<GruTrace, 3> bwd;  // bwd[k] processed input k
    Vector features;
    MlpTrace head;
    Vector logits;
  };

  LanguageModel() = default;
  LanguageModel(const LanguageConfig& config, Rng& rng);

  const LanguageConfig& config() const { return config_; }

  /// (subject word, proj(p_hat), object word).
  std::array<Vector, 3> encode_sequence(std::span<const double> subject_word,
                                         std::span<const double> p_hat,
                                         std::span<const double> object_word) const;
  std::array<Vector, 3> encode_sequence(const WordTable& words, std::string_view subject_class,
                                         std::span<const double> p_hat,
                                         std::string_view object_class) const;

  /// Forward cell over steps 1..3, backward cell over 3..1, both from zero
  /// state; output (fwd1, fwd2, fwd3, bwd3, bwd2, bwd1).
  Vector bigru_forward(const std::array<Vector, 3>& inputs, Trace* trace = nullptr) const;
  Vector language_logits(std::span<const double> bigru_out) const;
  Vector language_score(std::span<const double> bigru_out) const;

  Trace forward(std::span<const double> subject_word, std::span<const double> p_hat,
                std::span<const double> object_word) const;
  /// Accumulates gradients for dL/dlogits and returns dL/dp_hat.
  Vector backward(const Trace& trace, std::span<const double> dlogits);

  std::vector<ParamRef> parameters();
  void zero_grad();

  // Exposed for the direction-symmetry property.
  GruCell& forward_cell() { return fwd_; }
  GruCell& backward_cell() { return bwd_; }

 private:
  LanguageConfig config_;
  LinearLayer proj_;
  GruCell fwd_;
  GruCell bwd_;
  Mlp head_;
};

/// alpha * L_vis + (1 - alpha) * L_lang.
double combined_loss(double visual, double language, double alpha);

/// Sum mode: z_s + z_o + alpha z_p + (1 - alpha) z_l.
/// Product mode: (alpha z_p + (1 - alpha) z_l) z_s z_o.
double combined_score(double z_s, double z_o, double z_p, double z_l, double alpha, ScoreMode mode);

}  // namespace uvt
