// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/visual_model.hpp"

#include <cmath>

#include "uvtranse/errors.hpp"

namespace uvt {

std::string to_string(Combiner c) {
  switch (c) {
    case Combiner::kUnionSubtract: return "uvtranse";
    case Combiner::kUnionSum: return "summation";
    case Combiner::kVTransE: return "vtranse";
    case Combiner::kAppearance: return "appearance";
  }
  return "uvtranse";
}

std::string to_string(ScoreMode m) { return m == ScoreMode::kSum ? "sum" : "product"; }

Combiner parse_combiner(const std::string& name) {
  if (name == "uvtranse") return Combiner::kUnionSubtract;
  if (name == "summation") return Combiner::kUnionSum;
  if (name == "vtranse") return Combiner::kVTransE;
  if (name == "appearance") return Combiner::kAppearance;
  throw ConfigError("unknown model variant '" + name + "'");
}

ScoreMode parse_score_mode(const std::string& name) {
  if (name == "sum") return ScoreMode::kSum;
  if (name == "product") return ScoreMode::kProduct;
  throw ConfigError("unknown score mode '" + name + "'");
}

void UVTransEConfig::validate() const {
  if (n_app == 0 || d_emb == 0 || hidden_app == 0 || loc_hidden == 0 || loc_dim == 0 ||
      n_predicates == 0) {
    throw ConfigError("model dimensions must all be >= 1");
  }
  if (!(C >= 0.0) || !std::isfinite(C)) throw ConfigError("C must be a finite value >= 0");
}

namespace {

bool uses_union(Combiner c) { return c == Combiner::kUnionSubtract || c == Combiner::kUnionSum; }

void add_penalty_grad(Vector& grad, const Vector& e, double weight) {
  if (weight == 0.0 || squared_norm(e) <= 1.0) return;
  for (std::size_t i = 0; i < e.size(); ++i) grad[i] += weight * 2.0 * e[i];
}

double hinge_norm(const Vector& e) {
  const double v = squared_norm(e) - 1.0;
  return v > 0.0 ? v : 0.0;
}

}  // namespace

VisualModel::VisualModel(const UVTransEConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const auto& c = config_;
  if (c.combiner == Combiner::kAppearance) {
    f_u_ = Mlp({3 * c.n_app, c.hidden_app, c.d_emb});
    f_u_.init_glorot(rng);
  } else {
    f_s_ = Mlp({c.n_app, c.hidden_app, c.d_emb});
    f_o_ = Mlp({c.n_app, c.hidden_app, c.d_emb});
    f_s_.init_glorot(rng);
    f_o_.init_glorot(rng);
    if (uses_union(c.combiner)) {
      f_u_ = Mlp({c.n_app, c.hidden_app, c.d_emb});
      f_u_.init_glorot(rng);
    }
  }
  if (c.use_location) {
    loc_mlp_ = Mlp({kLocationDim, c.loc_hidden, c.loc_dim});
    loc_mlp_.init_glorot(rng);
  }
  const std::size_t head_in = c.d_emb + (c.use_location ? c.loc_dim : 0);
  head_ = Mlp({head_in, c.d_emb, c.n_outputs()}, c.head_hidden_relu);
  head_.init_glorot(rng);
}

void VisualModel::check_dims(const TripletFeatures& feats) const {
  const std::size_t n = config_.n_app;
  const bool need_u = config_.combiner != Combiner::kVTransE;
  if (feats.app_s.size() != n || feats.app_o.size() != n || (need_u && feats.app_u.size() != n)) {
    throw ShapeError("appearance features must have " + std::to_string(n) + " entries");
  }
}

Embeddings VisualModel::embed(const TripletFeatures& feats) const {
  check_dims(feats);
  Embeddings emb;
  if (config_.combiner == Combiner::kAppearance) {
    Vector cat = concat(feats.app_s, feats.app_o);
    cat.insert(cat.end(), feats.app_u.begin(), feats.app_u.end());
    emb.e_u = f_u_.forward(cat);
  } else {
    emb.e_s = f_s_.forward(feats.app_s);
    emb.e_o = f_o_.forward(feats.app_o);
    if (uses_union(config_.combiner)) emb.e_u = f_u_.forward(feats.app_u);
  }
  if (config_.use_location) emb.e_loc = loc_mlp_.forward(feats.loc);
  return emb;
}

Vector VisualModel::predicate_embedding(const Embeddings& emb) const {
  switch (config_.combiner) {
    case Combiner::kUnionSubtract: {
      Vector p = emb.e_u;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= emb.e_s[i] + emb.e_o[i];
      return p;
    }
    case Combiner::kUnionSum: {
      Vector p = emb.e_u;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] += emb.e_s[i] + emb.e_o[i];
      return p;
    }
    case Combiner::kVTransE: {
      Vector p = emb.e_o;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= emb.e_s[i];
      return p;
    }
    case Combiner::kAppearance: return emb.e_u;
  }
  return {};
}

Vector VisualModel::predicate_logits(std::span<const double> p_hat,
                                     std::span<const double> e_loc) const {
  if (p_hat.size() != config_.d_emb) throw ShapeError("predicate embedding has wrong size");
  if (config_.use_location) {
    if (e_loc.size() != config_.loc_dim) throw ShapeError("location embedding has wrong size");
    return head_.forward(concat(p_hat, e_loc));
  }
  return head_.forward(p_hat);
}

Vector VisualModel::predicate_score(const TripletFeatures& feats) const {
  const Embeddings emb = embed(feats);
  return softmax(predicate_logits(predicate_embedding(emb), emb.e_loc));
}

VisualModel::Trace VisualModel::forward(const TripletFeatures& feats) const {
  check_dims(feats);
  Trace t;
  if (config_.combiner == Combiner::kAppearance) {
    Vector cat = concat(feats.app_s, feats.app_o);
    cat.insert(cat.end(), feats.app_u.begin(), feats.app_u.end());
    t.emb.e_u = f_u_.forward(cat, &t.u);
  } else {
    t.emb.e_s = f_s_.forward(feats.app_s, &t.s);
    t.emb.e_o = f_o_.forward(feats.app_o, &t.o);
    if (uses_union(config_.combiner)) t.emb.e_u = f_u_.forward(feats.app_u, &t.u);
  }
  t.p_hat = predicate_embedding(t.emb);
  if (config_.use_location) {
    t.emb.e_loc = loc_mlp_.forward(feats.loc, &t.loc);
    t.logits = head_.forward(concat(t.p_hat, t.emb.e_loc), &t.head);
  } else {
    t.logits = head_.forward(t.p_hat, &t.head);
  }
  return t;
}

double VisualModel::norm_penalty(const Embeddings& emb) const {
  double total = 0.0;
  for (const Vector* e : {&emb.e_s, &emb.e_o, &emb.e_u}) {
    if (!e->empty()) total += hinge_norm(*e);
  }
  return total;
}

void VisualModel::backward(const Trace& trace, std::span<const double> dlogits,
                           std::span<const double> dp_hat_extra, double penalty_weight) {
  if (trace.head.empty()) throw StateError("VisualModel::backward without forward");
  const std::size_t d = config_.d_emb;
  const Vector dhead_in = head_.backward(trace.head, dlogits);

  Vector dp(dhead_in.begin(), dhead_in.begin() + static_cast<std::ptrdiff_t>(d));
  if (!dp_hat_extra.empty()) {
    if (dp_hat_extra.size() != d) throw ShapeError("extra predicate gradient has wrong size");
    for (std::size_t i = 0; i < d; ++i) dp[i] += dp_hat_extra[i];
  }
  if (config_.use_location) {
    const Vector de_loc(dhead_in.begin() + static_cast<std::ptrdiff_t>(d), dhead_in.end());
    loc_mlp_.backward(trace.loc, de_loc);
  }

  const auto& emb = trace.emb;
  switch (config_.combiner) {
    case Combiner::kAppearance: {
      Vector de = dp;
      add_penalty_grad(de, emb.e_u, penalty_weight);
      f_u_.backward(trace.u, de);
      return;
    }
    case Combiner::kVTransE: {
      Vector de_o = dp;
      Vector de_s(d);
      for (std::size_t i = 0; i < d; ++i) de_s[i] = -dp[i];
      add_penalty_grad(de_s, emb.e_s, penalty_weight);
      add_penalty_grad(de_o, emb.e_o, penalty_weight);
      f_s_.backward(trace.s, de_s);
      f_o_.backward(trace.o, de_o);
      return;
    }
    case Combiner::kUnionSubtract:
    case Combiner::kUnionSum: {
      const double sign = config_.combiner == Combiner::kUnionSubtract ? -1.0 : 1.0;
      Vector de_u = dp;
      Vector de_so(d);
      for (std::size_t i = 0; i < d; ++i) de_so[i] = sign * dp[i];
      Vector de_s = de_so;
      Vector de_o = std::move(de_so);
      add_penalty_grad(de_u, emb.e_u, penalty_weight);
      add_penalty_grad(de_s, emb.e_s, penalty_weight);
      add_penalty_grad(de_o, emb.e_o, penalty_weight);
      f_u_.backward(trace.u, de_u);
      f_s_.backward(trace.s, de_s);
      f_o_.backward(trace.o, de_o);
      return;
    }
  }
}

std::vector<ParamRef> VisualModel::parameters() {
  std::vector<ParamRef> out;
  if (!f_s_.empty()) f_s_.collect("visual.f_s", out);
  if (!f_o_.empty()) f_o_.collect("visual.f_o", out);
  if (!f_u_.empty()) {
    f_u_.collect(config_.combiner == Combiner::kAppearance ? "visual.f_cat" : "visual.f_u", out);
  }
  if (!loc_mlp_.empty()) loc_mlp_.collect("visual.loc_mlp", out);
  head_.collect("visual.head", out);
  return out;
}

void VisualModel::zero_grad() {
  for (Mlp* m : {&f_s_, &f_o_, &f_u_, &loc_mlp_, &head_}) {
    if (!m->empty()) m->zero_grad();
  }
}

LossValue visual_loss(VisualModel& model, std::span<const LabeledTriplet> batch, double C) {
  LossValue lv;
  if (batch.empty()) return lv;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const auto trace = model.forward(ex.feats);
    auto ce = softmax_cross_entropy(trace.logits, ex.target);
    const double pen = model.norm_penalty(trace.emb);
    lv.cross_entropy += ce.loss * inv;
    lv.penalty += pen * inv;
    for (double& g : ce.grad_logits) g *= inv;
    model.backward(trace, ce.grad_logits, {}, C * inv);
  }
  lv.total = lv.cross_entropy + C * lv.penalty;
  if (!std::isfinite(lv.total)) throw TrainingError("non-finite visual loss");
  return lv;
}

double triplet_score(double z_s, double z_o, double z_p, ScoreMode mode) {
  return mode == ScoreMode::kSum ? z_s + z_p + z_o : z_s * z_o * z_p;
}

}  // namespace uvt
