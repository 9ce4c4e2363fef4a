// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/language_model.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uvtranse/errors.hpp"
#include "uvtranse/rng.hpp"

namespace uvt {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

std::vector<std::string_view> split_tokens(std::string_view name) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < name.size()) {
    while (i < name.size() && std::isspace(static_cast<unsigned char>(name[i]))) ++i;
    std::size_t j = i;
    while (j < name.size() && !std::isspace(static_cast<unsigned char>(name[j]))) ++j;
    if (j > i) out.push_back(name.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

void WordTable::insert(std::string token, Vector v) {
  if (v.size() != dim) {
    throw ShapeError("word vector for '" + token + "' has " + std::to_string(v.size()) +
                     " entries, table dimension is " + std::to_string(dim));
  }
  if (!all_finite(v)) throw ValidationError("word vector for '" + token + "' is not finite");
  vectors.insert_or_assign(std::move(token), std::move(v));
}

Vector WordTable::lookup(std::string_view name) const {
  const auto tokens = split_tokens(name);
  if (tokens.empty()) return fallback;
  Vector out(dim, 0.0);
  for (auto tok : tokens) {
    auto it = vectors.find(tok);
    const Vector& v = it == vectors.end() ? fallback : it->second;
    for (std::size_t i = 0; i < dim; ++i) out[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& v : out) v *= inv;
  return out;
}

WordTable WordTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open word-vector file " + path);
  std::string line;
  std::size_t line_no = 0;
  WordTable table(0);
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    Vector v;
    double x = 0.0;
    while (ss >> x) v.push_back(x);
    if (!ss.eof()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": non-numeric vector entry");
    }
    if (v.empty()) throw ParseError(path + ":" + std::to_string(line_no) + ": empty vector");
    if (first) {
      table = WordTable(v.size());
      first = false;
    } else if (v.size() != table.dim) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": dimension " +
                       std::to_string(v.size()) + " differs from " + std::to_string(table.dim));
    }
    table.insert(std::move(token), std::move(v));
  }
  if (first) throw ParseError("word-vector file " + path + " is empty");
  return table;
}

WordTable WordTable::hashed(std::size_t dim, std::span<const std::string> names) {
  WordTable table(dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (const auto& name : names) {
    for (auto tok : split_tokens(name)) {
      if (table.vectors.count(tok)) continue;
      Rng rng(fnv1a64(tok));
      Vector v(dim);
      for (double& x : v) x = rng.normal() * scale;
      table.insert(std::string(tok), std::move(v));
    }
  }
  return table;
}

WordTable WordTable::builtin_tiny() {
  static const char* const kWords[] = {"person", "horse",  "ride",  "dog",   "car",
                                       "street", "on",     "next",  "to",    "traffic",
                                       "light",  "table",  "chair", "sit",   "hold",
                                       "cup",    "wear",   "hat",   "under", "tree"};
  constexpr std::size_t kDim = 8;
  WordTable table(kDim);
  for (std::size_t w = 0; w < std::size(kWords); ++w) {
    Vector v(kDim);
    // Fixed low-discrepancy pattern; each word gets a distinct vector.
    for (std::size_t i = 0; i < kDim; ++i) {
      v[i] = std::sin(0.7 * static_cast<double>(w + 1) * static_cast<double>(i + 1));
    }
    table.insert(kWords[w], std::move(v));
  }
  return table;
}

GruCell::GruCell(std::size_t input, std::size_t hidden)
    : wz_(input, hidden), wr_(input, hidden), wn_(input, hidden),
      uz_(hidden, hidden, false), ur_(hidden, hidden, false), un_(hidden, hidden, false) {}

void GruCell::init_glorot(Rng& rng) {
  for (LinearLayer* l : {&wz_, &wr_, &wn_, &uz_, &ur_, &un_}) l->init_glorot(rng);
}

Vector GruCell::forward(std::span<const double> x, std::span<const double> h, GruTrace* trace) const {
  const std::size_t H = hidden_dim();
  if (h.size() != H) throw ShapeError("GRU hidden state has wrong size");
  Vector az = wz_.forward(x);
  Vector ar = wr_.forward(x);
  const Vector hz = uz_.forward(h);
  const Vector hr = ur_.forward(h);
  Vector z(H), r(H), rh(H);
  for (std::size_t i = 0; i < H; ++i) {
    z[i] = sigmoid(az[i] + hz[i]);
    r[i] = sigmoid(ar[i] + hr[i]);
    rh[i] = r[i] * h[i];
  }
  Vector an = wn_.forward(x);
  const Vector hn = un_.forward(rh);
  Vector n(H), out(H);
  for (std::size_t i = 0; i < H; ++i) {
    n[i] = std::tanh(an[i] + hn[i]);
    out[i] = (1.0 - z[i]) * h[i] + z[i] * n[i];
  }
  if (trace) {
    trace->x.assign(x.begin(), x.end());
    trace->h_prev.assign(h.begin(), h.end());
    trace->z = std::move(z);
    trace->r = std::move(r);
    trace->rh = std::move(rh);
    trace->n = std::move(n);
    trace->h = out;
  }
  return out;
}

std::pair<Vector, Vector> GruCell::backward(const GruTrace& t, std::span<const double> dh) {
  if (t.h.empty()) throw StateError("GruCell::backward without forward");
  const std::size_t H = hidden_dim();
  Vector dh_prev(H), dz_pre(H), dn_pre(H);
  for (std::size_t i = 0; i < H; ++i) {
    dh_prev[i] = dh[i] * (1.0 - t.z[i]);
    const double dz = dh[i] * (t.n[i] - t.h_prev[i]);
    dz_pre[i] = dz * t.z[i] * (1.0 - t.z[i]);
    const double dn = dh[i] * t.z[i];
    dn_pre[i] = dn * (1.0 - t.n[i] * t.n[i]);
  }
  Vector dx = wn_.backward(t.x, dn_pre);
  const Vector drh = un_.backward(t.rh, dn_pre);
  Vector dr_pre(H);
  for (std::size_t i = 0; i < H; ++i) {
    dh_prev[i] += drh[i] * t.r[i];
    const double dr = drh[i] * t.h_prev[i];
    dr_pre[i] = dr * t.r[i] * (1.0 - t.r[i]);
  }
  const Vector dxz = wz_.backward(t.x, dz_pre);
  const Vector dxr = wr_.backward(t.x, dr_pre);
  const Vector dhz = uz_.backward(t.h_prev, dz_pre);
  const Vector dhr = ur_.backward(t.h_prev, dr_pre);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxz[i] + dxr[i];
  for (std::size_t i = 0; i < H; ++i) dh_prev[i] += dhz[i] + dhr[i];
  return {std::move(dx), std::move(dh_prev)};
}

void GruCell::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  wz_.collect(prefix + ".w_update", out);
  wr_.collect(prefix + ".w_reset", out);
  wn_.collect(prefix + ".w_candidate", out);
  uz_.collect(prefix + ".u_update", out);
  ur_.collect(prefix + ".u_reset", out);
  un_.collect(prefix + ".u_candidate", out);
}

void GruCell::zero_grad() {
  for (LinearLayer* l : {&wz_, &wr_, &wn_, &uz_, &ur_, &un_}) l->zero_grad();
}

LanguageModel::LanguageModel(const LanguageConfig& config, Rng& rng)
    : config_(config),
      proj_(config.d_emb, config.word_dim),
      fwd_(config.word_dim, config.hidden),
      bwd_(config.word_dim, config.hidden),
      head_({6 * config.hidden, config.head_hidden, config.n_outputs}) {
  if (config.n_outputs == 0) throw ConfigError("language module needs at least one output");
  proj_.init_glorot(rng);
  fwd_.init_glorot(rng);
  bwd_.init_glorot(rng);
  head_.init_glorot(rng);
}

std::array<Vector, 3> LanguageModel::encode_sequence(std::span<const double> subject_word,
                                                      std::span<const double> p_hat,
                                                      std::span<const double> object_word) const {
  if (subject_word.size() != config_.word_dim || object_word.size() != config_.word_dim) {
    throw ShapeError("word vectors must have " + std::to_string(config_.word_dim) + " entries");
  }
  return {Vector(subject_word.begin(), subject_word.end()), proj_.forward(p_hat),
          Vector(object_word.begin(), object_word.end())};
}

std::array<Vector, 3> LanguageModel::encode_sequence(const WordTable& words,
                                                      std::string_view subject_class,
                                                      std::span<const double> p_hat,
                                                      std::string_view object_class) const {
  return encode_sequence(words.lookup(subject_class), p_hat, words.lookup(object_class));
}

Vector LanguageModel::bigru_forward(const std::array<Vector, 3>& inputs, Trace* trace) const {
  const std::size_t H = config_.hidden;
  Vector out(6 * H);
  Vector h(H, 0.0);
  for (std::size_t k = 0; k < 3; ++k) {
    h = fwd_.forward(inputs[k], h, trace ? &trace->fwd[k] : nullptr);
    std::copy(h.begin(), h.end(), out.begin() + static_cast<std::ptrdiff_t>(k * H));
  }
  h.assign(H, 0.0);
  for (std::size_t step = 0; step < 3; ++step) {
    const std::size_t k = 2 - step;
    h = bwd_.forward(inputs[k], h, trace ? &trace->bwd[k] : nullptr);
    std::copy(h.begin(), h.end(), out.begin() + static_cast<std::ptrdiff_t>((3 + step) * H));
  }
  return out;
}

Vector LanguageModel::language_logits(std::span<const double> bigru_out) const {
  return head_.forward(bigru_out);
}

Vector LanguageModel::language_score(std::span<const double> bigru_out) const {
  return softmax(language_logits(bigru_out));
}

LanguageModel::Trace LanguageModel::forward(std::span<const double> subject_word,
                                            std::span<const double> p_hat,
                                            std::span<const double> object_word) const {
  Trace t;
  t.p_hat.assign(p_hat.begin(), p_hat.end());
  t.inputs = encode_sequence(subject_word, p_hat, object_word);
  t.features = bigru_forward(t.inputs, &t);
  t.logits = head_.forward(t.features, &t.head);
  return t;
}

Vector LanguageModel::backward(const Trace& t, std::span<const double> dlogits) {
  if (t.head.empty()) throw StateError("LanguageModel::backward without forward");
  const std::size_t H = config_.hidden;
  const Vector dfeat = head_.backward(t.head, dlogits);
  auto slice = [&](std::size_t block) {
    return std::span<const double>(dfeat).subspan(block * H, H);
  };

  Vector dinput1(config_.word_dim, 0.0);  // only the predicate step has trainable inputs
  // Backward direction produced blocks 3,4,5 from inputs 2,1,0.
  Vector dh(H, 0.0);
  for (std::size_t step = 3; step-- > 0;) {
    const std::size_t k = 2 - step;
    const auto g = slice(3 + step);
    for (std::size_t i = 0; i < H; ++i) dh[i] += g[i];
    auto [dx, dprev] = bwd_.backward(t.bwd[k], dh);
    if (k == 1) dinput1 = dx;
    dh = std::move(dprev);
  }
  dh.assign(H, 0.0);
  for (std::size_t k = 3; k-- > 0;) {
    const auto g = slice(k);
    for (std::size_t i = 0; i < H; ++i) dh[i] += g[i];
    auto [dx, dprev] = fwd_.backward(t.fwd[k], dh);
    if (k == 1) {
      for (std::size_t i = 0; i < dx.size(); ++i) dinput1[i] += dx[i];
    }
    dh = std::move(dprev);
  }
  return proj_.backward(t.p_hat, dinput1);
}

std::vector<ParamRef> LanguageModel::parameters() {
  std::vector<ParamRef> out;
  proj_.collect("language.proj", out);
  fwd_.collect("language.gru_fwd", out);
  bwd_.collect("language.gru_bwd", out);
  head_.collect("language.head", out);
  return out;
}

void LanguageModel::zero_grad() {
  proj_.zero_grad();
  fwd_.zero_grad();
  bwd_.zero_grad();
  head_.zero_grad();
}

double combined_loss(double visual, double language, double alpha) {
  return alpha * visual + (1.0 - alpha) * language;
}

double combined_score(double z_s, double z_o, double z_p, double z_l, double alpha, ScoreMode mode) {
  const double z_pred = alpha * z_p + (1.0 - alpha) * z_l;
  return mode == ScoreMode::kSum ? z_s + z_o + z_pred : z_pred * z_s * z_o;
}

}  // namespace uvt
