// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uvtranse/errors.hpp"

namespace uvt {

const ObjectInstance* ImageRecord::find(ObjectId id) const {
  for (const auto& o : objects) {
    if (o.object_id == id) return &o;
  }
  return nullptr;
}

std::size_t ImageRecord::index_of(ObjectId id) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].object_id == id) return i;
  }
  throw IndexError("image " + image_id + ": no object with id " + std::to_string(id));
}

Vocab Vocab::load(const std::string& path) {
  const Json j = read_json_file(path);
  Vocab v;
  try {
    v.classes = j.at("classes").get<std::vector<std::string>>();
    v.predicates = j.at("predicates").get<std::vector<std::string>>();
    if (j.contains("attributes")) v.attributes = j.at("attributes").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw ParseError(path + ": malformed vocab: " + e.what());
  }
  return v;
}

Json Vocab::to_json() const {
  Json j;
  j["classes"] = classes;
  j["predicates"] = predicates;
  j["attributes"] = attributes;
  return j;
}

void Vocab::save(const std::string& path) const { write_canonical_file(path, to_json()); }

DatasetLimits DatasetLimits::from_vocab(const Vocab& vocab) {
  DatasetLimits l;
  l.n_classes = vocab.classes.size();
  l.n_predicates = vocab.predicates.size();
  l.n_attributes = vocab.attributes.size();
  return l;
}

namespace {

[[noreturn]] void invalid(const std::string& image_id, const std::string& field,
                          const std::string& what) {
  throw ValidationError("image '" + image_id + "', field " + field + ": " + what);
}

std::string pair_key(ObjectId s, ObjectId o) { return std::to_string(s) + "," + std::to_string(o); }

std::pair<ObjectId, ObjectId> parse_pair_key(const std::string& image_id, const std::string& key) {
  const auto comma = key.find(',');
  if (comma == std::string::npos) invalid(image_id, "union_features", "bad key '" + key + "'");
  try {
    std::size_t a = 0;
    std::size_t b = 0;
    const std::string left = key.substr(0, comma);
    const std::string right = key.substr(comma + 1);
    const ObjectId s = std::stoll(left, &a);
    const ObjectId o = std::stoll(right, &b);
    if (a != left.size() || b != right.size()) throw std::invalid_argument(key);
    return {s, o};
  } catch (const std::exception&) {
    invalid(image_id, "union_features", "bad key '" + key + "'");
  }
}

Vector number_array(const Json& j, const std::string& image_id, const std::string& field) {
  if (!j.is_array()) invalid(image_id, field, "expected an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) invalid(image_id, field, "expected an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

template <typename T>
T integer_field(const Json& j, const std::string& image_id, const std::string& field) {
  if (!j.is_number_integer()) invalid(image_id, field, "expected an integer");
  if constexpr (std::is_unsigned_v<T>) {
    if (j.get<std::int64_t>() < 0) invalid(image_id, field, "must be non-negative");
  }
  return j.get<T>();
}

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

Json record_to_json(const ImageRecord& rec) {
  Json j;
  j["image_id"] = rec.image_id;
  j["width"] = rec.dims.width;
  j["height"] = rec.dims.height;
  Json objs = Json::array();
  for (const auto& o : rec.objects) {
    Json oj;
    oj["object_id"] = o.object_id;
    oj["class_id"] = o.class_id;
    oj["box"] = Json::array({o.box.x, o.box.y, o.box.w, o.box.h});
    oj["score"] = o.score;
    oj["feature"] = vector_json(o.feature);
    objs.push_back(std::move(oj));
  }
  j["objects"] = std::move(objs);
  Json rels = Json::array();
  for (const auto& r : rec.relations) {
    rels.push_back(Json::array({r.subject_id, r.predicate_id, r.object_id}));
  }
  j["relations"] = std::move(rels);
  if (!rec.attributes.empty()) {
    Json attrs = Json::array();
    for (const auto& a : rec.attributes) attrs.push_back(Json::array({a.object_id, a.attribute_id}));
    j["attributes"] = std::move(attrs);
  }
  if (!rec.union_features.empty()) {
    Json uf = Json::object();
    for (const auto& [key, v] : rec.union_features) uf[pair_key(key.first, key.second)] = vector_json(v);
    j["union_features"] = std::move(uf);
  }
  return j;
}

ImageRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  ImageRecord rec;
  if (!j.contains("image_id") || !j["image_id"].is_string()) {
    throw ValidationError("record lacks a string image_id");
  }
  rec.image_id = j["image_id"].get<std::string>();
  const std::string& id = rec.image_id;
  for (const char* key : {"width", "height"}) {
    if (!j.contains(key) || !j[key].is_number()) invalid(id, key, "expected a number");
  }
  rec.dims = {j["width"].get<double>(), j["height"].get<double>()};

  if (!j.contains("objects") || !j["objects"].is_array()) invalid(id, "objects", "expected an array");
  for (std::size_t i = 0; i < j["objects"].size(); ++i) {
    const Json& oj = j["objects"][i];
    const std::string f = "objects[" + std::to_string(i) + "]";
    if (!oj.is_object()) invalid(id, f, "expected an object");
    for (const char* key : {"object_id", "class_id", "box", "score", "feature"}) {
      if (!oj.contains(key)) invalid(id, f + "." + key, "missing");
    }
    ObjectInstance o;
    o.object_id = integer_field<ObjectId>(oj["object_id"], id, f + ".object_id");
    o.class_id = integer_field<std::size_t>(oj["class_id"], id, f + ".class_id");
    const Vector box = number_array(oj["box"], id, f + ".box");
    if (box.size() != 4) invalid(id, f + ".box", "expected [x, y, w, h]");
    o.box = {box[0], box[1], box[2], box[3]};
    if (!oj["score"].is_number()) invalid(id, f + ".score", "expected a number");
    o.score = oj["score"].get<double>();
    o.feature = number_array(oj["feature"], id, f + ".feature");
    rec.objects.push_back(std::move(o));
  }

  if (!j.contains("relations") || !j["relations"].is_array()) {
    invalid(id, "relations", "expected an array");
  }
  for (std::size_t i = 0; i < j["relations"].size(); ++i) {
    const Json& rj = j["relations"][i];
    const std::string f = "relations[" + std::to_string(i) + "]";
    if (!rj.is_array() || rj.size() != 3) invalid(id, f, "expected [subject_id, predicate_id, object_id]");
    rec.relations.push_back({integer_field<ObjectId>(rj[0], id, f),
                             integer_field<std::size_t>(rj[1], id, f),
                             integer_field<ObjectId>(rj[2], id, f)});
  }

  if (j.contains("attributes")) {
    if (!j["attributes"].is_array()) invalid(id, "attributes", "expected an array");
    for (std::size_t i = 0; i < j["attributes"].size(); ++i) {
      const Json& aj = j["attributes"][i];
      const std::string f = "attributes[" + std::to_string(i) + "]";
      if (!aj.is_array() || aj.size() != 2) invalid(id, f, "expected [object_id, attribute_id]");
      rec.attributes.push_back(
          {integer_field<ObjectId>(aj[0], id, f), integer_field<std::size_t>(aj[1], id, f)});
    }
  }

  if (j.contains("union_features")) {
    const Json& uf = j["union_features"];
    if (!uf.is_object()) invalid(id, "union_features", "expected an object");
    for (auto it = uf.begin(); it != uf.end(); ++it) {
      rec.union_features[parse_pair_key(id, it.key())] =
          number_array(it.value(), id, "union_features[" + it.key() + "]");
    }
  }
  return rec;
}

void validate_record(const ImageRecord& rec, const DatasetLimits& limits) {
  const std::string& id = rec.image_id;
  if (id.empty()) throw ValidationError("record has an empty image_id");
  if (!rec.dims.valid()) invalid(id, "width/height", "image dimensions must be positive");

  std::set<ObjectId> ids;
  std::optional<std::size_t> dim = limits.n_app;
  for (std::size_t i = 0; i < rec.objects.size(); ++i) {
    const auto& o = rec.objects[i];
    const std::string f = "objects[" + std::to_string(i) + "]";
    if (!ids.insert(o.object_id).second) {
      invalid(id, f + ".object_id", "duplicate id " + std::to_string(o.object_id));
    }
    if (limits.n_classes && o.class_id >= *limits.n_classes) {
      invalid(id, f + ".class_id", std::to_string(o.class_id) + " exceeds vocabulary");
    }
    if (!o.box.valid()) invalid(id, f + ".box", "width and height must be positive and finite");
    if (!(o.score >= 0.0 && o.score <= 1.0)) invalid(id, f + ".score", "must lie in [0, 1]");
    if (o.feature.empty()) invalid(id, f + ".feature", "empty feature vector");
    if (!all_finite(o.feature)) invalid(id, f + ".feature", "non-finite entry");
    if (!dim) dim = o.feature.size();
    if (o.feature.size() != *dim) {
      invalid(id, f + ".feature", "dimension " + std::to_string(o.feature.size()) + " != " +
                                      std::to_string(*dim));
    }
  }
  for (std::size_t i = 0; i < rec.relations.size(); ++i) {
    const auto& r = rec.relations[i];
    const std::string f = "relations[" + std::to_string(i) + "]";
    if (!ids.count(r.subject_id)) invalid(id, f, "unknown subject id " + std::to_string(r.subject_id));
    if (!ids.count(r.object_id)) invalid(id, f, "unknown object id " + std::to_string(r.object_id));
    if (r.subject_id == r.object_id) invalid(id, f, "subject and object are the same instance");
    if (limits.n_predicates && r.predicate_id >= *limits.n_predicates) {
      invalid(id, f, "predicate " + std::to_string(r.predicate_id) + " exceeds vocabulary");
    }
  }
  for (std::size_t i = 0; i < rec.attributes.size(); ++i) {
    const auto& a = rec.attributes[i];
    const std::string f = "attributes[" + std::to_string(i) + "]";
    if (!ids.count(a.object_id)) invalid(id, f, "unknown object id " + std::to_string(a.object_id));
    if (limits.n_attributes && a.attribute_id >= *limits.n_attributes) {
      invalid(id, f, "attribute " + std::to_string(a.attribute_id) + " exceeds vocabulary");
    }
  }
  for (const auto& [key, v] : rec.union_features) {
    const std::string f = "union_features[" + pair_key(key.first, key.second) + "]";
    if (!ids.count(key.first) || !ids.count(key.second)) invalid(id, f, "unknown object id");
    if (dim && v.size() != *dim) invalid(id, f, "dimension mismatch");
    if (!all_finite(v)) invalid(id, f, "non-finite entry");
  }
}

Dataset parse_dataset(const std::string& text, const DatasetLimits& limits,
                      const std::string& source) {
  Dataset data;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  DatasetLimits effective = limits;
  std::set<std::string> image_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!header_seen) {
      header_seen = true;
      if (!j.is_object() || !j.contains("schema_version")) {
        throw ParseError(source + ":" + std::to_string(line_no) +
                         ": first line must be a header with schema_version");
      }
      if (j["schema_version"] != kDatasetSchemaVersion) {
        throw ParseError(source + ":" + std::to_string(line_no) + ": unsupported schema_version " +
                         j["schema_version"].dump());
      }
      continue;
    }
    ImageRecord rec;
    try {
      rec = record_from_json(j);
      validate_record(rec, effective);
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!image_ids.insert(rec.image_id).second) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate image_id '" +
                            rec.image_id + "'");
    }
    // Feature dimension must agree across the whole file.
    if (!effective.n_app && !rec.objects.empty()) effective.n_app = rec.objects.front().feature.size();
    data.push_back(std::move(rec));
  }
  return data;
}

Dataset load_dataset(const std::string& path, const DatasetLimits& limits) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open dataset " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_dataset(ss.str(), limits, path);
}

std::string dataset_to_string(const Dataset& data) {
  Json header;
  header["schema_version"] = kDatasetSchemaVersion;
  std::string out = canonical_dump(header) + "\n";
  for (const auto& rec : data) out += canonical_dump(record_to_json(rec)) + "\n";
  return out;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << dataset_to_string(data);
  if (!f) throw Error("failed writing " + path);
}

TripletFeatures build_triplet_features(const ImageRecord& rec, std::size_t si, std::size_t oi) {
  const auto& s = rec.objects.at(si);
  const auto& o = rec.objects.at(oi);
  TripletFeatures f;
  f.app_s = s.feature;
  f.app_o = o.feature;
  auto it = rec.union_features.find({s.object_id, o.object_id});
  if (it != rec.union_features.end()) {
    f.app_u = it->second;
  } else {
    f.app_u.resize(s.feature.size());
    for (std::size_t i = 0; i < f.app_u.size(); ++i) f.app_u[i] = std::max(s.feature[i], o.feature[i]);
    f.union_synthesized = true;
  }
  f.loc = triplet_location_vector(s.box, o.box, rec.dims);
  return f;
}

std::uint64_t image_seed(std::uint64_t seed, const std::string& image_id) {
  return seed ^ fnv1a64(image_id);
}

std::vector<SampledTriplet> sample_training_triplets(const ImageRecord& rec,
                                                     const SamplingOptions& opts, Rng& rng) {
  if (!(opts.neg_ratio >= 0.0)) throw DomainError("neg_ratio must be >= 0");
  if (!(opts.iou_match > 0.0 && opts.iou_match <= 1.0)) throw DomainError("iou_match must lie in (0, 1]");
  std::vector<SampledTriplet> positives;
  std::vector<SampledTriplet> negatives;
  const std::size_t n = rec.objects.size();

  auto make = [&](std::size_t si, std::size_t oi, std::size_t target, bool positive) {
    SampledTriplet t;
    t.example.feats = build_triplet_features(rec, si, oi);
    t.example.target = target;
    t.example.subject_class = rec.objects[si].class_id;
    t.example.object_class = rec.objects[oi].class_id;
    t.subject_id = rec.objects[si].object_id;
    t.object_id = rec.objects[oi].object_id;
    t.positive = positive;
    return t;
  };

  // Ground-truth relations first, in file order.
  std::set<std::tuple<ObjectId, ObjectId, std::size_t>> seen_gt;
  std::set<std::pair<ObjectId, ObjectId>> gt_pairs;
  for (const auto& r : rec.relations) {
    if (!seen_gt.insert({r.subject_id, r.object_id, r.predicate_id}).second) continue;
    gt_pairs.insert({r.subject_id, r.object_id});
    positives.push_back(make(rec.index_of(r.subject_id), rec.index_of(r.object_id), r.predicate_id, true));
  }

  for (std::size_t si = 0; si < n; ++si) {
    for (std::size_t oi = 0; oi < n; ++oi) {
      if (si == oi) continue;
      const auto& s = rec.objects[si];
      const auto& o = rec.objects[oi];
      if (gt_pairs.count({s.object_id, o.object_id})) continue;
      double best = -1.0;
      std::size_t best_pred = 0;
      for (const auto& r : rec.relations) {
        const double is = iou(s.box, rec.find(r.subject_id)->box);
        const double io = iou(o.box, rec.find(r.object_id)->box);
        if (is >= opts.iou_match && io >= opts.iou_match && is + io > best) {
          best = is + io;
          best_pred = r.predicate_id;
        }
      }
      if (best >= 0.0) {
        positives.push_back(make(si, oi, best_pred, true));
      } else if (opts.use_background) {
        negatives.push_back(make(si, oi, opts.n_predicates, false));
      }
    }
  }

  std::size_t pos_cap = opts.budget;
  std::size_t neg_cap = 0;
  if (opts.use_background) {
    pos_cap = static_cast<std::size_t>(std::floor(static_cast<double>(opts.budget) / (1.0 + opts.neg_ratio)));
    neg_cap = opts.budget - pos_cap;
  }
  auto take = [&](std::vector<SampledTriplet>& pool, std::size_t cap) {
    if (pool.size() > cap) {
      for (std::size_t i = 0; i < cap; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      pool.resize(cap);
    }
  };
  take(positives, pos_cap);
  take(negatives, neg_cap);
  positives.insert(positives.end(), std::make_move_iterator(negatives.begin()),
                   std::make_move_iterator(negatives.end()));
  return positives;
}

std::set<LabelTriple> label_triples(const Dataset& data) {
  std::set<LabelTriple> out;
  for (const auto& rec : data) {
    for (const auto& r : rec.relations) {
      out.insert({rec.find(r.subject_id)->class_id, r.predicate_id, rec.find(r.object_id)->class_id});
    }
  }
  return out;
}

ZeroShotSplit split_zero_shot(const Dataset& train, const Dataset& test) {
  const auto seen = label_triples(train);
  ZeroShotSplit split;
  for (const auto& rec : test) {
    ImageRecord s = rec;
    ImageRecord z = rec;
    s.relations.clear();
    z.relations.clear();
    for (const auto& r : rec.relations) {
      const LabelTriple t{rec.find(r.subject_id)->class_id, r.predicate_id,
                          rec.find(r.object_id)->class_id};
      if (seen.count(t)) {
        s.relations.push_back(r);
      } else {
        z.relations.push_back(r);
      }
    }
    split.seen_count += s.relations.size();
    split.zero_shot_count += z.relations.size();
    split.seen.push_back(std::move(s));
    split.zero_shot.push_back(std::move(z));
  }
  return split;
}

}  // namespace uvt
