// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/canonical_json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "uvtranse/errors.hpp"

namespace uvt {

namespace {

void emit(const Json& v, std::string& out) {
  switch (v.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      // nlohmann's default object type is an ordered std::map.
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += Json(it.key()).dump();
        out += ':';
        emit(it.value(), out);
      }
      out += '}';
      return;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        emit(v[i], out);
      }
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw DomainError("cannot serialize a non-finite number");
      if (d == 0.0 && std::signbit(d)) {
        out += "-0.0";  // "-0" would parse back as the integer 0
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", d);
      out += buf;
      return;
    }
    default: out += v.dump(); return;
  }
}

}  // namespace

std::string canonical_dump(const Json& value) {
  std::string out;
  emit(value, out);
  return out;
}

void write_canonical_file(const std::string& path, const Json& value) {
  const std::string text = canonical_dump(value);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text << '\n';
  if (!f) throw Error("failed writing " + path);
}

Json read_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace uvt
