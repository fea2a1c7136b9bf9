#pragma once

#include <cmath>
#include <charconv>
#include <string>

#include <json.hpp>

namespace wishpow {

using Json = nlohmann::ordered_json;

namespace detail {

inline void dump_json_to(std::string& out, const Json& j, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(d * indent), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        dump_json_to(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        dump_json_to(out, v, indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      std::string s(buf, res.ptr);
      // keep floats recognisable as floats after a round trip
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      out += s;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Serialises with every float in its shortest round-trip form.
inline std::string dump_json(const Json& j, int indent = 2) {
  std::string out;
  detail::dump_json_to(out, j, indent, 0);
  out += '\n';
  return out;
}

}  // namespace wishpow
