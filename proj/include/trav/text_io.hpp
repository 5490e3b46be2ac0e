#ifndef TRAV_TEXT_IO_HPP
#define TRAV_TEXT_IO_HPP

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "trav/types.hpp"

namespace trav::io {

/// Shortest decimal that parses back to the same double; NaN as `NaN`.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void put(std::ostream& out, double v) { out << format_double(v); }

inline double parse_double(const std::string& tok) {
  if (tok == "NaN" || tok == "nan" || tok == "-nan") return kNaN;
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw DataError("malformed number: '" + tok + "'");
  }
  return v;
}

inline double read_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw DataError("unexpected end of input");
  return parse_double(tok);
}

inline long long read_int(std::istream& in) {
  long long v = 0;
  if (!(in >> v)) throw DataError("expected integer");
  return v;
}

inline void expect_token(std::istream& in, const std::string& want) {
  std::string tok;
  if (!(in >> tok) || tok != want) {
    throw DataError("expected '" + want + "', got '" + tok + "'");
  }
}

}  // namespace trav::io

#endif  // TRAV_TEXT_IO_HPP
