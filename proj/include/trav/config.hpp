#ifndef TRAV_CONFIG_HPP
#define TRAV_CONFIG_HPP

#include <iosfwd>
#include <map>
#include <set>
#include <string>

namespace trav {

/// Flat `key = value` settings. Blank lines and lines starting with `#` are
/// ignored; a later assignment to the same key wins.
class Config {
 public:
  static Config parse(std::istream& in);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws ParameterError naming the first key not in `known`.
  void require_known(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace trav

#endif  // TRAV_CONFIG_HPP
