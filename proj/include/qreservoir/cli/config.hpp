// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "qreservoir/core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace qreservoir::cli {

using json = nlohmann::json;

/// Invalid configuration; carries every problem found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s;
    for (const auto& x : p) s += (s.empty() ? "" : "\n") + x;
    return s;
  }
  std::vector<std::string> problems_;
};

namespace units {

inline std::optional<double> parse_number(const std::string& text) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

/// "<value> <unit>" with rad/s, Hz, kHz, MHz or GHz; Hz-family values are
/// multiplied by 2 pi. Returns rad/s.
inline std::optional<double> frequency(const std::string& text) {
  static const std::regex re(R"(^\s*([-+0-9.eE]+)\s*(rad/s|Hz|kHz|MHz|GHz)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) return std::nullopt;
  const auto v = parse_number(m[1]);
  if (!v) return std::nullopt;
  const std::string u = m[2];
  if (u == "rad/s") return *v;
  const double scale = u == "Hz" ? 1.0 : u == "kHz" ? 1e3 : u == "MHz" ? 1e6 : 1e9;
  return 2.0 * kPi * scale * *v;
}

/// "<value> <unit>" with s, ms, us or ns. Returns seconds.
inline std::optional<double> time(const std::string& text) {
  static const std::regex re(R"(^\s*([-+0-9.eE]+)\s*(s|ms|us|ns)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) return std::nullopt;
  const auto v = parse_number(m[1]);
  if (!v) return std::nullopt;
  const std::string u = m[2];
  const double scale = u == "s" ? 1.0 : u == "ms" ? 1e-3 : u == "us" ? 1e-6 : 1e-9;
  return scale * *v;
}

/// Angles written as "[c*]pi[/x]" or "[c*]pi/sqrt(x)", in radians.
inline std::optional<double> angle(const std::string& text) {
  static const std::regex re(
      R"(^\s*(?:([-+0-9.eE]+)\s*\*\s*)?pi(?:\s*/\s*(?:sqrt\(\s*([0-9.eE+]+)\s*\)|([0-9.eE+]+)))?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) return parse_number(trim(text));
  double v = kPi;
  if (m[1].matched) {
    const auto c = parse_number(m[1]);
    if (!c) return std::nullopt;
    v *= *c;
  }
  if (m[2].matched) {
    const auto x = parse_number(m[2]);
    if (!x || *x <= 0.0) return std::nullopt;
    v /= std::sqrt(*x);
  } else if (m[3].matched) {
    const auto x = parse_number(m[3]);
    if (!x || *x == 0.0) return std::nullopt;
    v /= *x;
  }
  return v;
}

}  // namespace units

/// Reads one JSON object, collecting problems instead of throwing, and
/// mirrors every value it reads (normalized, defaults filled) into `resolved`.
class Reader {
 public:
  Reader(const json& source, json& resolved, std::string path, std::vector<std::string>& errors)
      : source_(source), resolved_(resolved), path_(std::move(path)), errors_(errors) {
    if (!source_.is_object()) {
      fail(path_.empty() ? "config must be a JSON object" : path_ + " must be a JSON object");
      valid_ = false;
    }
    if (!resolved_.is_object()) resolved_ = json::object();
  }

  bool has(const std::string& key) const { return valid_ && source_.contains(key); }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    double out = fallback.value_or(0.0);
    if (v) {
      if (v->is_number()) out = v->get<double>();
      else fail(where(key) + " must be a number");
    }
    resolved_[key] = out;
    return out;
  }

  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    std::int64_t out = fallback.value_or(0);
    if (v) {
      if (v->is_number_integer()) out = v->get<std::int64_t>();
      else fail(where(key) + " must be an integer");
    }
    resolved_[key] = out;
    return out;
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    const json* v = lookup(key, true);
    std::uint64_t out = fallback;
    if (v) {
      if (v->is_number_unsigned()) out = v->get<std::uint64_t>();
      else if (v->is_number_integer() && v->get<std::int64_t>() >= 0) out = static_cast<std::uint64_t>(v->get<std::int64_t>());
      else fail(where(key) + " must be a non-negative 64-bit integer");
    }
    resolved_[key] = out;
    return out;
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = lookup(key, true);
    bool out = fallback;
    if (v) {
      if (v->is_boolean()) out = v->get<bool>();
      else fail(where(key) + " must be true or false");
    }
    resolved_[key] = out;
    return out;
  }

  std::string choice(const std::string& key, const std::vector<std::string>& allowed,
                     std::optional<std::string> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    std::string out = fallback.value_or(allowed.front());
    if (v) {
      if (v->is_string() && std::find(allowed.begin(), allowed.end(), v->get<std::string>()) != allowed.end())
        out = v->get<std::string>();
      else fail(where(key) + " must be one of " + list(allowed));
    }
    resolved_[key] = out;
    return out;
  }

  std::vector<std::string> choices(const std::string& key, const std::vector<std::string>& allowed,
                                   const std::vector<std::string>& fallback) {
    const json* v = lookup(key, true);
    std::vector<std::string> out = fallback;
    if (v) {
      out.clear();
      bool ok = v->is_array() && !v->empty();
      if (ok)
        for (const auto& e : *v) {
          if (!e.is_string() || std::find(allowed.begin(), allowed.end(), e.get<std::string>()) == allowed.end()) {
            ok = false;
            break;
          }
          out.push_back(e.get<std::string>());
        }
      if (!ok) {
        fail(where(key) + " must be a non-empty list drawn from " + list(allowed));
        out = fallback;
      }
    }
    resolved_[key] = out;
    return out;
  }

  /// Number in rad/s or a string with a frequency unit.
  double frequency(const std::string& key, std::optional<double> fallback = std::nullopt) {
    return with_units(key, fallback, units::frequency, "a frequency (number in rad/s or e.g. \"125 kHz\")");
  }

  /// Number in seconds or a string with a time unit.
  double time(const std::string& key, std::optional<double> fallback = std::nullopt) {
    return with_units(key, fallback, units::time, "a time (number in s or e.g. \"12.5 us\")");
  }

  /// Number in radians or a string such as "pi/2" or "pi/sqrt(5)".
  double angle(const std::string& key, std::optional<double> fallback = std::nullopt) {
    return with_units(key, fallback, units::angle, "an angle (number or e.g. \"pi/sqrt(5)\")");
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    std::vector<double> out = fallback.value_or(std::vector<double>{});
    if (v) {
      out.clear();
      bool ok = v->is_array() && !v->empty();
      if (ok)
        for (const auto& e : *v) {
          if (!e.is_number()) {
            ok = false;
            break;
          }
          out.push_back(e.get<double>());
        }
      if (!ok) {
        fail(where(key) + " must be a non-empty list of numbers");
        out = fallback.value_or(std::vector<double>{});
      }
    }
    resolved_[key] = out;
    return out;
  }

  /// Nested object reader; a missing optional child reads as empty.
  Reader child(const std::string& key, bool required = false) {
    used_.insert(key);
    static const json empty = json::object();
    const json* src = &empty;
    if (valid_ && source_.contains(key)) src = &source_.at(key);
    else if (required) fail(where(key) + " is required");
    return Reader(*src, resolved_[key], where(key), errors_);
  }

  /// A block given either as one object or as a non-empty array of objects.
  std::vector<Reader> one_or_many(const std::string& key) {
    used_.insert(key);
    std::vector<Reader> out;
    if (!valid_ || !source_.contains(key)) {
      fail(where(key) + " is required");
      return out;
    }
    const json& src = source_.at(key);
    if (src.is_array()) {
      if (src.empty()) fail(where(key) + " must not be empty");
      json& dst = resolved_[key];
      dst = json::array();
      for (size_t i = 0; i < src.size(); ++i) dst.push_back(json::object());
      for (size_t i = 0; i < src.size(); ++i)
        out.emplace_back(src[i], dst[i], where(key) + "[" + std::to_string(i) + "]", errors_);
    } else {
      out.emplace_back(src, resolved_[key], where(key), errors_);
    }
    return out;
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    std::string out = fallback.value_or("");
    if (v) {
      if (v->is_string()) out = v->get<std::string>();
      else fail(where(key) + " must be a string");
    }
    resolved_[key] = out;
    return out;
  }

  /// Runs a module precondition check, recording its message on failure.
  template <typename Check>
  void check(Check&& f) {
    try {
      f();
    } catch (const Error& e) {
      fail((path_.empty() ? std::string() : path_ + ": ") + e.what());
    }
  }

  /// Number of the listed keys present in the source.
  int count_present(const std::vector<std::string>& keys) const {
    int n = 0;
    for (const auto& k : keys) n += has(k) ? 1 : 0;
    return n;
  }

  /// True if the key names a nested object (used for one-of blocks).
  bool is_object(const std::string& key) const { return has(key) && source_.at(key).is_object(); }

  void require_that(bool condition, const std::string& key, const std::string& message) {
    if (!condition) fail(where(key) + " " + message);
  }

  void fail(const std::string& message) { errors_.push_back(message); }

  /// Reports keys that were never read.
  void finish() {
    if (!valid_) return;
    for (const auto& [key, value] : source_.items())
      if (!used_.count(key)) fail(where(key) + " is not a recognized key");
  }

  const std::string& path() const { return path_; }
  json& resolved() { return resolved_; }

 private:
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* lookup(const std::string& key, bool optional) {
    used_.insert(key);
    if (!valid_) return nullptr;
    if (!source_.contains(key)) {
      if (!optional) fail(where(key) + " is required");
      return nullptr;
    }
    return &source_.at(key);
  }

  template <typename Parse>
  double with_units(const std::string& key, std::optional<double> fallback, Parse parse, const std::string& what) {
    const json* v = lookup(key, fallback.has_value());
    double out = fallback.value_or(0.0);
    if (v) {
      if (v->is_number()) {
        out = v->get<double>();
      } else if (v->is_string()) {
        const auto parsed = parse(v->get<std::string>());
        if (parsed) out = *parsed;
        else fail(where(key) + " must be " + what);
      } else {
        fail(where(key) + " must be " + what);
      }
    }
    resolved_[key] = out;
    return out;
  }

  static std::string list(const std::vector<std::string>& items) {
    std::string s = "{";
    for (size_t i = 0; i < items.size(); ++i) s += (i ? ", " : "") + items[i];
    return s + "}";
  }

  const json& source_;
  json& resolved_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> used_;
  bool valid_ = true;
};

}  // namespace qreservoir::cli
