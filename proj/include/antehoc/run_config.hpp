// Copyright 2026 The Antehoc Authors
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

// Run configuration: a flat key=value file, overridable key by key, with a
// digest over every key that influences results.
//
// Keys (defaults in parentheses):
//   dataset, ground_truth, out_dir        paths
//   split_seed (0)    seeds (1-20)        e.g. "1-5" or "1,3,7"
//   method (rage)     rage | single | keep
//   inner_steps (20)  outer_steps (100)   inner_lr (0.001) outer_lr (0.001)
//   inner_l2 (0.001)  outer_l1 (0.001)    outer_l2 (0.001) patience (10)
//   width (20)        inner_optimizer (sgd | adam)
//   l1_reduction (sum | graph | edge)

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "antehoc/bilevel.hpp"
#include "antehoc/errors.hpp"

namespace antehoc {

/// Ordered key=value pairs.
using ConfigMap = std::map<std::string, std::string>;

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "dataset",    "ground_truth", "out_dir",  "split_seed",      "seeds",
      "method",     "inner_steps",  "outer_steps", "inner_lr",     "outer_lr",
      "inner_l2",   "outer_l1",     "outer_l2", "patience",        "width",
      "inner_optimizer", "l1_reduction"};
  return keys;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses "key = value" lines; '#' starts a comment. Unknown keys and
/// malformed lines are configuration errors.
inline ConfigMap parse_config(std::istream& in, const std::string& source = "config") {
  ConfigMap m;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterError(source + ":" + std::to_string(n) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!known_config_keys().count(key)) {
      throw ParameterError(source + ":" + std::to_string(n) + ": unknown key '" + key + "'");
    }
    m[key] = value;
  }
  return m;
}

inline ConfigMap load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

/// Inclusive ranges and lists: "1-20", "1,2,5", "3".
inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  auto number = [&](const std::string& s) {
    std::uint64_t v = 0;
    const std::string t = detail::trim(s);
    auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
      throw ParameterError("bad seed list '" + text + "'");
    }
    return v;
  };
  while (std::getline(ss, part, ',')) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(part));
    } else {
      const auto lo = number(part.substr(0, dash));
      const auto hi = number(part.substr(dash + 1));
      if (hi < lo) throw ParameterError("bad seed range '" + part + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw ParameterError("empty seed list");
  return out;
}

struct RunConfig {
  std::string dataset;
  std::string ground_truth;
  std::string out_dir;
  std::uint64_t split_seed = 0;
  std::vector<std::uint64_t> seeds = parse_seed_list("1-20");
  Method method = Method::kRage;
  TrainConfig train;

  /// Canonical text of every key that influences results.
  std::string canonical() const;
  /// FNV-1a 64-bit hash of `canonical()`, as 16 hex digits.
  std::string digest() const;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ParameterError("config key " + key + ": '" + v + "' is not a number");
  }
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ParameterError("config key " + key + ": '" + v + "' is not a non-negative integer");
  }
  return out;
}

}  // namespace detail

inline Method parse_method(const std::string& v) {
  if (v == "rage" || v == "full") return Method::kRage;
  if (v == "single" || v == "rage-single") return Method::kSingle;
  if (v == "keep" || v == "rage-keep") return Method::kKeep;
  throw ParameterError("unknown method '" + v + "' (expected rage, single or keep)");
}

inline const char* to_string(InnerOptimizer o) { return o == InnerOptimizer::kSgd ? "sgd" : "adam"; }

inline const char* to_string(L1Reduction r) {
  switch (r) {
    case L1Reduction::kSum: return "sum";
    case L1Reduction::kPerGraph: return "graph";
    case L1Reduction::kPerEdge: return "edge";
  }
  return "?";
}

/// Applies `m` on top of `base`.
inline RunConfig apply_config(RunConfig base, const ConfigMap& m) {
  for (const auto& [k, v] : m) {
    using detail::parse_double;
    using detail::parse_uint;
    TrainConfig& t = base.train;
    if (k == "dataset") base.dataset = v;
    else if (k == "ground_truth") base.ground_truth = v;
    else if (k == "out_dir") base.out_dir = v;
    else if (k == "split_seed") base.split_seed = parse_uint(k, v);
    else if (k == "seeds") base.seeds = parse_seed_list(v);
    else if (k == "method") base.method = parse_method(v);
    else if (k == "inner_steps") t.inner_steps = parse_uint(k, v);
    else if (k == "outer_steps") t.outer_steps = parse_uint(k, v);
    else if (k == "inner_lr") t.inner_lr = parse_double(k, v);
    else if (k == "outer_lr") t.outer_lr = parse_double(k, v);
    else if (k == "inner_l2") t.inner_l2 = parse_double(k, v);
    else if (k == "outer_l1") t.outer_l1 = parse_double(k, v);
    else if (k == "outer_l2") t.outer_l2 = parse_double(k, v);
    else if (k == "patience") t.patience = parse_uint(k, v);
    else if (k == "width") t.width = parse_uint(k, v);
    else if (k == "inner_optimizer") {
      if (v == "adam") t.inner_optimizer = InnerOptimizer::kAdam;
      else if (v == "sgd") t.inner_optimizer = InnerOptimizer::kSgd;
      else throw ParameterError("inner_optimizer must be adam or sgd");
    } else if (k == "l1_reduction") {
      if (v == "sum") t.l1_reduction = L1Reduction::kSum;
      else if (v == "graph") t.l1_reduction = L1Reduction::kPerGraph;
      else if (v == "edge") t.l1_reduction = L1Reduction::kPerEdge;
      else throw ParameterError("l1_reduction must be sum, graph or edge");
    } else {
      throw ParameterError("unknown key '" + k + "'");
    }
  }
  base.train.validate();
  return base;
}

inline std::string RunConfig::canonical() const {
  using detail::fmt_double;
  std::ostringstream o;
  std::string seed_text;
  for (std::size_t i = 0; i < seeds.size(); ++i) seed_text += (i ? "," : "") + std::to_string(seeds[i]);
  o << "dataset=" << dataset << '\n'
    << "inner_l2=" << fmt_double(train.inner_l2) << '\n'
    << "inner_lr=" << fmt_double(train.inner_lr) << '\n'
    << "inner_optimizer=" << to_string(train.inner_optimizer) << '\n'
    << "inner_steps=" << train.inner_steps << '\n'
    << "l1_reduction=" << to_string(train.l1_reduction) << '\n'
    << "method=" << method_tag(method) << '\n'
    << "outer_l1=" << fmt_double(train.outer_l1) << '\n'
    << "outer_l2=" << fmt_double(train.outer_l2) << '\n'
    << "outer_lr=" << fmt_double(train.outer_lr) << '\n'
    << "outer_steps=" << train.outer_steps << '\n'
    << "patience=" << train.patience << '\n'
    << "seeds=" << seed_text << '\n'
    << "split_seed=" << split_seed << '\n'
    << "width=" << train.width << '\n';
  return o.str();
}

inline std::string RunConfig::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace antehoc
