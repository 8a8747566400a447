#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "lmpick/error.hpp"

namespace lmpick {

// i-th term (i >= 1) of the Luby sequence 1,1,2,1,1,2,4,...
inline std::uint64_t luby_core(std::uint64_t i) {
  if (i == 0) throw Error("luby index must be >= 1");
  for (;;) {
    int k = 1;
    while (((std::uint64_t{1} << k) - 1) < i) ++k;
    if (i == (std::uint64_t{1} << k) - 1) return std::uint64_t{1} << (k - 1);
    i -= (std::uint64_t{1} << (k - 1)) - 1;
  }
}

struct FixedRestarts {
  std::uint64_t size;
  friend bool operator==(const FixedRestarts&, const FixedRestarts&) = default;
};
struct LubyRestarts {
  std::uint64_t unit;
  friend bool operator==(const LubyRestarts&, const LubyRestarts&) = default;
};
struct GeometricRestarts {
  std::uint64_t init;
  double factor;
  friend bool operator==(const GeometricRestarts&, const GeometricRestarts&) = default;
};
struct NestedRestarts {
  std::uint64_t inner;
  std::uint64_t outer;
  double factor;
  friend bool operator==(const NestedRestarts&, const NestedRestarts&) = default;
};

using RestartKind = std::variant<FixedRestarts, LubyRestarts, GeometricRestarts, NestedRestarts>;

struct RestartStrategy {
  std::string name;
  RestartKind kind;

  friend bool operator==(const RestartStrategy&, const RestartStrategy&) = default;
};

inline void validate(const RestartStrategy& s) {
  auto bad = [&](const char* why) { throw Error("invalid restart strategy '" + s.name + "': " + why); };
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FixedRestarts>) {
          if (k.size < 1) bad("size must be >= 1");
        } else if constexpr (std::is_same_v<K, LubyRestarts>) {
          if (k.unit < 1) bad("unit must be >= 1");
        } else if constexpr (std::is_same_v<K, GeometricRestarts>) {
          if (k.init < 1) bad("initial length must be >= 1");
          if (!(k.factor > 1.0)) bad("factor must be > 1");
        } else {
          if (k.inner < 1 || k.outer < 1) bad("lengths must be >= 1");
          if (!(k.factor > 1.0)) bad("factor must be > 1");
        }
      },
      s.kind);
}

inline RestartStrategy make_fixed(std::uint64_t size, std::string name = {}) {
  if (name.empty()) name = "Fixed-" + std::to_string(size);
  RestartStrategy s{std::move(name), FixedRestarts{size}};
  validate(s);
  return s;
}
inline RestartStrategy make_luby(std::uint64_t unit, std::string name = {}) {
  if (name.empty()) name = "luby-" + std::to_string(unit);
  RestartStrategy s{std::move(name), LubyRestarts{unit}};
  validate(s);
  return s;
}
inline RestartStrategy make_geometric(std::uint64_t init, double factor, std::string name) {
  RestartStrategy s{std::move(name), GeometricRestarts{init, factor}};
  validate(s);
  return s;
}
inline RestartStrategy make_nested(std::uint64_t inner, std::uint64_t outer, double factor,
                                   std::string name) {
  RestartStrategy s{std::move(name), NestedRestarts{inner, outer, factor}};
  validate(s);
  return s;
}

namespace detail {
// Caps real-valued lengths far below overflow; such budgets are never reached.
inline std::uint64_t emit_length(double x) {
  constexpr double kCap = 4.0e18;
  if (!(x < kCap)) return static_cast<std::uint64_t>(kCap);
  double f = std::floor(x);
  return f < 1.0 ? 1 : static_cast<std::uint64_t>(f);
}
}  // namespace detail

// Stateful generator of restart lengths t_1, t_2, ... Either follows a
// strategy or an explicit prefix whose last element repeats.
class RestartSequence {
 public:
  RestartSequence() : RestartSequence(std::vector<std::uint64_t>{1}) {}
  explicit RestartSequence(RestartStrategy s) : strategy_(std::move(s)) {
    validate(*strategy_);
    if (auto* n = std::get_if<NestedRestarts>(&strategy_->kind)) {
      nested_cur_ = static_cast<double>(n->inner);
      nested_outer_ = static_cast<double>(n->outer);
    }
  }
  explicit RestartSequence(std::vector<std::uint64_t> explicit_lengths)
      : explicit_(std::move(explicit_lengths)) {
    if (explicit_.empty()) throw Error("explicit restart sequence must not be empty");
    for (auto x : explicit_) {
      if (x < 1) throw Error("restart lengths must be >= 1");
    }
  }

  // Length of the next restart; the first call yields t_1.
  std::uint64_t next() {
    ++index_;
    if (!strategy_) return explicit_[std::min<std::size_t>(index_ - 1, explicit_.size() - 1)];
    return std::visit(
        [&](const auto& k) -> std::uint64_t {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, FixedRestarts>) {
            return k.size;
          } else if constexpr (std::is_same_v<K, LubyRestarts>) {
            return k.unit * luby_core(index_);
          } else if constexpr (std::is_same_v<K, GeometricRestarts>) {
            return detail::emit_length(static_cast<double>(k.init) *
                                       std::pow(k.factor, static_cast<double>(index_ - 1)));
          } else {
            std::uint64_t out = detail::emit_length(nested_cur_);
            double candidate = nested_cur_ * k.factor;
            if (candidate > nested_outer_) {
              nested_cur_ = static_cast<double>(k.inner);
              nested_outer_ *= k.factor;
            } else {
              nested_cur_ = candidate;
            }
            return out;
          }
        },
        strategy_->kind);
  }

  // Number of lengths handed out so far.
  std::uint64_t index() const { return index_; }
  // Outer bound currently in force for Nested strategies (0 otherwise).
  double nested_outer_bound() const { return nested_outer_; }
  const RestartStrategy* strategy() const { return strategy_ ? &*strategy_ : nullptr; }

 private:
  std::optional<RestartStrategy> strategy_;
  std::vector<std::uint64_t> explicit_;
  std::uint64_t index_ = 0;
  double nested_cur_ = 0.0;
  double nested_outer_ = 0.0;
};

// t_i for strategy s. Nested lengths depend on history, so this replays the
// sequence from the start (O(i)).
inline std::uint64_t restart_length(const RestartStrategy& s, std::uint64_t i) {
  if (i == 0) throw Error("restart index must be >= 1");
  if (std::holds_alternative<NestedRestarts>(s.kind)) {
    RestartSequence seq(s);
    std::uint64_t out = 0;
    for (std::uint64_t j = 0; j < i; ++j) out = seq.next();
    return out;
  }
  return std::visit(
      [&](const auto& k) -> std::uint64_t {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FixedRestarts>) {
          return k.size;
        } else if constexpr (std::is_same_v<K, LubyRestarts>) {
          return k.unit * luby_core(i);
        } else if constexpr (std::is_same_v<K, GeometricRestarts>) {
          return detail::emit_length(static_cast<double>(k.init) *
                                     std::pow(k.factor, static_cast<double>(i - 1)));
        } else {
          return 0;
        }
      },
      s.kind);
}

using Portfolio = std::vector<RestartStrategy>;

// The nine strategies, in their fixed order (index = tie-break key).
inline Portfolio default_portfolio() {
  return {
      make_luby(32, "luby-32"),
      make_luby(512, "luby-512"),
      make_fixed(512, "Fixed-512"),
      make_fixed(4096, "Fixed-4096"),
      make_fixed(16384, "Fixed-16384"),
      make_geometric(32, 1.1, "Geometric-1.1"),
      make_geometric(100, 1.5, "Geometric-1.5"),
      make_nested(100, 1000, 1.1, "Nested-1.1"),
      make_nested(100, 1000, 1.5, "Nested-1.5"),
  };
}

// Looks a strategy up by name in the default portfolio, or parses one of
//   luby:<unit>  fixed:<n>  geometric:<init>:<f>  nested:<inner>:<outer>:<f>
inline RestartStrategy strategy_from_name(const std::string& spec) {
  for (auto& s : default_portfolio()) {
    if (s.name == spec) return s;
  }
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  auto num = [&](std::size_t i) -> double {
    try {
      std::size_t used = 0;
      double v = std::stod(parts.at(i), &used);
      if (used != parts[i].size()) throw Error("");
      return v;
    } catch (const std::exception&) {
      throw Error("cannot parse restart strategy '" + spec + "'");
    }
  };
  auto whole = [&](std::size_t i) {
    double v = num(i);
    if (v < 1 || v != std::floor(v)) throw Error("restart length must be a positive integer in '" + spec + "'");
    return static_cast<std::uint64_t>(v);
  };
  if (parts.size() == 2 && parts[0] == "luby") return make_luby(whole(1), spec);
  if (parts.size() == 2 && parts[0] == "fixed") return make_fixed(whole(1), spec);
  if (parts.size() == 3 && parts[0] == "geometric") return make_geometric(whole(1), num(2), spec);
  if (parts.size() == 4 && parts[0] == "nested") return make_nested(whole(1), whole(2), num(3), spec);
  throw Error("unknown restart strategy '" + spec + "'");
}

inline Portfolio parse_portfolio(const std::string& csv) {
  Portfolio p;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) p.push_back(strategy_from_name(item));
  }
  if (p.empty()) throw Error("empty portfolio");
  return p;
}

}  // namespace lmpick
