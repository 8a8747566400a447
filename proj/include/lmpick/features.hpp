#pragma once

// The 60-entry feature vector:
//   set I   (1-2)   raw size of the input formula
//   set II  (3-25)  structure of the preprocessed formula
//   set III (26-37) search statistics from the observation window
//   set IV  (38-60) set II recomputed on the solver state at window close

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lmpick/cnf.hpp"
#include "lmpick/error.hpp"
#include "lmpick/solver.hpp"

namespace lmpick {

inline constexpr std::size_t kNumFeatures = 60;
inline constexpr std::size_t kSetISize = 2;
inline constexpr std::size_t kSetIISize = 23;
inline constexpr std::size_t kSetIIISize = 12;
inline constexpr std::size_t kSetIVSize = 23;

// Feature k (1-based, as in the layout above) lives at index k-1.
using FeatureVector = std::array<double, kNumFeatures>;
using StructuralFeatures = std::array<double, kSetIISize>;
using WindowFeatures = std::array<double, kSetIIISize>;

struct StatQuad {
  double mean = 0.0;
  double variation_coefficient = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Population standard deviation; cv of a zero-mean sample is 0; an empty
// sample yields all zeros.
inline StatQuad stat_quad(std::span<const double> xs) {
  StatQuad q;
  if (xs.empty()) return q;
  double n = static_cast<double>(xs.size());
  q.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - q.mean) * (x - q.mean);
  double sd = std::sqrt(ss / n);
  q.variation_coefficient = q.mean != 0.0 ? sd / std::fabs(q.mean) : 0.0;
  auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  q.min = *lo;
  q.max = *hi;
  // Rounding can push the mean a hair outside [min, max] on constant samples.
  q.mean = std::clamp(q.mean, q.min, q.max);
  return q;
}

inline const std::array<std::string, kNumFeatures>& feature_names() {
  static const std::array<std::string, kNumFeatures> names = [] {
    std::array<std::string, kNumFeatures> n;
    std::size_t i = 0;
    auto quad = [&](const std::string& p) {
      for (const char* s : {"_mean", "_cv", "_min", "_max"}) n[i++] = p + s;
    };
    auto structural = [&](const std::string& p) {
      n[i++] = p + "num_vars";
      n[i++] = p + "num_clauses";
      n[i++] = p + "vars_clauses_ratio";
      n[i++] = p + "binary_clauses";
      n[i++] = p + "ternary_clauses";
      n[i++] = p + "horn_clauses";
      quad(p + "vcg_var_degree");
      quad(p + "vcg_clause_degree");
      quad(p + "horn_occurrences");
      quad(p + "pos_neg_ratio");
      n[i++] = p + "assigned_vars";
    };
    n[i++] = "orig_num_vars";
    n[i++] = "orig_num_clauses";
    structural("pre_");
    quad("backjump_size");
    quad("search_depth");
    quad("log_wbe");
    structural("post_");
    return n;
  }();
  return names;
}

// Un-normalized structural measurements of a clause database.
struct StructuralCounts {
  double num_vars = 0;  // variables occurring in the database
  double num_clauses = 0;
  double binary = 0;
  double ternary = 0;
  double horn = 0;
  std::vector<double> var_degrees;      // per occurring variable
  std::vector<double> clause_degrees;   // per clause
  std::vector<double> horn_occurrences; // per occurring variable
  std::vector<double> pos_ratios;       // pos/(pos+neg) per occurring variable
};

inline StructuralCounts structural_counts(std::span<const Clause> clauses, Var num_vars) {
  StructuralCounts s;
  std::vector<double> pos(num_vars + 1, 0.0), neg(num_vars + 1, 0.0), horn_occ(num_vars + 1, 0.0);
  s.num_clauses = static_cast<double>(clauses.size());
  for (const Clause& c : clauses) {
    s.clause_degrees.push_back(static_cast<double>(c.size()));
    if (c.size() == 2) ++s.binary;
    if (c.size() == 3) ++s.ternary;
    std::size_t positives = 0;
    for (Lit l : c) {
      if (l.negative()) ++neg[l.var()];
      else ++pos[l.var()], ++positives;
    }
    if (positives <= 1) {
      ++s.horn;
      for (Lit l : c) ++horn_occ[l.var()];
    }
  }
  for (Var v = 1; v <= num_vars; ++v) {
    double occ = pos[v] + neg[v];
    if (occ == 0) continue;
    ++s.num_vars;
    s.var_degrees.push_back(occ);
    s.horn_occurrences.push_back(horn_occ[v]);
    s.pos_ratios.push_back(pos[v] / occ);
  }
  return s;
}

namespace detail {
inline void put_quad(double*& out, StatQuad q) {
  *out++ = q.mean;
  *out++ = q.variation_coefficient;
  *out++ = q.min;
  *out++ = q.max;
}
inline std::vector<double> scaled(std::vector<double> xs, double by) {
  for (double& x : xs) x = by > 0 ? x / by : 0.0;
  return xs;
}
}  // namespace detail

// Set II/IV layout. Clause-type counts are fractions of the clause count,
// variable-node degrees and Horn occurrences are divided by the clause
// count, clause-node degrees by the occurring-variable count, and the
// assigned count by num_vars. Variable and clause counts stay raw.
inline StructuralFeatures structural_features(std::span<const Clause> clauses, Var num_vars,
                                              std::size_t assigned) {
  StructuralCounts s = structural_counts(clauses, num_vars);
  StructuralFeatures f{};
  double* out = f.data();
  double m = s.num_clauses;
  *out++ = s.num_vars;
  *out++ = s.num_clauses;
  *out++ = m > 0 ? s.num_vars / m : 0.0;
  *out++ = m > 0 ? s.binary / m : 0.0;
  *out++ = m > 0 ? s.ternary / m : 0.0;
  *out++ = m > 0 ? s.horn / m : 0.0;
  detail::put_quad(out, stat_quad(detail::scaled(s.var_degrees, m)));
  detail::put_quad(out, stat_quad(detail::scaled(s.clause_degrees, s.num_vars)));
  detail::put_quad(out, stat_quad(detail::scaled(s.horn_occurrences, m)));
  detail::put_quad(out, stat_quad(s.pos_ratios));
  *out++ = num_vars > 0 ? static_cast<double>(assigned) / num_vars : 0.0;
  return f;
}

inline StructuralFeatures structural_features(const PreprocessResult& p) {
  if (p.status != PreprocessStatus::Reduced) throw Error("structural features need a reduced formula");
  return structural_features(p.formula.clauses, p.formula.num_vars, p.fixed_assignment.size());
}

// Set IV: the solver's clause database (original + learnt) under its
// current level-0 assignment.
inline StructuralFeatures post_window_features(const Solver& s) {
  std::vector<Clause> db = s.simplified_database();
  return structural_features(db, s.num_vars(), s.level0_assigned());
}

inline WindowFeatures window_features(const WindowStats& w) {
  if (w.depths.empty() || w.backjump_sizes.empty() || w.log_wbe.empty()) {
    throw Error("empty observation window");
  }
  WindowFeatures f{};
  double* out = f.data();
  detail::put_quad(out, stat_quad(w.backjump_sizes));
  detail::put_quad(out, stat_quad(w.depths));
  detail::put_quad(out, stat_quad(w.log_wbe));
  return f;
}

inline std::array<double, kSetISize> input_size_features(const Formula& original) {
  return {static_cast<double>(original.num_vars), static_cast<double>(original.clauses.size())};
}

inline FeatureVector assemble(std::span<const double> set1, std::span<const double> set2,
                              std::span<const double> set3, std::span<const double> set4) {
  if (set1.size() != kSetISize || set2.size() != kSetIISize || set3.size() != kSetIIISize ||
      set4.size() != kSetIVSize) {
    throw Error("feature set sizes must be 2/23/12/23, got " + std::to_string(set1.size()) + "/" +
                std::to_string(set2.size()) + "/" + std::to_string(set3.size()) + "/" +
                std::to_string(set4.size()));
  }
  FeatureVector v{};
  auto it = std::copy(set1.begin(), set1.end(), v.begin());
  it = std::copy(set2.begin(), set2.end(), it);
  it = std::copy(set3.begin(), set3.end(), it);
  std::copy(set4.begin(), set4.end(), it);
  return v;
}

}  // namespace lmpick
