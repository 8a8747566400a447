#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "lmpick/cnf.hpp"
#include "lmpick/error.hpp"

namespace lmpick {

// Uniform random k-SAT: every clause has k distinct variables with
// independent random signs.
inline Formula random_ksat(Var num_vars, std::size_t num_clauses, std::mt19937_64& rng,
                           unsigned k = 3) {
  if (num_vars < k) throw Error("random k-SAT needs at least k variables");
  Formula f;
  f.num_vars = num_vars;
  f.clauses.reserve(num_clauses);
  std::uniform_int_distribution<Var> pick_var(1, num_vars);
  std::bernoulli_distribution pick_sign(0.5);
  for (std::size_t c = 0; c < num_clauses; ++c) {
    Clause cl;
    while (cl.size() < k) {
      Var v = pick_var(rng);
      bool dup = false;
      for (Lit l : cl) dup = dup || l.var() == v;
      if (!dup) cl.push_back(Lit(v, pick_sign(rng)));
    }
    f.clauses.push_back(std::move(cl));
  }
  return f;
}

inline std::size_t clauses_for_ratio(Var num_vars, double ratio) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(num_vars)));
}

}  // namespace lmpick
