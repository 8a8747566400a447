#pragma once

// CNF formulas: DIMACS ingestion and the light preprocessing applied before
// feature extraction and search (tautology/duplicate removal plus unit
// propagation to fixpoint).

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lmpick/error.hpp"

namespace lmpick {

using Var = std::uint32_t;  // 1-based

// Literal packed as 2*var + negative. Code 0/1 are never valid literals.
class Lit {
 public:
  constexpr Lit() = default;
  constexpr Lit(Var v, bool negative) : code_(2 * v + (negative ? 1u : 0u)) {}

  static constexpr Lit from_code(std::uint32_t code) {
    Lit l;
    l.code_ = code;
    return l;
  }
  static constexpr Lit from_dimacs(long long x) {
    return x < 0 ? Lit(static_cast<Var>(-x), true) : Lit(static_cast<Var>(x), false);
  }

  constexpr Var var() const { return code_ >> 1; }
  constexpr bool negative() const { return code_ & 1u; }
  constexpr std::uint32_t code() const { return code_; }
  constexpr long long to_dimacs() const {
    return negative() ? -static_cast<long long>(var()) : static_cast<long long>(var());
  }

  constexpr Lit operator~() const { return from_code(code_ ^ 1u); }
  friend constexpr bool operator==(Lit a, Lit b) = default;
  friend constexpr auto operator<=>(Lit a, Lit b) = default;

 private:
  std::uint32_t code_ = 0;
};

using Clause = std::vector<Lit>;

struct Formula {
  Var num_vars = 0;
  std::vector<Clause> clauses;
  std::string source_name;

  friend bool operator==(const Formula&, const Formula&) = default;
};

enum class PreprocessStatus { Reduced, ProvenUnsat };

struct PreprocessResult {
  Formula formula;
  std::map<Var, bool> fixed_assignment;
  PreprocessStatus status = PreprocessStatus::Reduced;
};

// Accepts `c` comments, one `p cnf V C` header, zero-terminated clauses that
// may span lines, and an optional `%` line ending the clause section (SATLIB).
inline Formula parse_dimacs(std::istream& in, std::string source_name = {}) {
  Formula f;
  f.source_name = std::move(source_name);
  bool have_header = false;
  long long declared_clauses = 0;
  Clause current;
  std::size_t line_no = 0;
  std::size_t last_line = 0;
  std::string line;

  while (std::getline(in, line)) {
    ++line_no;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    char lead = line[first];
    if (lead == 'c') continue;
    if (lead == '%') break;
    if (lead == 'p') {
      if (have_header) throw ParseError(line_no, "duplicate problem header");
      std::istringstream hs(line.substr(first));
      std::string p, fmt, extra;
      long long nv = -1, nc = -1;
      if (!(hs >> p >> fmt >> nv >> nc) || p != "p" || fmt != "cnf" || nv < 0 || nc < 0 ||
          (hs >> extra)) {
        throw ParseError(line_no, "malformed problem header '" + line + "'");
      }
      f.num_vars = static_cast<Var>(nv);
      declared_clauses = nc;
      have_header = true;
      continue;
    }
    if (!have_header) throw ParseError(line_no, "clause data before 'p cnf' header");

    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      char* end = nullptr;
      long long x = std::strtoll(tok.c_str(), &end, 10);
      if (end == tok.c_str() || *end != '\0') {
        throw ParseError(line_no, "invalid literal token '" + tok + "'");
      }
      if (x == 0) {
        f.clauses.push_back(std::move(current));
        current.clear();
        last_line = line_no;
        continue;
      }
      if (std::llabs(x) > static_cast<long long>(f.num_vars)) {
        throw ParseError(line_no, "literal " + std::to_string(std::llabs(x)) +
                                      " exceeds declared variable count");
      }
      current.push_back(Lit::from_dimacs(x));
    }
    last_line = line_no;
  }
  if (!have_header) throw ParseError(line_no, "missing 'p cnf' header");
  // A final clause without its terminating 0 is accepted.
  if (!current.empty()) f.clauses.push_back(std::move(current));
  if (static_cast<long long>(f.clauses.size()) != declared_clauses) {
    throw ParseError(std::max(last_line, line_no),
                     "clause count mismatch: header declares " + std::to_string(declared_clauses) +
                         ", found " + std::to_string(f.clauses.size()));
  }
  return f;
}

inline Formula parse_dimacs_string(const std::string& text, std::string source_name = {}) {
  std::istringstream in(text);
  return parse_dimacs(in, std::move(source_name));
}

inline std::string to_dimacs(const Formula& f) {
  std::ostringstream out;
  if (!f.source_name.empty()) out << "c " << f.source_name << "\n";
  out << "p cnf " << f.num_vars << " " << f.clauses.size() << "\n";
  for (const Clause& c : f.clauses) {
    for (Lit l : c) out << l.to_dimacs() << " ";
    out << "0\n";
  }
  return out.str();
}

// Sorts by variable (negative after positive), drops repeated literals.
// Returns false for tautologies.
inline bool normalize_clause(Clause& c) {
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (c[i].var() == c[i - 1].var()) return false;
  }
  return true;
}

inline PreprocessResult preprocess(const Formula& f) {
  PreprocessResult out;
  out.formula.num_vars = f.num_vars;
  out.formula.source_name = f.source_name;

  auto proven_unsat = [&] {
    out.status = PreprocessStatus::ProvenUnsat;
    out.fixed_assignment.clear();
    out.formula.clauses.assign(1, Clause{});
    return out;
  };

  std::vector<Clause> clauses;
  clauses.reserve(f.clauses.size());
  for (Clause c : f.clauses) {
    if (!normalize_clause(c)) continue;
    if (c.empty()) return proven_unsat();
    clauses.push_back(std::move(c));
  }

  // value[var]: 0 unassigned, 1 true, -1 false
  std::vector<int> value(f.num_vars + 1, 0);
  std::vector<std::vector<std::size_t>> occurs(2 * (f.num_vars + 1));
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    for (Lit l : clauses[i]) occurs[l.code()].push_back(i);
  }
  auto lit_value = [&](Lit l) { return l.negative() ? -value[l.var()] : value[l.var()]; };

  std::vector<Lit> queue;
  auto assign = [&](Lit l) {
    int v = lit_value(l);
    if (v > 0) return true;
    if (v < 0) return false;
    value[l.var()] = l.negative() ? -1 : 1;
    queue.push_back(l);
    return true;
  };
  for (const Clause& c : clauses) {
    if (c.size() == 1 && !assign(c[0])) return proven_unsat();
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    Lit falsified = ~queue[head];
    for (std::size_t ci : occurs[falsified.code()]) {
      std::size_t unassigned = 0;
      Lit last{};
      bool satisfied = false;
      for (Lit l : clauses[ci]) {
        int v = lit_value(l);
        if (v > 0) {
          satisfied = true;
          break;
        }
        if (v == 0) {
          ++unassigned;
          last = l;
        }
      }
      if (satisfied) continue;
      if (unassigned == 0) return proven_unsat();
      if (unassigned == 1) assign(last);
    }
  }

  std::set<Clause> seen;
  for (const Clause& c : clauses) {
    Clause reduced;
    bool satisfied = false;
    for (Lit l : c) {
      int v = lit_value(l);
      if (v > 0) {
        satisfied = true;
        break;
      }
      if (v == 0) reduced.push_back(l);
    }
    if (satisfied) continue;
    if (seen.insert(reduced).second) out.formula.clauses.push_back(std::move(reduced));
  }
  for (Var v = 1; v <= f.num_vars; ++v) {
    if (value[v] != 0) out.fixed_assignment.emplace(v, value[v] > 0);
  }
  return out;
}

// model[v] for v in 1..num_vars; index 0 is unused.
using Model = std::vector<std::optional<bool>>;

inline bool check_model(const Formula& f, const Model& model) {
  if (model.size() < static_cast<std::size_t>(f.num_vars) + 1) {
    throw Error("model covers fewer variables than the formula declares");
  }
  for (Var v = 1; v <= f.num_vars; ++v) {
    if (!model[v]) throw Error("variable " + std::to_string(v) + " is unassigned in model");
  }
  for (const Clause& c : f.clauses) {
    bool sat = std::any_of(c.begin(), c.end(),
                           [&](Lit l) { return *model[l.var()] != l.negative(); });
    if (!sat) return false;
  }
  return true;
}

}  // namespace lmpick
