#pragma once

// Conflict-driven clause-learning solver with an injectable restart schedule.
//
// Search: two-watched-literal propagation, first-UIP learning with local
// minimization, non-chronological backjumping. Decisions favour free
// variables of the most recent unsatisfied learnt clauses (BerkMin style)
// and fall back to literal-activity VSIDS; polarity comes from saved phases.
// Observers see every conflict and every restart boundary and may switch
// the schedule once or stop the search there.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "lmpick/cnf.hpp"
#include "lmpick/cpu_time.hpp"
#include "lmpick/restart.hpp"

namespace lmpick {

struct ConflictEvent {
  std::uint64_t conflict_index = 0;  // 1-based running count
  std::uint32_t depth = 0;           // decision level at detection
  std::uint32_t backjump_size = 0;   // depth - assertion level
  std::uint32_t learnt_len = 0;
  std::uint64_t restart_index = 0;   // restart the conflict belongs to
};

struct RestartEvent {
  std::uint64_t index = 0;  // restart that just completed
  std::uint64_t length = 0;
  std::uint64_t total_conflicts = 0;
};

struct WindowStats {
  std::vector<double> backjump_sizes;
  std::vector<double> depths;
  std::vector<double> log_wbe;

  std::size_t size() const { return depths.size(); }
};

enum class SolveStatus { Sat, Unsat, Timeout, Stopped };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Sat: return "sat";
    case SolveStatus::Unsat: return "unsat";
    case SolveStatus::Timeout: return "timeout";
    case SolveStatus::Stopped: return "stopped";
  }
  return "?";
}

struct SolveOutcome {
  SolveStatus status = SolveStatus::Timeout;
  Model model;  // filled for Sat
  double cpu_seconds = 0.0;
  std::uint64_t conflicts = 0;
  std::uint64_t restarts = 0;
  std::optional<WindowStats> window;
};

// Weighted backtrack estimator over conflict leaves. A leaf at depth d has
// weight 2^-d and stands for a tree of 2^(d+1)-1 nodes.
class WbeEstimator {
 public:
  static constexpr int kMaxWeightExponent = 63;
  // Tree sizes beyond 2^1001 are clamped so every estimate stays finite.
  static constexpr int kMaxSizeExponent = 1000;

  void add_leaf(std::uint32_t depth) {
    int e = std::min<int>(static_cast<int>(depth), kMaxWeightExponent);
    int d = std::min<int>(static_cast<int>(depth), kMaxSizeExponent);
    double w = std::ldexp(1.0, -e);
    weight_sum_ += w;
    weighted_size_sum_ += w * (std::ldexp(1.0, d + 1) - 1.0);
  }
  void reset() { weight_sum_ = weighted_size_sum_ = 0.0; }

  double weight_sum() const { return weight_sum_; }
  double weighted_size_sum() const { return weighted_size_sum_; }
  double estimate() const { return weight_sum_ > 0.0 ? weighted_size_sum_ / weight_sum_ : 0.0; }
  double log2_estimate() const { return std::log2(estimate()); }

 private:
  double weight_sum_ = 0.0;
  double weighted_size_sum_ = 0.0;
};

class Solver;

class SolveObserver {
 public:
  virtual ~SolveObserver() = default;
  virtual void on_conflict(const Solver&, const ConflictEvent&) {}
  // Called after the solver has backtracked to level 0 and before the next
  // restart's budget is drawn.
  virtual void on_restart(Solver&, const RestartEvent&) {}
};

// Records window samples for the conflicts of one restart. WBE state resets
// at each restart boundary.
class WindowRecorder : public SolveObserver {
 public:
  explicit WindowRecorder(std::uint64_t window_restart) : window_restart_(window_restart) {}

  void record(const ConflictEvent& e) {
    wbe_.add_leaf(e.depth);
    stats_.depths.push_back(e.depth);
    stats_.backjump_sizes.push_back(e.backjump_size);
    stats_.log_wbe.push_back(wbe_.log2_estimate());
  }

  void on_conflict(const Solver&, const ConflictEvent& e) override {
    if (e.restart_index == window_restart_) record(e);
  }
  void on_restart(Solver&, const RestartEvent& e) override {
    wbe_.reset();
    if (e.index == window_restart_) closed_ = true;
  }

  bool closed() const { return closed_; }
  const WindowStats& stats() const { return stats_; }
  const WbeEstimator& wbe() const { return wbe_; }

 private:
  std::uint64_t window_restart_;
  WbeEstimator wbe_;
  WindowStats stats_;
  bool closed_ = false;
};

struct SolverOptions {
  std::uint64_t seed = 0;  // 0: no activity jitter
  std::ostream* event_log = nullptr;
  double var_decay = 0.95;
  std::uint64_t decay_interval = 128;
  double clause_decay = 0.999;
  std::size_t recent_clause_scan = 64;
  std::size_t min_learnt_limit = 20000;
};

class Solver {
 public:
  explicit Solver(const PreprocessResult& pre, SolverOptions opts = {})
      : opts_(opts), n_(pre.formula.num_vars), reduced_(pre.formula) {
    assigns_.assign(n_ + 1, 0);
    level_.assign(n_ + 1, 0);
    reason_.assign(n_ + 1, kNoClause);
    phase_.assign(n_ + 1, 0);
    seen_.assign(n_ + 1, 0);
    lit_activity_.assign(2 * (n_ + 1), 0.0);
    watches_.resize(2 * (n_ + 1));
    heap_pos_.assign(n_ + 1, -1);
    trail_.reserve(n_ + 1);

    if (opts_.seed != 0) {
      std::mt19937_64 rng(opts_.seed);
      std::uniform_real_distribution<double> jitter(0.0, 1e-5);
      for (auto& a : lit_activity_) a = jitter(rng);
    }
    for (Var v = 1; v <= n_; ++v) heap_insert(v);

    if (pre.status == PreprocessStatus::ProvenUnsat) {
      inconsistent_ = true;
      return;
    }
    for (auto [v, val] : pre.fixed_assignment) {
      if (v >= 1 && v <= n_) enqueue(Lit(v, !val), kNoClause);
    }
    for (const Clause& c : pre.formula.clauses) {
      if (c.empty()) {
        inconsistent_ = true;
        return;
      }
      if (c.size() == 1) {
        if (value(c[0]) < 0) inconsistent_ = true;
        else if (value(c[0]) == 0) enqueue(c[0], kNoClause);
        continue;
      }
      attach(add_clause(c, false));
    }
    original_clauses_ = clauses_.size();
  }

  Solver(const Solver&) = delete;
  Solver& operator=(const Solver&) = delete;

  void set_schedule(RestartSequence seq) {
    if (started_) throw std::logic_error("set_schedule after solve started; use switch_schedule");
    schedule_ = std::move(seq);
  }

  // Installs a new schedule mid-run. The restart in progress keeps the budget
  // it was given; the next restart draws t_1 of the new schedule. Clauses are
  // untouched. Allowed once.
  void switch_schedule(RestartSequence seq) {
    if (switched_) throw std::logic_error("restart schedule was already switched once");
    switched_ = true;
    schedule_ = std::move(seq);
  }

  void request_stop() { stop_requested_ = true; }

  SolveOutcome solve(double cutoff_seconds, SolveObserver* observer = nullptr) {
    if (started_) throw std::logic_error("Solver::solve may only be called once");
    if (!(cutoff_seconds > 0.0)) throw Error("cutoff must be positive");
    started_ = true;
    CpuStopwatch clock;
    SolveOutcome out;
    auto finish = [&](SolveStatus st) {
      out.status = st;
      out.cpu_seconds = clock.elapsed();
      out.conflicts = conflicts_;
      out.restarts = restarts_;
      if (st == SolveStatus::Sat) out.model = model();
      return out;
    };

    if (inconsistent_ || propagate() != kNoClause) return finish(SolveStatus::Unsat);

    budget_ = schedule_.next();
    restart_index_ = 1;
    since_restart_ = 0;
    std::vector<Lit> learnt;

    for (;;) {
      std::uint32_t confl = propagate();
      if (confl != kNoClause) {
        ++conflicts_;
        ++since_restart_;
        std::uint32_t depth = decision_level();
        if (depth == 0) return finish(SolveStatus::Unsat);

        std::uint32_t bt = analyze(confl, learnt);
        ConflictEvent ev{conflicts_, depth, depth - bt,
                         static_cast<std::uint32_t>(learnt.size()), restart_index_};
        backtrack(bt);
        if (learnt.size() == 1) {
          enqueue(learnt[0], kNoClause);
        } else {
          std::uint32_t cid = add_clause(learnt, true);
          attach(cid);
          learnts_.push_back(cid);
          bump_clause(cid);
          enqueue(learnt[0], cid);
        }
        decay_activities();
        if (observer) observer->on_conflict(*this, ev);

        if (conflicts_ % 64 == 0 && clock.elapsed() >= cutoff_seconds) {
          return finish(SolveStatus::Timeout);
        }
        if (stop_requested_) return finish(SolveStatus::Stopped);

        if (since_restart_ >= budget_) {
          RestartEvent re{restart_index_, budget_, conflicts_};
          if (opts_.event_log) {
            *opts_.event_log << "restart " << re.index << " " << re.length << " "
                             << re.total_conflicts << "\n";
          }
          backtrack(0);
          ++restarts_;
          if (observer) observer->on_restart(*this, re);
          if (stop_requested_) return finish(SolveStatus::Stopped);
          budget_ = schedule_.next();
          ++restart_index_;
          since_restart_ = 0;
        }
        continue;
      }

      if (learnts_.size() >= learnt_limit()) reduce_db();

      std::optional<Lit> next = pick_branch();
      if (!next) {
        if (!check_model(reduced_, model())) {
          throw std::logic_error("internal error: solver produced a non-model");
        }
        return finish(SolveStatus::Sat);
      }
      trail_lim_.push_back(trail_.size());
      enqueue(*next, kNoClause);
    }
  }

  Var num_vars() const { return n_; }
  std::uint64_t conflicts() const { return conflicts_; }
  std::uint64_t restarts() const { return restarts_; }
  std::uint64_t restart_index() const { return restart_index_; }
  std::size_t num_learnts() const { return learnts_.size(); }
  std::size_t num_original_clauses() const { return original_clauses_; }

  std::vector<Clause> learnt_clauses() const {
    std::vector<Clause> out;
    for (std::uint32_t cid : learnts_) out.push_back(clauses_[cid].lits);
    return out;
  }

  // Level-0 literals, including those fixed by preprocessing.
  std::size_t level0_assigned() const {
    return trail_lim_.empty() ? trail_.size() : trail_lim_[0];
  }

  // Original plus learnt clauses reduced under the level-0 assignment:
  // satisfied clauses dropped, falsified literals removed.
  std::vector<Clause> simplified_database() const {
    std::vector<Clause> out;
    for (const auto& rec : clauses_) {
      if (rec.deleted) continue;
      Clause c;
      bool satisfied = false;
      for (Lit l : rec.lits) {
        int v = level0_value(l);
        if (v > 0) {
          satisfied = true;
          break;
        }
        if (v == 0) c.push_back(l);
      }
      if (!satisfied) out.push_back(std::move(c));
    }
    return out;
  }

 private:
  static constexpr std::uint32_t kNoClause = std::numeric_limits<std::uint32_t>::max();

  struct ClauseRec {
    Clause lits;
    double activity = 0.0;
    bool learnt = false;
    bool deleted = false;
  };
  struct Watcher {
    std::uint32_t cid;
    Lit blocker;
  };

  int value(Lit l) const { return l.negative() ? -assigns_[l.var()] : assigns_[l.var()]; }
  int level0_value(Lit l) const {
    Var v = l.var();
    if (assigns_[v] == 0 || level_[v] != 0) return 0;
    return value(l);
  }
  std::uint32_t decision_level() const { return static_cast<std::uint32_t>(trail_lim_.size()); }

  std::size_t learnt_limit() const {
    return std::max(opts_.min_learnt_limit, 2 * original_clauses_);
  }

  std::uint32_t add_clause(const Clause& c, bool learnt) {
    ClauseRec rec;
    rec.lits = c;
    rec.learnt = learnt;
    std::uint32_t cid;
    if (!free_ids_.empty()) {
      cid = free_ids_.back();
      free_ids_.pop_back();
      clauses_[cid] = std::move(rec);
    } else {
      cid = static_cast<std::uint32_t>(clauses_.size());
      clauses_.push_back(std::move(rec));
    }
    return cid;
  }

  void attach(std::uint32_t cid) {
    const Clause& c = clauses_[cid].lits;
    watches_[c[0].code()].push_back({cid, c[1]});
    watches_[c[1].code()].push_back({cid, c[0]});
  }

  void enqueue(Lit l, std::uint32_t reason) {
    Var v = l.var();
    assigns_[v] = l.negative() ? -1 : 1;
    level_[v] = decision_level();
    reason_[v] = reason;
    trail_.push_back(l);
  }

  std::uint32_t propagate() {
    std::uint32_t confl = kNoClause;
    while (qhead_ < trail_.size()) {
      Lit false_lit = ~trail_[qhead_++];
      std::vector<Watcher>& ws = watches_[false_lit.code()];
      std::size_t i = 0, j = 0, end = ws.size();
      while (i < end) {
        Watcher w = ws[i++];
        if (value(w.blocker) > 0) {
          ws[j++] = w;
          continue;
        }
        Clause& c = clauses_[w.cid].lits;
        if (c[0] == false_lit) std::swap(c[0], c[1]);
        Lit first = c[0];
        if (first != w.blocker && value(first) > 0) {
          ws[j++] = {w.cid, first};
          continue;
        }
        bool moved = false;
        for (std::size_t k = 2; k < c.size(); ++k) {
          if (value(c[k]) >= 0) {
            c[1] = c[k];
            c[k] = false_lit;
            watches_[c[1].code()].push_back({w.cid, first});
            moved = true;
            break;
          }
        }
        if (moved) continue;
        ws[j++] = {w.cid, first};
        if (value(first) < 0) {
          confl = w.cid;
          qhead_ = trail_.size();
          while (i < end) ws[j++] = ws[i++];
        } else {
          enqueue(first, w.cid);
        }
      }
      ws.resize(j);
      if (confl != kNoClause) break;
    }
    return confl;
  }

  // First-UIP learning. learnt[0] is the asserting literal, learnt[1] (if
  // any) a literal of the assertion level. Returns the assertion level.
  std::uint32_t analyze(std::uint32_t confl, std::vector<Lit>& learnt) {
    learnt.clear();
    learnt.push_back(Lit{});
    int open = 0;
    Lit p{};
    std::size_t index = trail_.size();
    bool first = true;
    do {
      ClauseRec& rec = clauses_[confl];
      if (rec.learnt) bump_clause(confl);
      for (std::size_t k = first ? 0 : 1; k < rec.lits.size(); ++k) {
        Lit q = rec.lits[k];
        bump_literal(q);
        Var v = q.var();
        if (seen_[v] || level_[v] == 0) continue;
        seen_[v] = 1;
        if (level_[v] >= decision_level()) {
          ++open;
        } else {
          learnt.push_back(q);
        }
      }
      first = false;
      while (!seen_[trail_[--index].var()]) {
      }
      p = trail_[index];
      confl = reason_[p.var()];
      seen_[p.var()] = 0;
      --open;
    } while (open > 0);
    learnt[0] = ~p;

    // Local minimization: drop literals implied by the rest of the clause.
    analyze_toclear_.assign(learnt.begin(), learnt.end());
    std::size_t keep = 1;
    for (std::size_t k = 1; k < learnt.size(); ++k) {
      std::uint32_t r = reason_[learnt[k].var()];
      bool redundant = r != kNoClause;
      if (redundant) {
        const Clause& rc = clauses_[r].lits;
        for (std::size_t m = 1; m < rc.size(); ++m) {
          Var v = rc[m].var();
          if (!seen_[v] && level_[v] > 0) {
            redundant = false;
            break;
          }
        }
      }
      if (!redundant) learnt[keep++] = learnt[k];
    }
    learnt.resize(keep);
    for (Lit l : analyze_toclear_) seen_[l.var()] = 0;

    if (learnt.size() == 1) return 0;
    std::size_t max_i = 1;
    for (std::size_t k = 2; k < learnt.size(); ++k) {
      if (level_[learnt[k].var()] > level_[learnt[max_i].var()]) max_i = k;
    }
    std::swap(learnt[1], learnt[max_i]);
    return level_[learnt[1].var()];
  }

  void backtrack(std::uint32_t level) {
    if (decision_level() <= level) return;
    for (std::size_t k = trail_.size(); k > trail_lim_[level]; --k) {
      Var v = trail_[k - 1].var();
      phase_[v] = assigns_[v];
      assigns_[v] = 0;
      reason_[v] = kNoClause;
      if (heap_pos_[v] < 0) heap_insert(v);
    }
    trail_.resize(trail_lim_[level]);
    trail_lim_.resize(level);
    qhead_ = trail_.size();
  }

  Lit polarity(Var v) const { return Lit(v, phase_[v] <= 0); }
  double var_score(Var v) const {
    return lit_activity_[Lit(v, false).code()] + lit_activity_[Lit(v, true).code()];
  }

  std::optional<Lit> pick_branch() {
    // Most recent learnt clauses first.
    std::size_t scanned = 0;
    for (std::size_t k = learnts_.size(); k > 0 && scanned < opts_.recent_clause_scan; --k, ++scanned) {
      const Clause& c = clauses_[learnts_[k - 1]].lits;
      Var best = 0;
      bool satisfied = false;
      for (Lit l : c) {
        int val = value(l);
        if (val > 0) {
          satisfied = true;
          break;
        }
        if (val == 0 && (best == 0 || var_score(l.var()) > var_score(best))) best = l.var();
      }
      if (!satisfied && best != 0) return polarity(best);
    }
    while (!heap_.empty()) {
      Var v = heap_pop();
      if (assigns_[v] == 0) return polarity(v);
    }
    return std::nullopt;
  }

  void bump_literal(Lit l) {
    lit_activity_[l.code()] += lit_inc_;
    if (lit_activity_[l.code()] > 1e100) {
      for (auto& a : lit_activity_) a *= 1e-100;
      lit_inc_ *= 1e-100;
    }
    Var v = l.var();
    if (heap_pos_[v] >= 0) heap_up(heap_pos_[v]);
  }

  void bump_clause(std::uint32_t cid) {
    clauses_[cid].activity += clause_inc_;
    if (clauses_[cid].activity > 1e20) {
      for (std::uint32_t id : learnts_) clauses_[id].activity *= 1e-20;
      clause_inc_ *= 1e-20;
    }
  }

  void decay_activities() {
    clause_inc_ /= opts_.clause_decay;
    if (conflicts_ % opts_.decay_interval == 0) lit_inc_ /= opts_.var_decay;
  }

  bool locked(std::uint32_t cid) const {
    const Clause& c = clauses_[cid].lits;
    Var v = c[0].var();
    return reason_[v] == cid && value(c[0]) > 0;
  }

  // Deletes the less active half of the learnt clauses, sparing reasons and
  // binary clauses.
  void reduce_db() {
    std::vector<std::uint32_t> order = learnts_;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return clauses_[a].activity < clauses_[b].activity;
    });
    std::size_t target = order.size() / 2;
    std::size_t removed = 0;
    for (std::uint32_t cid : order) {
      if (removed >= target) break;
      if (locked(cid) || clauses_[cid].lits.size() <= 2) continue;
      clauses_[cid].deleted = true;
      clauses_[cid].lits.clear();
      free_ids_.push_back(cid);
      ++removed;
    }
    std::erase_if(learnts_, [&](std::uint32_t cid) { return clauses_[cid].deleted; });
    for (auto& ws : watches_) {
      std::erase_if(ws, [&](const Watcher& w) { return clauses_[w.cid].deleted; });
    }
  }

  Model model() const {
    Model m(n_ + 1);
    for (Var v = 1; v <= n_; ++v) {
      // Every variable is decided before Sat is declared.
      m[v] = assigns_[v] > 0;
    }
    return m;
  }

  // Binary max-heap on var_score.
  bool heap_less(Var a, Var b) const { return var_score(a) > var_score(b); }
  void heap_insert(Var v) {
    heap_pos_[v] = static_cast<int>(heap_.size());
    heap_.push_back(v);
    heap_up(heap_pos_[v]);
  }
  void heap_up(int i) {
    Var v = heap_[i];
    while (i > 0) {
      int parent = (i - 1) / 2;
      if (!heap_less(v, heap_[parent])) break;
      heap_[i] = heap_[parent];
      heap_pos_[heap_[i]] = i;
      i = parent;
    }
    heap_[i] = v;
    heap_pos_[v] = i;
  }
  void heap_down(int i) {
    Var v = heap_[i];
    int n = static_cast<int>(heap_.size());
    for (;;) {
      int child = 2 * i + 1;
      if (child >= n) break;
      if (child + 1 < n && heap_less(heap_[child + 1], heap_[child])) ++child;
      if (!heap_less(heap_[child], v)) break;
      heap_[i] = heap_[child];
      heap_pos_[heap_[i]] = i;
      i = child;
    }
    heap_[i] = v;
    heap_pos_[v] = i;
  }
  Var heap_pop() {
    Var top = heap_[0];
    heap_pos_[top] = -1;
    Var last = heap_.back();
    heap_.pop_back();
    if (!heap_.empty()) {
      heap_[0] = last;
      heap_pos_[last] = 0;
      heap_down(0);
    }
    return top;
  }

  SolverOptions opts_;
  Var n_;
  Formula reduced_;
  RestartSequence schedule_{std::vector<std::uint64_t>{100}};

  std::vector<ClauseRec> clauses_;
  std::vector<std::uint32_t> free_ids_;
  std::vector<std::uint32_t> learnts_;
  std::size_t original_clauses_ = 0;
  std::vector<std::vector<Watcher>> watches_;

  std::vector<int> assigns_;
  std::vector<std::uint32_t> level_;
  std::vector<std::uint32_t> reason_;
  std::vector<int> phase_;
  std::vector<char> seen_;
  std::vector<Lit> analyze_toclear_;
  std::vector<Lit> trail_;
  std::vector<std::size_t> trail_lim_;
  std::size_t qhead_ = 0;

  std::vector<double> lit_activity_;
  double lit_inc_ = 1.0;
  double clause_inc_ = 1.0;
  std::vector<Var> heap_;
  std::vector<int> heap_pos_;

  bool inconsistent_ = false;
  bool started_ = false;
  bool switched_ = false;
  bool stop_requested_ = false;
  std::uint64_t conflicts_ = 0;
  std::uint64_t restarts_ = 0;
  std::uint64_t restart_index_ = 0;
  std::uint64_t since_restart_ = 0;
  std::uint64_t budget_ = 0;
};

}  // namespace lmpick
