#pragma once

// Restart-strategy selection. A short first restart (100 conflicts) is
// followed by a 2000-conflict restart that hosts the observation window.
// When that restart ends (conflict 2100) the feature vector is assembled,
// the classifier and the per-strategy runtime models are queried, and the
// strategy with the least expected runtime
//
//   cost(s) = P(sat|x) * M_sat,s(x) + P(unsat|x) * M_unsat,s(x)
//
// governs every following restart. Learnt clauses are kept.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lmpick/cnf.hpp"
#include "lmpick/cpu_time.hpp"
#include "lmpick/error.hpp"
#include "lmpick/features.hpp"
#include "lmpick/ml.hpp"
#include "lmpick/restart.hpp"
#include "lmpick/solver.hpp"

namespace lmpick {

inline constexpr std::uint64_t kWarmupRestart = 100;
inline constexpr std::uint64_t kWindowRestart = 2000;
inline constexpr std::uint64_t kWindowRestartIndex = 2;
inline constexpr std::uint64_t kSelectionConflict = kWarmupRestart + kWindowRestart;
inline constexpr int kBundleSchemaVersion = 1;

inline RestartSequence warmup_schedule() {
  return RestartSequence(std::vector<std::uint64_t>{kWarmupRestart, kWindowRestart});
}

struct TrainedBundle {
  int schema_version = kBundleSchemaVersion;
  Portfolio portfolio;
  ml::LogisticModel classifier;
  // One model per strategy, in portfolio order.
  std::vector<ml::RidgeModel> sat_models;
  std::vector<ml::RidgeModel> unsat_models;
  bool log_target = false;

  std::size_t model_count() const { return sat_models.size() + unsat_models.size(); }
};

struct TrainingInstance {
  std::string id;
  FeatureVector features{};
  bool sat = false;
  std::vector<double> runtimes;  // portfolio order; cutoff for timeouts
};

struct TrainOptions {
  bool log_target = false;  // fit log10(1 + seconds) instead of seconds
  std::vector<std::string>* warnings = nullptr;
};

namespace detail {

inline ml::DesignMatrix design_from(std::span<const TrainingInstance* const> rows) {
  ml::DesignMatrix d;
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kNumFeatures));
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i]->features[j];
    }
  }
  const auto& names = feature_names();
  d.feature_names.assign(names.begin(), names.end());
  return d;
}

inline ml::RidgeModel fit_runtime_model(const ml::DesignMatrix& d) {
  ml::Mask all = ml::all_columns(d.cols());
  ml::SelectionOptions opt;
  opt.ridge_lambda = ml::choose_lambda_gcv(d, all);
  ml::Mask mask = ml::select_features(d, ml::ModelKind::Ridge, opt);
  double lambda = ml::choose_lambda_gcv(d, mask);
  return ml::fit_ridge(d, lambda, mask);
}

}  // namespace detail

// Fits the satisfiability classifier on every instance and, for each
// strategy, one runtime model on the sat instances and one on the unsat
// instances. Each model runs its own feature selection.
inline TrainedBundle train(std::span<const TrainingInstance> data, const Portfolio& portfolio,
                           const TrainOptions& opt = {}) {
  if (portfolio.empty()) throw Error("train: empty portfolio");
  std::vector<const TrainingInstance*> all, sat, unsat;
  for (const auto& t : data) {
    if (t.runtimes.size() != portfolio.size()) {
      throw Error("train: instance '" + t.id + "' has " + std::to_string(t.runtimes.size()) +
                  " runtimes, portfolio has " + std::to_string(portfolio.size()));
    }
    for (double r : t.runtimes) {
      if (!std::isfinite(r) || r < 0) throw Error("train: invalid runtime for instance '" + t.id + "'");
    }
    all.push_back(&t);
    (t.sat ? sat : unsat).push_back(&t);
  }
  if (sat.empty()) throw Error("train: no satisfiable training instances");
  if (unsat.empty()) throw Error("train: no unsatisfiable training instances");
  if (opt.warnings) {
    if (sat.size() < 10) opt.warnings->push_back("only " + std::to_string(sat.size()) + " sat training instances; sat models are degenerate");
    if (unsat.size() < 10) opt.warnings->push_back("only " + std::to_string(unsat.size()) + " unsat training instances; unsat models are degenerate");
  }

  TrainedBundle b;
  b.portfolio = portfolio;
  b.log_target = opt.log_target;

  ml::DesignMatrix cls = detail::design_from(all);
  for (std::size_t i = 0; i < all.size(); ++i) cls.y(static_cast<Eigen::Index>(i)) = all[i]->sat ? 1.0 : 0.0;
  ml::Mask cls_mask = ml::select_features(cls, ml::ModelKind::Logistic);
  b.classifier = ml::fit_logistic(cls, cls_mask);

  auto target = [&](double seconds) { return opt.log_target ? std::log10(1.0 + seconds) : seconds; };
  for (auto* group : {&sat, &unsat}) {
    ml::DesignMatrix d = detail::design_from(*group);
    auto& models = group == &sat ? b.sat_models : b.unsat_models;
    for (std::size_t s = 0; s < portfolio.size(); ++s) {
      for (std::size_t i = 0; i < group->size(); ++i) {
        d.y(static_cast<Eigen::Index>(i)) = target((*group)[i]->runtimes[s]);
      }
      models.push_back(detail::fit_runtime_model(d));
    }
  }
  return b;
}

inline double predict_runtime(const TrainedBundle& b, const ml::RidgeModel& m, const FeatureVector& x) {
  double s = m.score(x);
  double seconds = b.log_target ? std::pow(10.0, s) - 1.0 : s;
  return std::isfinite(seconds) ? std::max(0.0, seconds) : std::numeric_limits<double>::max();
}

struct Selection {
  std::size_t index = 0;
  std::string name;
  double p_sat = 0.5;
  std::vector<double> costs;
  std::vector<double> sat_predictions;
  std::vector<double> unsat_predictions;
};

// Expected-cost arg-min; the first (lowest index) strategy wins ties.
inline std::size_t argmin_expected_cost(double p_sat, std::span<const double> m_sat,
                                        std::span<const double> m_unsat, std::vector<double>* costs = nullptr) {
  if (m_sat.size() != m_unsat.size() || m_sat.empty()) throw Error("selection needs matching non-empty predictions");
  std::size_t best = 0;
  std::vector<double> local;
  std::vector<double>& c = costs ? *costs : local;
  c.assign(m_sat.size(), 0.0);
  for (std::size_t s = 0; s < m_sat.size(); ++s) {
    if (p_sat >= 1.0) c[s] = m_sat[s];
    else if (p_sat <= 0.0) c[s] = m_unsat[s];
    else c[s] = p_sat * m_sat[s] + (1.0 - p_sat) * m_unsat[s];
    if (c[s] < c[best]) best = s;
  }
  return best;
}

// Ground-truth overrides for ablations: a classification oracle fixes
// P(sat) to 0 or 1, a model oracle replaces both runtime predictions with
// recorded runtimes.
struct OracleOverrides {
  std::optional<bool> sat_label;
  std::optional<std::vector<double>> true_runtimes;
};

inline Selection select_strategy(const TrainedBundle& b, const FeatureVector& x,
                                 const OracleOverrides* oracle = nullptr) {
  for (double v : x) {
    if (!std::isfinite(v)) throw Error("select_strategy: non-finite feature");
  }
  Selection sel;
  std::size_t n = b.portfolio.size();
  if (b.sat_models.size() != n || b.unsat_models.size() != n) throw Error("bundle model count does not match portfolio");
  sel.p_sat = (oracle && oracle->sat_label) ? (*oracle->sat_label ? 1.0 : 0.0)
                                            : ml::predict_proba(b.classifier, x);
  if (oracle && oracle->true_runtimes) {
    if (oracle->true_runtimes->size() != n) throw Error("model oracle: runtime row does not match portfolio");
    sel.sat_predictions = *oracle->true_runtimes;
    sel.unsat_predictions = *oracle->true_runtimes;
  } else {
    for (std::size_t s = 0; s < n; ++s) {
      sel.sat_predictions.push_back(predict_runtime(b, b.sat_models[s], x));
      sel.unsat_predictions.push_back(predict_runtime(b, b.unsat_models[s], x));
    }
  }
  sel.index = argmin_expected_cost(sel.p_sat, sel.sat_predictions, sel.unsat_predictions, &sel.costs);
  sel.name = b.portfolio[sel.index].name;
  return sel;
}

// ---------------------------------------------------------------------------
// Online part

struct SelectionReport {
  bool solved_in_window = true;
  std::optional<Selection> selection;
  std::uint64_t selection_conflict = 0;
  double window_cpu_seconds = 0.0;
  FeatureVector features{};
};

// Records the window and, when its restart ends, assembles all four
// feature sets from the paused solver and hands them to `on_close`.
class ObservationWindow : public SolveObserver {
 public:
  using CloseHandler = std::function<void(Solver&, const FeatureVector&)>;

  ObservationWindow(const Formula& original, const PreprocessResult& pre, CloseHandler on_close)
      : set1_(input_size_features(original)), set2_(structural_features(pre)), on_close_(std::move(on_close)) {}

  void on_conflict(const Solver& s, const ConflictEvent& e) override { recorder_.on_conflict(s, e); }

  void on_restart(Solver& s, const RestartEvent& e) override {
    recorder_.on_restart(s, e);
    if (e.index != kWindowRestartIndex) return;
    close_cpu_ = clock_.elapsed();
    close_conflict_ = e.total_conflicts;
    WindowFeatures set3 = window_features(recorder_.stats());
    StructuralFeatures set4 = post_window_features(s);
    features_ = assemble(set1_, set2_, set3, set4);
    closed_ = true;
    if (on_close_) on_close_(s, *features_);
  }

  bool closed() const { return closed_; }
  const std::optional<FeatureVector>& features() const { return features_; }
  const WindowStats& stats() const { return recorder_.stats(); }
  double close_cpu_seconds() const { return close_cpu_; }
  std::uint64_t close_conflict() const { return close_conflict_; }

 private:
  std::array<double, kSetISize> set1_;
  StructuralFeatures set2_;
  CloseHandler on_close_;
  WindowRecorder recorder_{kWindowRestartIndex};
  CpuStopwatch clock_;
  std::optional<FeatureVector> features_;
  bool closed_ = false;
  double close_cpu_ = 0.0;
  std::uint64_t close_conflict_ = 0;
};

struct RunOptions {
  std::uint64_t seed = 0;
  std::ostream* event_log = nullptr;
  OracleOverrides oracle;
};

struct MeasureResult {
  SolveOutcome outcome;  // Stopped when the window closed
  std::optional<FeatureVector> features;
  double window_cpu_seconds = 0.0;
};

// Runs the warm-up schedule and stops at window close. Instances solved
// before that come back without features.
inline MeasureResult measure_features(const Formula& original, const PreprocessResult& pre, double cutoff,
                                      const RunOptions& opt = {}) {
  MeasureResult r;
  if (pre.status == PreprocessStatus::ProvenUnsat) {
    r.outcome.status = SolveStatus::Unsat;
    return r;
  }
  SolverOptions so;
  so.seed = opt.seed;
  so.event_log = opt.event_log;
  Solver solver(pre, so);
  solver.set_schedule(warmup_schedule());
  ObservationWindow window(original, pre, [](Solver& s, const FeatureVector&) { s.request_stop(); });
  r.outcome = solver.solve(cutoff, &window);
  if (window.closed()) {
    r.features = window.features();
    r.outcome.window = window.stats();
    r.window_cpu_seconds = window.close_cpu_seconds();
  }
  return r;
}

struct LmpickResult {
  SolveOutcome outcome;
  SelectionReport report;
};

inline LmpickResult lmpick_solve(const Formula& original, const PreprocessResult& pre, const TrainedBundle& b,
                                 double cutoff, const RunOptions& opt = {}) {
  LmpickResult r;
  if (pre.status == PreprocessStatus::ProvenUnsat) {
    r.outcome.status = SolveStatus::Unsat;
    return r;
  }
  SolverOptions so;
  so.seed = opt.seed;
  so.event_log = opt.event_log;
  Solver solver(pre, so);
  solver.set_schedule(warmup_schedule());
  const OracleOverrides* oracle =
      (opt.oracle.sat_label || opt.oracle.true_runtimes) ? &opt.oracle : nullptr;
  ObservationWindow window(original, pre, [&](Solver& s, const FeatureVector& x) {
    Selection sel = select_strategy(b, x, oracle);
    s.switch_schedule(RestartSequence(b.portfolio[sel.index]));
    r.report.selection = std::move(sel);
  });
  r.outcome = solver.solve(cutoff, &window);
  if (window.closed()) {
    r.report.solved_in_window = false;
    r.report.selection_conflict = window.close_conflict();
    r.report.window_cpu_seconds = window.close_cpu_seconds();
    r.report.features = *window.features();
    r.outcome.window = window.stats();
  }
  return r;
}

}  // namespace lmpick
