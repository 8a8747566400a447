#pragma once

// Cross-validated evaluation. Each fold trains a bundle on its train split
// only, then selects a strategy for every test instance from the recorded
// window features. Selections are written as CSVs and the report is built
// from the CSVs alone.
//
// Charge models (seconds, per instance):
//   strategy s         recorded runtime; cutoff when unsolved
//   random pick        mean over strategies of the above
//   LMPick simulated   window cpu + recorded runtime of the chosen strategy,
//                      solved only if the chosen run finished and the sum
//                      stays within the cutoff
//   LMPick executed    measured cpu of a real selecting run
//   oracle (VBS)       per-instance minimum recorded runtime, no warm-up

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "lmpick/bundle_io.hpp"
#include "lmpick/harness.hpp"

namespace lmpick::harness {

inline constexpr const char* kSelectionsFile = "selections.csv";
inline constexpr const char* kClassifierOracleFile = "selections_classifier_oracle.csv";
inline constexpr const char* kExecutedFile = "lmpick_runs.csv";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportCsv = "report.csv";

struct SelectionRow {
  std::string instance;
  std::size_t fold = 0;
  double p_sat = 0.5;
  std::string chosen;
  std::size_t rank = 1;  // 1 + strategies strictly faster than the chosen one
  std::vector<double> costs;
};

struct ExecutedRow {
  std::string instance;
  std::size_t fold = 0;
  std::string chosen;  // empty when solved inside the window
  SolveStatus status = SolveStatus::Timeout;
  double cpu_seconds = 0.0;
  std::uint64_t conflicts = 0;
};

inline std::size_t recorded_rank(const Dataset& d, std::size_t i, std::size_t chosen) {
  std::size_t r = 1;
  for (std::size_t s = 0; s < d.portfolio.size(); ++s) {
    if (d.runtime(i, s) < d.runtime(i, chosen)) ++r;
  }
  return r;
}

inline std::size_t strategy_index(const Portfolio& p, const std::string& name) {
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s].name == name) return s;
  }
  throw Error("unknown strategy '" + name + "'");
}

inline csv::Table selections_table(const std::vector<SelectionRow>& rows, std::size_t num_strategies) {
  csv::Table t;
  t.header = {"instance", "fold", "p_sat", "chosen", "rank"};
  for (std::size_t s = 1; s <= num_strategies; ++s) t.header.push_back("cost_" + std::to_string(s));
  for (const auto& r : rows) {
    if (r.costs.size() != num_strategies) throw Error("selection row of " + r.instance + " has the wrong cost count");
    csv::Row row{r.instance, std::to_string(r.fold), csv::format_double(r.p_sat), r.chosen, std::to_string(r.rank)};
    for (double c : r.costs) row.push_back(csv::format_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::vector<SelectionRow> selections_from_table(const csv::Table& t) {
  if (t.header.size() < 6 || t.header[0] != "instance" || t.header[4] != "rank") throw Error("selections csv: unexpected header");
  std::vector<SelectionRow> out;
  for (const auto& row : t.rows) {
    SelectionRow r{row[0], static_cast<std::size_t>(csv::parse_uint(row[1], "fold")), csv::parse_double(row[2], "p_sat"),
                   row[3], static_cast<std::size_t>(csv::parse_uint(row[4], "rank")), {}};
    for (std::size_t j = 5; j < row.size(); ++j) r.costs.push_back(csv::parse_double(row[j], "cost"));
    out.push_back(std::move(r));
  }
  return out;
}

inline csv::Table executed_table(const std::vector<ExecutedRow>& rows) {
  csv::Table t;
  t.header = {"instance", "fold", "chosen", "status", "cpu_seconds", "conflicts"};
  for (const auto& r : rows) {
    t.rows.push_back({r.instance, std::to_string(r.fold), r.chosen, to_string(r.status), csv::format_double(r.cpu_seconds),
                      std::to_string(r.conflicts)});
  }
  return t;
}

inline std::vector<ExecutedRow> executed_from_table(const csv::Table& t) {
  if (t.header != csv::Row{"instance", "fold", "chosen", "status", "cpu_seconds", "conflicts"}) {
    throw Error("lmpick runs csv: unexpected header");
  }
  std::vector<ExecutedRow> out;
  for (const auto& row : t.rows) {
    out.push_back({row[0], static_cast<std::size_t>(csv::parse_uint(row[1], "fold")), row[2], parse_status(row[3]),
                   csv::parse_double(row[4], "cpu_seconds"), csv::parse_uint(row[5], "conflicts")});
  }
  return out;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalOptions {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string instances_dir;  // empty: simulated evaluation only
  TrainOptions train;
  std::ostream* progress = nullptr;
};

struct EvaluationOutput {
  std::vector<TrainedBundle> bundles;  // one per fold
  std::vector<SelectionRow> selections;
  std::vector<SelectionRow> classifier_oracle;
  std::vector<ExecutedRow> executed;  // empty unless instances_dir was given
};

struct FoldPlan {
  std::vector<std::size_t> fold_of;  // dataset index -> fold; npos when not evaluated
  std::vector<std::vector<std::size_t>> train, test;  // dataset indices
};

inline FoldPlan plan_folds(const Dataset& d, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> pop = d.evaluable();
  FoldPlan p;
  p.fold_of.assign(d.size(), static_cast<std::size_t>(-1));
  for (const ml::Fold& f : ml::kfold(pop.size(), k, seed)) {
    std::vector<std::size_t> tr, te;
    for (std::size_t j : f.train) tr.push_back(pop[j]);
    for (std::size_t j : f.test) {
      te.push_back(pop[j]);
      p.fold_of[pop[j]] = p.train.size();
    }
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    p.train.push_back(std::move(tr));
    p.test.push_back(std::move(te));
  }
  return p;
}

// Reads only the rows listed in `train_rows`, so test rows cannot leak in.
inline TrainedBundle train_for_fold(const Dataset& d, std::span<const std::size_t> train_rows, const TrainOptions& opt = {}) {
  return train_on(d, train_rows, opt);
}

inline SelectionRow selection_row(const Dataset& d, std::size_t i, std::size_t fold, const Selection& sel) {
  return {d.ids[i], fold, sel.p_sat, sel.name, recorded_rank(d, i, sel.index), sel.costs};
}

inline EvaluationOutput evaluate(const Dataset& d, const EvalOptions& opt) {
  FoldPlan plan = plan_folds(d, opt.k, opt.seed);
  EvaluationOutput out;
  out.bundles.resize(plan.train.size());
  parallel_for(plan.train.size(), opt.workers, [&](std::size_t f) {
    out.bundles[f] = train_for_fold(d, plan.train[f], opt.train);
  });

  for (std::size_t i = 0; i < d.size(); ++i) {
    std::size_t f = plan.fold_of[i];
    if (f == static_cast<std::size_t>(-1)) continue;
    const TrainedBundle& b = out.bundles[f];
    out.selections.push_back(selection_row(d, i, f, select_strategy(b, *d.features[i])));
    OracleOverrides o;
    o.sat_label = d.labels[i];
    out.classifier_oracle.push_back(selection_row(d, i, f, select_strategy(b, *d.features[i], &o)));
  }

  if (!opt.instances_dir.empty()) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (plan.fold_of[i] != static_cast<std::size_t>(-1)) todo.push_back(i);
    }
    out.executed.resize(todo.size());
    std::mutex log_mutex;
    parallel_for(todo.size(), opt.workers, [&](std::size_t j) {
      std::size_t i = todo[j];
      std::size_t f = plan.fold_of[i];
      Instance inst = load_instance((fs::path(opt.instances_dir) / (d.ids[i] + ".cnf")).string());
      RunOptions ro;
      ro.seed = d.runs[i].front().seed;
      LmpickResult r = lmpick_solve(inst.formula, inst.pre, out.bundles[f], d.cutoff, ro);
      if (r.outcome.status == SolveStatus::Sat && !check_model(inst.formula, r.outcome.model)) {
        throw Error("soundness: lmpick model fails on " + inst.id);
      }
      ExecutedRow row{inst.id, f, r.report.selection ? r.report.selection->name : std::string(), r.outcome.status,
                      r.outcome.cpu_seconds, r.outcome.conflicts};
      if (row.status == SolveStatus::Timeout || row.cpu_seconds > d.cutoff) {
        row.status = SolveStatus::Timeout;
        row.cpu_seconds = d.cutoff;
      }
      out.executed[j] = row;
      if (opt.progress) {
        std::lock_guard lock(log_mutex);
        *opt.progress << "[lmpick " << j + 1 << "/" << todo.size() << "] " << inst.id << " " << row.chosen << " "
                      << to_string(row.status) << " " << row.cpu_seconds << "s\n";
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// report

struct Totals {
  double solved_sat = 0, solved_unsat = 0, solved = 0, total_seconds = 0;
};

struct Accuracy {
  std::size_t correct = 0, total = 0;
  double percent() const { return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct RankStats {
  double sum_percent = 0;
  std::size_t count = 0;
  double mean() const { return count ? sum_percent / static_cast<double>(count) : 0.0; }
};

struct Report {
  double cutoff = 0;
  std::size_t instances = 0;  // evaluated population
  std::size_t too_easy = 0;
  std::size_t unlabeled = 0;
  std::vector<std::string> strategy_names;
  std::vector<std::pair<std::string, Totals>> rows;
  Accuracy acc_sat, acc_unsat, acc_all;
  RankStats rank_sat, rank_unsat, rank_all;
  std::vector<std::size_t> solved_by_k;
  bool executed = false;
  std::size_t same_choice = 0, compared = 0;

  const Totals& row(const std::string& name) const {
    for (const auto& [n, t] : rows) {
      if (n == name) return t;
    }
    throw Error("report has no row '" + name + "'");
  }
};

namespace detail {

inline void charge(Totals& t, const std::optional<bool>& label, bool solved, double seconds) {
  t.total_seconds += seconds;
  if (!solved) return;
  t.solved += 1;
  if (label && *label) t.solved_sat += 1;
  if (label && !*label) t.solved_unsat += 1;
}

inline std::map<std::string, const SelectionRow*> index_rows(const std::vector<SelectionRow>& rows, const char* what) {
  std::map<std::string, const SelectionRow*> m;
  for (const auto& r : rows) {
    if (!m.emplace(r.instance, &r).second) throw Error(std::string(what) + ": duplicate instance " + r.instance);
  }
  return m;
}

inline Totals simulated(const Dataset& d, const std::vector<std::size_t>& pop,
                        const std::map<std::string, const SelectionRow*>& sel) {
  Totals t;
  for (std::size_t i : pop) {
    std::size_t s = strategy_index(d.portfolio, sel.at(d.ids[i])->chosen);
    double cost = d.measurements[i].window_cpu_seconds + d.runtime(i, s);
    bool ok = d.solved(i, s) && cost <= d.cutoff;
    charge(t, d.labels[i], ok, ok ? cost : d.cutoff);
  }
  return t;
}

}  // namespace detail

inline Report build_report(const Dataset& d, const std::vector<SelectionRow>& selections,
                           const std::vector<SelectionRow>& classifier_oracle,
                           const std::vector<ExecutedRow>* executed = nullptr) {
  Report rep;
  rep.cutoff = d.cutoff;
  std::vector<std::size_t> pop = d.evaluable();
  rep.instances = pop.size();
  for (const auto& m : d.measurements) rep.too_easy += m.too_easy() ? 1 : 0;
  for (std::size_t i : pop) rep.unlabeled += d.labels[i] ? 0 : 1;
  std::size_t ns = d.portfolio.size();

  auto sel = detail::index_rows(selections, "selections");
  auto cls = detail::index_rows(classifier_oracle, "classifier-oracle selections");
  for (const auto* m : {&sel, &cls}) {
    if (m->size() != pop.size()) throw Error("instance coverage mismatch: selections do not cover the evaluated instances");
    for (std::size_t i : pop) {
      if (!m->count(d.ids[i])) throw Error("instance coverage mismatch: no selection for " + d.ids[i]);
    }
  }

  Totals random;
  for (std::size_t s = 0; s < ns; ++s) {
    Totals t;
    for (std::size_t i : pop) detail::charge(t, d.labels[i], d.solved(i, s), d.runtime(i, s));
    rep.strategy_names.push_back(d.portfolio[s].name);
    rep.rows.emplace_back(d.portfolio[s].name, t);
    random.solved_sat += t.solved_sat;
    random.solved_unsat += t.solved_unsat;
    random.solved += t.solved;
    random.total_seconds += t.total_seconds;
  }
  double k = static_cast<double>(ns);
  random.solved_sat /= k;
  random.solved_unsat /= k;
  random.solved /= k;
  random.total_seconds /= k;
  rep.rows.emplace_back("random-pick", random);
  rep.rows.emplace_back("lmpick-simulated", detail::simulated(d, pop, sel));
  rep.rows.emplace_back("lmpick-classifier-oracle", detail::simulated(d, pop, cls));

  if (executed) {
    rep.executed = true;
    std::map<std::string, const ExecutedRow*> ex;
    for (const auto& r : *executed) {
      if (!ex.emplace(r.instance, &r).second) throw Error("lmpick runs: duplicate instance " + r.instance);
    }
    if (ex.size() != pop.size()) throw Error("instance coverage mismatch: lmpick runs do not cover the evaluated instances");
    Totals t;
    for (std::size_t i : pop) {
      auto it = ex.find(d.ids[i]);
      if (it == ex.end()) throw Error("instance coverage mismatch: no lmpick run for " + d.ids[i]);
      const ExecutedRow& r = *it->second;
      detail::charge(t, d.labels[i], r.status != SolveStatus::Timeout, r.cpu_seconds);
      if (!r.chosen.empty()) {
        ++rep.compared;
        if (r.chosen == sel.at(d.ids[i])->chosen) ++rep.same_choice;
      }
    }
    rep.rows.emplace_back("lmpick-executed", t);
  }

  Totals vbs;
  for (std::size_t i : pop) {
    double best = d.cutoff;
    bool any = false;
    for (std::size_t s = 0; s < ns; ++s) {
      if (d.solved(i, s)) {
        any = true;
        best = std::min(best, d.runtime(i, s));
      }
    }
    detail::charge(vbs, d.labels[i], any, best);
  }
  rep.rows.emplace_back("oracle-vbs", vbs);

  rep.solved_by_k.assign(ns + 1, 0);
  for (std::size_t i : pop) {
    std::size_t solved = 0;
    for (std::size_t s = 0; s < ns; ++s) solved += d.solved(i, s) ? 1 : 0;
    ++rep.solved_by_k[solved];
  }

  for (std::size_t i : pop) {
    const SelectionRow& r = *sel.at(d.ids[i]);
    // Percent of the other strategies strictly faster than the chosen one.
    double pct = ns > 1 ? 100.0 * static_cast<double>(r.rank - 1) / static_cast<double>(ns - 1) : 0.0;
    rep.rank_all.sum_percent += pct;
    ++rep.rank_all.count;
    if (!d.labels[i]) continue;
    RankStats& rs = *d.labels[i] ? rep.rank_sat : rep.rank_unsat;
    rs.sum_percent += pct;
    ++rs.count;
    bool predicted_sat = r.p_sat >= 0.5;
    bool correct = predicted_sat == *d.labels[i];
    Accuracy& a = *d.labels[i] ? rep.acc_sat : rep.acc_unsat;
    a.total += 1;
    a.correct += correct ? 1 : 0;
    rep.acc_all.total += 1;
    rep.acc_all.correct += correct ? 1 : 0;
  }
  return rep;
}

inline csv::Table report_table(const Report& r) {
  csv::Table t;
  t.header = {"section", "row", "metric", "value"};
  auto add = [&](const std::string& sec, const std::string& row, const std::string& metric, double v) {
    t.rows.push_back({sec, row, metric, csv::format_double(v)});
  };
  add("dataset", "all", "evaluated_instances", static_cast<double>(r.instances));
  add("dataset", "all", "too_easy_excluded", static_cast<double>(r.too_easy));
  add("dataset", "all", "unlabeled", static_cast<double>(r.unlabeled));
  add("dataset", "all", "cutoff_seconds", r.cutoff);
  for (const auto& [name, tot] : r.rows) {
    add("runtime", name, "solved_sat", tot.solved_sat);
    add("runtime", name, "solved_unsat", tot.solved_unsat);
    add("runtime", name, "solved", tot.solved);
    add("runtime", name, "total_seconds", tot.total_seconds);
  }
  for (auto [name, a] : {std::pair{"SAT", r.acc_sat}, std::pair{"UNSAT", r.acc_unsat}, std::pair{"ALL", r.acc_all}}) {
    add("classifier", name, "accuracy_percent", a.percent());
    add("classifier", name, "correct", static_cast<double>(a.correct));
    add("classifier", name, "instances", static_cast<double>(a.total));
  }
  for (auto [name, s] : {std::pair{"SAT", r.rank_sat}, std::pair{"UNSAT", r.rank_unsat}, std::pair{"ALL", r.rank_all}}) {
    add("rank", name, "percent_outperforming", s.mean());
    add("rank", name, "instances", static_cast<double>(s.count));
  }
  for (std::size_t k = 0; k < r.solved_by_k.size(); ++k) {
    double n = static_cast<double>(r.solved_by_k[k]);
    add("solved_by_k", std::to_string(k), "instances", n);
    add("solved_by_k", std::to_string(k), "percent", r.instances ? 100.0 * n / static_cast<double>(r.instances) : 0.0);
  }
  if (r.executed) {
    add("agreement", "executed_vs_simulated", "same_choice", static_cast<double>(r.same_choice));
    add("agreement", "executed_vs_simulated", "compared", static_cast<double>(r.compared));
  }
  return t;
}

inline std::string report_text(const Report& r) {
  std::ostringstream o;
  o << std::fixed;
  o << "LMPick evaluation: " << r.instances << " instances (" << r.too_easy
    << " solved before the selection point excluded), cutoff " << std::setprecision(0) << r.cutoff << " s\n";
  o << "Unsolved runs are charged the cutoff. LMPick (simulated) is charged window cpu + recorded\n"
       "runtime of its chosen strategy; the oracle row is the per-instance best, without warm-up.\n\n";
  o << std::left << std::setw(26) << "strategy" << std::right << std::setw(10) << "S(sat)" << std::setw(10) << "S(unsat)"
    << std::setw(10) << "S" << std::setw(14) << "T (s)" << '\n';
  for (const auto& [name, t] : r.rows) {
    o << std::left << std::setw(26) << name << std::right << std::setprecision(2) << std::setw(10) << t.solved_sat
      << std::setw(10) << t.solved_unsat << std::setw(10) << t.solved << std::setw(14) << t.total_seconds << '\n';
  }
  o << "\nclassifier accuracy (percent correctly classified)\n";
  for (auto [name, a] : {std::pair{"SAT", r.acc_sat}, std::pair{"UNSAT", r.acc_unsat}, std::pair{"ALL", r.acc_all}}) {
    o << "  " << std::left << std::setw(6) << name << std::right << std::setprecision(2) << std::setw(8) << a.percent()
      << "  (" << a.correct << "/" << a.total << ")\n";
  }
  o << "\npercent of other strategies that outperform the chosen one\n";
  for (auto [name, s] : {std::pair{"SAT", r.rank_sat}, std::pair{"UNSAT", r.rank_unsat}, std::pair{"ALL", r.rank_all}}) {
    o << "  " << std::left << std::setw(6) << name << std::right << std::setprecision(2) << std::setw(8) << s.mean()
      << "  (" << s.count << " instances)\n";
  }
  o << "\ninstances solved by exactly k strategies\n";
  for (std::size_t k = 0; k < r.solved_by_k.size(); ++k) {
    double pct = r.instances ? 100.0 * static_cast<double>(r.solved_by_k[k]) / static_cast<double>(r.instances) : 0.0;
    o << "  k=" << k << std::setw(6) << r.solved_by_k[k] << std::setprecision(1) << std::setw(8) << pct << "%\n";
  }
  if (r.executed) {
    o << "\nexecuted vs simulated choice: " << r.same_choice << "/" << r.compared << " identical\n";
  }
  return o.str();
}

struct EvalFiles {
  std::vector<SelectionRow> selections, classifier_oracle;
  std::optional<std::vector<ExecutedRow>> executed;
};

inline void write_evaluation(const std::string& dir, const Dataset& d, const EvaluationOutput& e) {
  fs::create_directories(dir);
  auto path = [&](const char* f) { return (fs::path(dir) / f).string(); };
  csv::write_file(path(kSelectionsFile), selections_table(e.selections, d.portfolio.size()));
  csv::write_file(path(kClassifierOracleFile), selections_table(e.classifier_oracle, d.portfolio.size()));
  if (!e.executed.empty()) csv::write_file(path(kExecutedFile), executed_table(e.executed));
}

inline EvalFiles read_evaluation(const std::string& dir) {
  auto path = [&](const char* f) { return (fs::path(dir) / f).string(); };
  EvalFiles f;
  f.selections = selections_from_table(csv::read_file(path(kSelectionsFile)));
  f.classifier_oracle = selections_from_table(csv::read_file(path(kClassifierOracleFile)));
  if (fs::exists(path(kExecutedFile))) f.executed = executed_from_table(csv::read_file(path(kExecutedFile)));
  return f;
}

// Rebuilds the report from the CSVs in `eval_dir` and writes report.txt and
// report.csv next to them.
inline Report report_from_files(const Dataset& d, const std::string& eval_dir) {
  EvalFiles f = read_evaluation(eval_dir);
  Report r = build_report(d, f.selections, f.classifier_oracle, f.executed ? &*f.executed : nullptr);
  csv::write_file((fs::path(eval_dir) / kReportCsv).string(), report_table(r));
  std::ofstream txt(fs::path(eval_dir) / kReportText);
  if (!txt) throw Error("cannot write " + (fs::path(eval_dir) / kReportText).string());
  txt << report_text(r);
  return r;
}

}  // namespace lmpick::harness
