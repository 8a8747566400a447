#pragma once

// Dataset generation and runtime-matrix collection. Everything persisted
// here is a CSV; the report is later recomputed from those files alone.
//
//   matrix.csv    instance,strategy,status,cpu_seconds,conflicts,seed
//   features.csv  instance,f1..f60,sat_label      (window-reaching instances)
//   window.csv    instance,measure_status,too_easy,window_cpu_seconds,conflicts

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "lmpick/cnf.hpp"
#include "lmpick/csv.hpp"
#include "lmpick/error.hpp"
#include "lmpick/features.hpp"
#include "lmpick/generator.hpp"
#include "lmpick/picker.hpp"
#include "lmpick/restart.hpp"
#include "lmpick/solver.hpp"

namespace lmpick::harness {

namespace fs = std::filesystem;

inline constexpr const char* kMatrixFile = "matrix.csv";
inline constexpr const char* kFeaturesFile = "features.csv";
inline constexpr const char* kWindowFile = "window.csv";

// Runs fn(0..n-1) on up to `workers` threads. The first exception thrown by
// any job is rethrown after all threads have joined.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
  std::size_t count = 200;
  Var vars_min = 100;
  Var vars_max = 200;
  double ratio_min = 4.1;
  double ratio_max = 5.0;
  std::uint64_t seed = 0;
};

inline void validate(const GenOptions& o) {
  if (o.count == 0) throw Error("gen: count must be positive");
  if (o.vars_min < 3) throw Error("gen: vars_min must be >= 3");
  if (o.vars_max < o.vars_min) throw Error("gen: vars_max < vars_min");
  if (!(o.ratio_min > 0) || !std::isfinite(o.ratio_max)) throw Error("gen: ratios must be positive and finite");
  if (o.ratio_max < o.ratio_min) throw Error("gen: ratio_max < ratio_min");
}

inline std::vector<Formula> gen_rand_formulas(const GenOptions& o) {
  validate(o);
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<Var> pick_n(o.vars_min, o.vars_max);
  std::uniform_real_distribution<double> pick_ratio(o.ratio_min, o.ratio_max);
  std::vector<Formula> out;
  std::size_t width = std::max<std::size_t>(4, std::to_string(o.count - 1).size());
  for (std::size_t i = 0; i < o.count; ++i) {
    Var n = pick_n(rng);
    double ratio = pick_ratio(rng);
    Formula f = random_ksat(n, clauses_for_ratio(n, ratio), rng);
    std::string idx = std::to_string(i);
    f.source_name = "rand-" + std::string(width - idx.size(), '0') + idx;
    out.push_back(std::move(f));
  }
  return out;
}

// Writes <dir>/rand-NNNN.cnf and returns the paths in index order.
inline std::vector<std::string> gen_rand(const std::string& dir, const GenOptions& o) {
  std::vector<Formula> fs_ = gen_rand_formulas(o);
  fs::create_directories(dir);
  std::vector<std::string> paths;
  for (const Formula& f : fs_) {
    fs::path p = fs::path(dir) / (f.source_name + ".cnf");
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    out << "c " << f.source_name << " random 3-SAT seed " << o.seed << '\n' << to_dimacs(f);
    if (!out) throw Error("write failed: " + p.string());
    paths.push_back(p.string());
  }
  return paths;
}

// ---------------------------------------------------------------------------
// Records

struct RunRecord {
  std::string instance;
  std::string strategy;
  SolveStatus status = SolveStatus::Timeout;  // Sat, Unsat or Timeout
  double cpu_seconds = 0.0;                   // the cutoff for timeouts
  std::uint64_t conflicts = 0;
  std::uint64_t seed = 0;
};

struct MeasureRecord {
  std::string instance;
  SolveStatus status = SolveStatus::Stopped;  // Stopped = window reached
  double window_cpu_seconds = 0.0;
  std::uint64_t conflicts = 0;

  bool reached_window() const { return status == SolveStatus::Stopped; }
  // Solved before the selection point: nothing to select, excluded from training.
  bool too_easy() const { return status == SolveStatus::Sat || status == SolveStatus::Unsat; }
};

struct FeatureRecord {
  std::string instance;
  FeatureVector features{};
  std::optional<bool> sat;  // consensus label; empty when no run finished
};

inline SolveStatus parse_status(const std::string& s) {
  if (s == "sat") return SolveStatus::Sat;
  if (s == "unsat") return SolveStatus::Unsat;
  if (s == "timeout") return SolveStatus::Timeout;
  if (s == "window") return SolveStatus::Stopped;
  throw Error("unknown status '" + s + "'");
}

inline std::string measure_status_name(SolveStatus s) {
  return s == SolveStatus::Stopped ? "window" : to_string(s);
}

inline std::string label_name(const std::optional<bool>& l) { return !l ? "unknown" : (*l ? "sat" : "unsat"); }

inline std::optional<bool> parse_label(const std::string& s) {
  if (s == "sat") return true;
  if (s == "unsat") return false;
  if (s == "unknown") return std::nullopt;
  throw Error("unknown sat_label '" + s + "'");
}

inline csv::Table matrix_table(const std::vector<RunRecord>& rs) {
  csv::Table t;
  t.header = {"instance", "strategy", "status", "cpu_seconds", "conflicts", "seed"};
  for (const auto& r : rs) {
    t.rows.push_back({r.instance, r.strategy, to_string(r.status), csv::format_double(r.cpu_seconds),
                      std::to_string(r.conflicts), std::to_string(r.seed)});
  }
  return t;
}

inline std::vector<RunRecord> matrix_from_table(const csv::Table& t) {
  if (t.header != csv::Row{"instance", "strategy", "status", "cpu_seconds", "conflicts", "seed"}) {
    throw Error("matrix csv: unexpected header");
  }
  std::vector<RunRecord> out;
  for (const auto& row : t.rows) {
    RunRecord r{row[0], row[1], parse_status(row[2]), csv::parse_double(row[3], "cpu_seconds"),
                csv::parse_uint(row[4], "conflicts"), csv::parse_uint(row[5], "seed")};
    if (r.status == SolveStatus::Stopped) throw Error("matrix csv: invalid status for " + r.instance);
    out.push_back(std::move(r));
  }
  return out;
}

inline csv::Table features_table(const std::vector<FeatureRecord>& rs) {
  csv::Table t;
  t.header.push_back("instance");
  for (std::size_t j = 1; j <= kNumFeatures; ++j) t.header.push_back("f" + std::to_string(j));
  t.header.push_back("sat_label");
  for (const auto& r : rs) {
    csv::Row row{r.instance};
    for (double v : r.features) row.push_back(csv::format_double(v));
    row.push_back(label_name(r.sat));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::vector<FeatureRecord> features_from_table(const csv::Table& t) {
  if (t.header.size() != kNumFeatures + 2 || t.header.front() != "instance" || t.header.back() != "sat_label") {
    throw Error("features csv: unexpected header");
  }
  std::vector<FeatureRecord> out;
  for (const auto& row : t.rows) {
    FeatureRecord r;
    r.instance = row[0];
    for (std::size_t j = 0; j < kNumFeatures; ++j) r.features[j] = csv::parse_double(row[j + 1], "features of " + r.instance);
    r.sat = parse_label(row.back());
    out.push_back(std::move(r));
  }
  return out;
}

inline csv::Table window_table(const std::vector<MeasureRecord>& rs) {
  csv::Table t;
  t.header = {"instance", "measure_status", "too_easy", "window_cpu_seconds", "conflicts"};
  for (const auto& r : rs) {
    t.rows.push_back({r.instance, measure_status_name(r.status), r.too_easy() ? "1" : "0",
                      csv::format_double(r.window_cpu_seconds), std::to_string(r.conflicts)});
  }
  return t;
}

inline std::vector<MeasureRecord> window_from_table(const csv::Table& t) {
  if (t.header != csv::Row{"instance", "measure_status", "too_easy", "window_cpu_seconds", "conflicts"}) {
    throw Error("window csv: unexpected header");
  }
  std::vector<MeasureRecord> out;
  for (const auto& row : t.rows) {
    out.push_back({row[0], parse_status(row[1]), csv::parse_double(row[3], "window_cpu_seconds"),
                   csv::parse_uint(row[4], "conflicts")});
  }
  return out;
}

// ---------------------------------------------------------------------------
// run_matrix

struct Instance {
  std::string id;
  Formula formula;
  PreprocessResult pre;
};

inline Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Instance inst;
  inst.id = fs::path(path).stem().string();
  csv::check_field(inst.id);
  inst.formula = parse_dimacs(in, path);
  inst.pre = preprocess(inst.formula);
  return inst;
}

// *.cnf files of a directory, sorted by file name.
inline std::vector<std::string> list_instances(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".cnf") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
    return fs::path(a).filename() < fs::path(b).filename();
  });
  if (out.empty()) throw Error("no .cnf files in " + dir);
  return out;
}

struct MatrixOptions {
  Portfolio portfolio = default_portfolio();
  double cutoff = 60.0;
  unsigned workers = 1;
  std::uint64_t seed = 0;
  std::ostream* progress = nullptr;
};

struct MatrixResult {
  std::vector<RunRecord> runs;  // instance-major, portfolio order
  std::vector<MeasureRecord> measurements;
  std::vector<FeatureRecord> features;  // window-reaching instances only
};

inline RunRecord run_strategy(const Instance& inst, const RestartStrategy& s, double cutoff, std::uint64_t seed) {
  SolverOptions so;
  so.seed = seed;
  Solver solver(inst.pre, so);
  solver.set_schedule(RestartSequence(s));
  SolveOutcome o = solver.solve(cutoff);
  RunRecord r{inst.id, s.name, o.status, o.cpu_seconds, o.conflicts, seed};
  if (o.status == SolveStatus::Sat && !check_model(inst.formula, o.model)) {
    throw Error("soundness: model returned by " + s.name + " fails on " + inst.id);
  }
  // A run that finished past the cutoff did not finish within it.
  if (r.status == SolveStatus::Timeout || r.cpu_seconds > cutoff) {
    r.status = SolveStatus::Timeout;
    r.cpu_seconds = cutoff;
  }
  return r;
}

// Consensus over every finished run of one instance; disagreement means an
// unsound solver and aborts the collection.
inline std::optional<bool> consensus_label(const std::string& id, const std::vector<SolveStatus>& statuses) {
  std::optional<bool> label;
  for (SolveStatus s : statuses) {
    if (s != SolveStatus::Sat && s != SolveStatus::Unsat) continue;
    bool sat = s == SolveStatus::Sat;
    if (label && *label != sat) throw Error("soundness: strategies disagree on the status of " + id);
    label = sat;
  }
  return label;
}

// One job per (instance, strategy) plus one measurement run per instance.
// Workers fill preallocated slots; this thread assembles the result.
inline MatrixResult run_matrix(const std::vector<Instance>& instances, const MatrixOptions& opt) {
  if (!(opt.cutoff > 0)) throw Error("run_matrix: cutoff must be positive");
  if (opt.portfolio.empty()) throw Error("run_matrix: empty portfolio");
  std::size_t ns = opt.portfolio.size();
  std::size_t per = ns + 1;
  std::vector<RunRecord> runs(instances.size() * ns);
  std::vector<MeasureResult> measures(instances.size());
  std::mutex log_mutex;
  std::atomic<std::size_t> done{0};
  parallel_for(instances.size() * per, opt.workers, [&](std::size_t job) {
    const Instance& inst = instances[job / per];
    std::size_t s = job % per;
    if (s < ns) {
      runs[job / per * ns + s] = run_strategy(inst, opt.portfolio[s], opt.cutoff, opt.seed);
    } else {
      RunOptions ro;
      ro.seed = opt.seed;
      measures[job / per] = measure_features(inst.formula, inst.pre, opt.cutoff, ro);
    }
    std::size_t d = ++done;
    if (opt.progress) {
      std::lock_guard lock(log_mutex);
      *opt.progress << "[" << d << "/" << instances.size() * per << "] " << inst.id << " "
                    << (s < ns ? opt.portfolio[s].name : std::string("measure")) << '\n';
    }
  });

  MatrixResult r;
  r.runs = std::move(runs);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const MeasureResult& m = measures[i];
    std::vector<SolveStatus> statuses{m.outcome.status};
    for (std::size_t s = 0; s < ns; ++s) statuses.push_back(r.runs[i * ns + s].status);
    std::optional<bool> label = consensus_label(instances[i].id, statuses);
    MeasureRecord mr{instances[i].id, m.outcome.status, m.window_cpu_seconds, m.outcome.conflicts};
    r.measurements.push_back(mr);
    if (m.features) r.features.push_back({instances[i].id, *m.features, label});
  }
  return r;
}

inline void write_matrix_outputs(const std::string& dir, const MatrixResult& r) {
  fs::create_directories(dir);
  csv::write_file((fs::path(dir) / kMatrixFile).string(), matrix_table(r.runs));
  csv::write_file((fs::path(dir) / kFeaturesFile).string(), features_table(r.features));
  csv::write_file((fs::path(dir) / kWindowFile).string(), window_table(r.measurements));
}

// ---------------------------------------------------------------------------
// Joined view of the three CSVs

struct Dataset {
  Portfolio portfolio;
  double cutoff = 60.0;
  std::vector<std::string> ids;               // every matrix instance, sorted
  std::vector<std::vector<RunRecord>> runs;   // [instance][strategy], portfolio order
  std::vector<MeasureRecord> measurements;
  std::vector<std::optional<FeatureVector>> features;
  std::vector<std::optional<bool>> labels;

  std::size_t size() const { return ids.size(); }
  bool solved(std::size_t i, std::size_t s) const { return runs[i][s].status != SolveStatus::Timeout; }
  double runtime(std::size_t i, std::size_t s) const { return runs[i][s].cpu_seconds; }
  std::vector<double> runtimes(std::size_t i) const {
    std::vector<double> out;
    for (const auto& r : runs[i]) out.push_back(r.cpu_seconds);
    return out;
  }
  // Instances that reached the selection point; the evaluation population.
  std::vector<std::size_t> evaluable() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) {
      if (features[i]) out.push_back(i);
    }
    return out;
  }
};

inline Dataset join(const std::vector<RunRecord>& matrix, const std::vector<FeatureRecord>& features,
                    const std::vector<MeasureRecord>& window, const Portfolio& portfolio, double cutoff) {
  if (!(cutoff > 0)) throw Error("cutoff must be positive");
  Dataset d;
  d.portfolio = portfolio;
  d.cutoff = cutoff;
  std::map<std::string, std::size_t> strategy_index;
  for (std::size_t s = 0; s < portfolio.size(); ++s) strategy_index[portfolio[s].name] = s;

  std::map<std::string, std::vector<std::optional<RunRecord>>> by_instance;
  for (const auto& r : matrix) {
    auto it = strategy_index.find(r.strategy);
    if (it == strategy_index.end()) throw Error("matrix: strategy '" + r.strategy + "' is not in the portfolio");
    auto& slots = by_instance[r.instance];
    slots.resize(portfolio.size());
    if (slots[it->second]) throw Error("matrix: duplicate row for " + r.instance + "/" + r.strategy);
    if (r.cpu_seconds < 0 || r.cpu_seconds > cutoff) {
      throw Error("matrix: cpu_seconds of " + r.instance + "/" + r.strategy + " outside [0, cutoff]");
    }
    if (r.status == SolveStatus::Timeout && r.cpu_seconds != cutoff) {
      throw Error("matrix: timeout of " + r.instance + "/" + r.strategy + " was recorded under a different cutoff");
    }
    slots[it->second] = r;
  }
  std::map<std::string, const FeatureRecord*> feat;
  for (const auto& f : features) {
    if (!feat.emplace(f.instance, &f).second) throw Error("features: duplicate instance " + f.instance);
    if (!by_instance.count(f.instance)) throw Error("instance coverage mismatch: " + f.instance + " has features but no matrix rows");
  }
  std::map<std::string, const MeasureRecord*> win;
  for (const auto& w : window) {
    if (!win.emplace(w.instance, &w).second) throw Error("window: duplicate instance " + w.instance);
    if (!by_instance.count(w.instance)) throw Error("instance coverage mismatch: " + w.instance + " has a window record but no matrix rows");
  }
  for (auto& [id, slots] : by_instance) {
    std::vector<RunRecord> row;
    std::vector<SolveStatus> statuses;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (!slots[s]) throw Error("matrix: " + id + " has no row for " + portfolio[s].name);
      row.push_back(*slots[s]);
      statuses.push_back(slots[s]->status);
    }
    auto w = win.find(id);
    if (w == win.end()) throw Error("instance coverage mismatch: " + id + " has no window record");
    auto f = feat.find(id);
    if (w->second->reached_window() != (f != feat.end())) {
      throw Error("instance coverage mismatch: features of " + id + " disagree with its window record");
    }
    statuses.push_back(w->second->status);
    std::optional<bool> label = consensus_label(id, statuses);
    if (f != feat.end() && f->second->sat != label) throw Error("features: sat_label of " + id + " disagrees with the matrix");
    d.ids.push_back(id);
    d.runs.push_back(std::move(row));
    d.measurements.push_back(*w->second);
    d.features.push_back(f == feat.end() ? std::nullopt : std::optional<FeatureVector>(f->second->features));
    d.labels.push_back(label);
  }
  return d;
}

inline Dataset load_dataset(const std::string& dir, const Portfolio& portfolio, double cutoff) {
  auto path = [&](const char* f) { return (fs::path(dir) / f).string(); };
  return join(matrix_from_table(csv::read_file(path(kMatrixFile))),
              features_from_table(csv::read_file(path(kFeaturesFile))),
              window_from_table(csv::read_file(path(kWindowFile))), portfolio, cutoff);
}

// Training rows for the given instances: those with features and a label.
inline std::vector<TrainingInstance> training_rows(const Dataset& d, std::span<const std::size_t> rows) {
  std::vector<TrainingInstance> out;
  for (std::size_t i : rows) {
    if (!d.features[i] || !d.labels[i]) continue;
    out.push_back({d.ids[i], *d.features[i], *d.labels[i], d.runtimes(i)});
  }
  return out;
}

inline TrainedBundle train_on(const Dataset& d, std::span<const std::size_t> rows, const TrainOptions& opt = {}) {
  std::vector<TrainingInstance> data = training_rows(d, rows);
  return train(data, d.portfolio, opt);
}

inline TrainedBundle train_all(const Dataset& d, const TrainOptions& opt = {}) {
  std::vector<std::size_t> all = d.evaluable();
  return train_on(d, all, opt);
}

}  // namespace lmpick::harness
