// lmpick command line: gen, run-matrix, train, solve, evaluate, report.

#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "lmpick/bundle_io.hpp"
#include "lmpick/evaluation.hpp"
#include "lmpick/harness.hpp"

using namespace lmpick;
using namespace lmpick::harness;

namespace {

struct Globals {
  double cutoff = 60.0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string portfolio;

  Portfolio strategies() const { return portfolio.empty() ? default_portfolio() : parse_portfolio(portfolio); }
};

int cmd_solve(const Globals& g, const std::string& path, const std::string& bundle_path,
              const std::string& strategy, const std::string& event_log) {
  Instance inst = load_instance(path);
  std::ofstream log_file;
  std::ostream* log = nullptr;
  if (!event_log.empty()) {
    log_file.open(event_log);
    if (!log_file) throw Error("cannot write " + event_log);
    log = &log_file;
  }
  SolveOutcome o;
  if (!bundle_path.empty()) {
    TrainedBundle b = load_bundle(bundle_path);
    RunOptions ro;
    ro.seed = g.seed;
    ro.event_log = log;
    LmpickResult r = lmpick_solve(inst.formula, inst.pre, b, g.cutoff, ro);
    o = std::move(r.outcome);
    if (r.report.selection) {
      const Selection& s = *r.report.selection;
      std::cout << "c selected " << s.name << " at conflict " << r.report.selection_conflict << " p_sat "
                << s.p_sat << '\n';
    } else {
      std::cout << "c solved before the selection point\n";
    }
  } else {
    SolverOptions so;
    so.seed = g.seed;
    so.event_log = log;
    Solver solver(inst.pre, so);
    solver.set_schedule(RestartSequence(strategy_from_name(strategy)));
    o = solver.solve(g.cutoff);
  }
  std::cout << "c conflicts " << o.conflicts << " restarts " << o.restarts << " cpu " << o.cpu_seconds << "s\n";
  switch (o.status) {
    case SolveStatus::Sat: {
      if (!check_model(inst.formula, o.model)) throw Error("internal error: model check failed");
      std::cout << "s SATISFIABLE\nv";
      for (Var v = 1; v <= inst.formula.num_vars; ++v) {
        bool val = o.model[v].value_or(false);
        std::cout << ' ' << (val ? "" : "-") << v;
      }
      std::cout << " 0\n";
      return 10;
    }
    case SolveStatus::Unsat:
      std::cout << "s UNSATISFIABLE\n";
      return 20;
    default:
      std::cout << "s UNKNOWN\n";
      return 0;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CDCL solver with learned restart-strategy selection"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--cutoff-seconds", g.cutoff, "CPU-second cutoff per run")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Seed for generation, solver jitter and fold assignment");
  app.add_option("--workers", g.workers, "Parallel solver runs")->check(CLI::PositiveNumber);
  app.add_option("--portfolio", g.portfolio, "Comma-separated strategy names (default: the nine built-ins)");

  GenOptions gen;
  std::string gen_out = "instances";
  auto* gen_cmd = app.add_subcommand("gen", "Generate random 3-SAT instances");
  gen_cmd->add_option("--out", gen_out, "Output directory");
  gen_cmd->add_option("--count", gen.count, "Number of instances");
  gen_cmd->add_option("--vars-min", gen.vars_min);
  gen_cmd->add_option("--vars-max", gen.vars_max);
  gen_cmd->add_option("--ratio-min", gen.ratio_min);
  gen_cmd->add_option("--ratio-max", gen.ratio_max);

  std::string instances_dir, data_dir = "data";
  auto* matrix_cmd = app.add_subcommand("run-matrix", "Run every strategy on every instance");
  matrix_cmd->add_option("--instances", instances_dir, "Directory of .cnf files")->required();
  matrix_cmd->add_option("--out", data_dir, "Output directory for matrix/features/window CSVs");
  bool quiet = false;
  matrix_cmd->add_flag("--quiet", quiet, "No progress lines");

  std::string bundle_out = "bundle.json";
  bool log_target = false;
  auto* train_cmd = app.add_subcommand("train", "Train a model bundle on a collected dataset");
  train_cmd->add_option("--data", data_dir, "Directory written by run-matrix");
  train_cmd->add_option("--out", bundle_out, "Bundle path");
  train_cmd->add_flag("--log-target", log_target, "Fit log10(1 + seconds)");

  std::string cnf, bundle_in, strategy = "luby-32", event_log;
  auto* solve_cmd = app.add_subcommand("solve", "Solve one DIMACS file");
  solve_cmd->add_option("cnf", cnf, "DIMACS file")->required();
  auto* bundle_opt = solve_cmd->add_option("--bundle", bundle_in, "Select a strategy with this bundle");
  solve_cmd->add_option("--strategy", strategy, "Fixed strategy when no bundle is given")->excludes(bundle_opt);
  solve_cmd->add_option("--event-log", event_log, "Write one line per restart");

  std::string eval_out = "eval";
  std::size_t folds = 10;
  bool execute = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Cross-validated evaluation");
  eval_cmd->add_option("--data", data_dir, "Directory written by run-matrix");
  eval_cmd->add_option("--out", eval_out, "Output directory");
  eval_cmd->add_option("--folds", folds, "k for k-fold cross validation")->check(CLI::Range(2, 1000));
  eval_cmd->add_option("--instances", instances_dir, "Also execute LMPick on these instances");
  eval_cmd->add_flag("--log-target", log_target, "Fit log10(1 + seconds)");

  auto* report_cmd = app.add_subcommand("report", "Rebuild the report from evaluation CSVs");
  report_cmd->add_option("--data", data_dir, "Directory written by run-matrix");
  report_cmd->add_option("--eval", eval_out, "Directory written by evaluate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      gen.seed = g.seed;
      auto paths = gen_rand(gen_out, gen);
      std::cout << "wrote " << paths.size() << " instances to " << gen_out << '\n';
    } else if (*matrix_cmd) {
      std::vector<Instance> insts;
      for (const auto& p : list_instances(instances_dir)) insts.push_back(load_instance(p));
      MatrixOptions mo;
      mo.portfolio = g.strategies();
      mo.cutoff = g.cutoff;
      mo.workers = g.workers;
      mo.seed = g.seed;
      mo.progress = quiet ? nullptr : &std::cerr;
      MatrixResult r = run_matrix(insts, mo);
      write_matrix_outputs(data_dir, r);
      std::cout << "wrote " << r.runs.size() << " runs, " << r.features.size() << " feature rows to " << data_dir << '\n';
    } else if (*train_cmd) {
      Dataset d = load_dataset(data_dir, g.strategies(), g.cutoff);
      std::vector<std::string> warnings;
      TrainOptions to;
      to.log_target = log_target;
      to.warnings = &warnings;
      TrainedBundle b = train_all(d, to);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      save_bundle(b, bundle_out);
      std::cout << "wrote " << bundle_out << " (" << b.model_count() << " runtime models)\n";
    } else if (*solve_cmd) {
      return cmd_solve(g, cnf, bundle_in, strategy, event_log);
    } else if (*eval_cmd) {
      Dataset d = load_dataset(data_dir, g.strategies(), g.cutoff);
      EvalOptions eo;
      eo.k = folds;
      eo.seed = g.seed;
      eo.workers = g.workers;
      eo.instances_dir = instances_dir;
      eo.train.log_target = log_target;
      eo.progress = &std::cerr;
      EvaluationOutput e = evaluate(d, eo);
      write_evaluation(eval_out, d, e);
      std::cout << report_text(report_from_files(d, eval_out));
    } else if (*report_cmd) {
      Dataset d = load_dataset(data_dir, g.strategies(), g.cutoff);
      std::cout << report_text(report_from_files(d, eval_out));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
