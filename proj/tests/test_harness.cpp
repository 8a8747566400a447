#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "lmpick/bundle_io.hpp"
#include "lmpick/evaluation.hpp"
#include "lmpick/harness.hpp"

using namespace lmpick;
using namespace lmpick::harness;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("lmpick_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string id_of(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "inst-%04zu", i);
  return buf;
}

// Synthetic dataset with planted structure: x0 drives satisfiability and
// x1/x2 decide which strategies are fast. Goes through join() like real data.
Dataset synthetic_dataset(std::uint64_t seed, std::size_t n, double cutoff = 10.0, std::size_t too_easy = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Portfolio p = default_portfolio();
  std::vector<RunRecord> runs;
  std::vector<FeatureRecord> feats;
  std::vector<MeasureRecord> win;
  for (std::size_t i = 0; i < n + too_easy; ++i) {
    std::string id = id_of(i);
    FeatureVector x{};
    for (double& v : x) v = g(rng);
    bool sat = x[0] + 0.3 * g(rng) > 0;
    for (std::size_t s = 0; s < p.size(); ++s) {
      double slope = (static_cast<double>(s) - 4.0) / 4.0;
      double t = std::exp(0.5 + slope * (sat ? x[1] : x[2]) + 0.2 * g(rng));
      bool timeout = t >= cutoff;
      runs.push_back({id, p[s].name, timeout ? SolveStatus::Timeout : (sat ? SolveStatus::Sat : SolveStatus::Unsat),
                      timeout ? cutoff : t, 1000, seed});
    }
    if (i < n) {
      win.push_back({id, SolveStatus::Stopped, 0.01, 2100});
      bool any = false;
      for (std::size_t s = 0; s < p.size(); ++s) any = any || runs[runs.size() - 1 - s].status != SolveStatus::Timeout;
      feats.push_back({id, x, any ? std::optional<bool>(sat) : std::nullopt});
    } else {
      win.push_back({id, sat ? SolveStatus::Sat : SolveStatus::Unsat, 0.0, 500});
    }
  }
  return join(runs, feats, win, p, cutoff);
}

std::vector<RunRecord> flatten(const Dataset& d) {
  std::vector<RunRecord> out;
  for (const auto& row : d.runs) out.insert(out.end(), row.begin(), row.end());
  return out;
}

std::vector<FeatureRecord> feature_records(const Dataset& d) {
  std::vector<FeatureRecord> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.features[i]) out.push_back({d.ids[i], *d.features[i], d.labels[i]});
  }
  return out;
}

}  // namespace

TEST(Gen, FixedSizeAndRatio) {
  GenOptions o;
  o.count = 5;
  o.vars_min = o.vars_max = 250;
  o.ratio_min = o.ratio_max = 4.1;
  for (const Formula& f : gen_rand_formulas(o)) {
    EXPECT_EQ(f.num_vars, 250u);
    ASSERT_EQ(f.clauses.size(), 1025u);
    for (const Clause& c : f.clauses) {
      ASSERT_EQ(c.size(), 3u);
      EXPECT_NE(c[0].var(), c[1].var());
      EXPECT_NE(c[0].var(), c[2].var());
      EXPECT_NE(c[1].var(), c[2].var());
    }
  }
}

TEST(Gen, RangesRespected) {
  GenOptions o;
  o.count = 200;
  o.seed = 9;
  std::set<Var> sizes;
  for (const Formula& f : gen_rand_formulas(o)) {
    ASSERT_GE(f.num_vars, 100u);
    ASSERT_LE(f.num_vars, 200u);
    double ratio = static_cast<double>(f.clauses.size()) / static_cast<double>(f.num_vars);
    EXPECT_GE(ratio, 4.1 - 0.5 / static_cast<double>(f.num_vars));
    EXPECT_LE(ratio, 5.0 + 0.5 / static_cast<double>(f.num_vars));
    sizes.insert(f.num_vars);
  }
  EXPECT_GT(sizes.size(), 50u);
}

TEST(Gen, SameSeedByteIdenticalFiles) {
  GenOptions o;
  o.count = 12;
  o.vars_min = 20;
  o.vars_max = 40;
  o.seed = 77;
  fs::path a = temp_dir("gen_a"), b = temp_dir("gen_b"), c = temp_dir("gen_c");
  auto pa = gen_rand(a.string(), o);
  auto pb = gen_rand(b.string(), o);
  ASSERT_EQ(pa.size(), 12u);
  EXPECT_EQ(fs::path(pa.front()).filename(), "rand-0000.cnf");
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(slurp(pa[i]), slurp(pb[i]));
  o.seed = 78;
  auto pc = gen_rand(c.string(), o);
  EXPECT_NE(slurp(pa[0]), slurp(pc[0]));
  // Files parse back to the generated formulas.
  auto formulas = gen_rand_formulas(GenOptions{12, 20, 40, 4.1, 5.0, 77});
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(load_instance(pa[i]).formula.clauses, formulas[i].clauses);
  for (auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Gen, InvalidRanges) {
  auto bad = [](GenOptions o) { EXPECT_THROW(gen_rand_formulas(o), Error); };
  GenOptions o;
  o.vars_min = 2;
  bad(o);
  o = {};
  o.vars_max = 50;
  bad(o);
  o = {};
  o.ratio_min = 0;
  bad(o);
  o = {};
  o.ratio_min = 6;
  bad(o);
  o = {};
  o.count = 0;
  bad(o);
}

TEST(RunMatrix, CardinalityAndTimeoutAccounting) {
  GenOptions o;
  o.count = 2;
  o.vars_min = o.vars_max = 60;
  o.seed = 5;
  std::vector<Instance> insts;
  for (const Formula& f : gen_rand_formulas(o)) insts.push_back({f.source_name, f, preprocess(f)});
  MatrixOptions mo;
  mo.cutoff = 30;
  MatrixResult r = run_matrix(insts, mo);
  ASSERT_EQ(r.runs.size(), 18u);
  EXPECT_EQ(r.measurements.size(), 2u);
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    EXPECT_EQ(r.runs[i].instance, insts[i / 9].id);
    EXPECT_EQ(r.runs[i].strategy, mo.portfolio[i % 9].name);
    EXPECT_NE(r.runs[i].status, SolveStatus::Timeout);
    EXPECT_LE(r.runs[i].cpu_seconds, mo.cutoff);
  }

  // A cutoff far too short for a 300-variable instance: every row times out
  // and carries exactly the cutoff.
  std::mt19937_64 rng(1);
  Formula hard = random_ksat(300, clauses_for_ratio(300, 4.26), rng);
  std::vector<Instance> one{{"hard", hard, preprocess(hard)}};
  mo.cutoff = 0.002;
  MatrixResult t = run_matrix(one, mo);
  for (const auto& row : t.runs) {
    EXPECT_EQ(row.status, SolveStatus::Timeout);
    EXPECT_EQ(row.cpu_seconds, 0.002);
  }
  EXPECT_TRUE(t.features.empty());
  EXPECT_FALSE(t.measurements[0].too_easy());
}

TEST(RunMatrix, WorkerCountDoesNotChangeResults) {
  GenOptions o;
  o.count = 4;
  o.vars_min = 80;
  o.vars_max = 120;
  o.seed = 11;
  std::vector<Instance> insts;
  for (const Formula& f : gen_rand_formulas(o)) insts.push_back({f.source_name, f, preprocess(f)});
  MatrixOptions mo;
  MatrixResult a = run_matrix(insts, mo);
  mo.workers = 3;
  MatrixResult b = run_matrix(insts, mo);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].status, b.runs[i].status);
    EXPECT_EQ(a.runs[i].conflicts, b.runs[i].conflicts);
  }
  ASSERT_EQ(a.features.size(), b.features.size());
  for (std::size_t i = 0; i < a.features.size(); ++i) EXPECT_EQ(a.features[i].features, b.features[i].features);
}

TEST(RunMatrix, ConsensusDisagreementAborts) {
  EXPECT_EQ(consensus_label("x", {SolveStatus::Timeout, SolveStatus::Sat, SolveStatus::Stopped}), std::optional<bool>(true));
  EXPECT_EQ(consensus_label("x", {SolveStatus::Timeout}), std::nullopt);
  try {
    consensus_label("x", {SolveStatus::Sat, SolveStatus::Unsat});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("soundness"), std::string::npos);
  }
}

TEST(RunMatrix, FilesRoundTripAndListSorted) {
  fs::path inst = temp_dir("rm_inst"), data = temp_dir("rm_data");
  GenOptions o;
  o.count = 3;
  o.vars_min = 60;
  o.vars_max = 150;
  o.seed = 2;
  gen_rand(inst.string(), o);
  std::ofstream(inst / "ignored.txt") << "x";
  auto paths = list_instances(inst.string());
  ASSERT_EQ(paths.size(), 3u);
  EXPECT_TRUE(std::is_sorted(paths.begin(), paths.end()));
  std::vector<Instance> insts;
  for (const auto& p : paths) insts.push_back(load_instance(p));
  MatrixResult r = run_matrix(insts, MatrixOptions{});
  write_matrix_outputs(data.string(), r);
  Dataset d = load_dataset(data.string(), default_portfolio(), 60.0);
  ASSERT_EQ(d.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(d.ids[i], insts[i].id);
    for (std::size_t s = 0; s < 9; ++s) EXPECT_EQ(d.runtime(i, s), r.runs[i * 9 + s].cpu_seconds);
    EXPECT_EQ(d.measurements[i].window_cpu_seconds, r.measurements[i].window_cpu_seconds);
  }
  EXPECT_EQ(feature_records(d).size(), r.features.size());
  for (std::size_t j = 0; j < r.features.size(); ++j) EXPECT_EQ(feature_records(d)[j].features, r.features[j].features);
  fs::remove_all(inst);
  fs::remove_all(data);
}

TEST(Join, CoverageErrors) {
  Dataset d = synthetic_dataset(1, 6, 2.0, 2);
  auto runs = flatten(d);
  auto feats = feature_records(d);
  auto win = d.measurements;
  Portfolio p = default_portfolio();
  ASSERT_TRUE(std::any_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.status == SolveStatus::Timeout; }));
  EXPECT_NO_THROW(join(runs, feats, win, p, 2.0));

  auto missing_row = runs;
  missing_row.pop_back();
  EXPECT_THROW(join(missing_row, feats, win, p, 2.0), Error);

  auto extra_feat = feats;
  extra_feat.push_back(feats.front());
  extra_feat.back().instance = "ghost";
  EXPECT_THROW(join(runs, extra_feat, win, p, 2.0), Error);

  auto no_window = win;
  no_window.pop_back();
  try {
    join(runs, feats, no_window, p, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("coverage mismatch"), std::string::npos);
  }

  auto missing_feat = feats;
  missing_feat.pop_back();
  EXPECT_THROW(join(runs, missing_feat, win, p, 2.0), Error);

  // A timeout recorded under another cutoff.
  EXPECT_THROW(join(runs, feats, win, p, 20.0), Error);
}

TEST(Csv, TablesRoundTripExactly) {
  Dataset d = synthetic_dataset(2, 10, 10.0, 3);
  auto runs = flatten(d);
  std::ostringstream a, b, c;
  for (const auto& t : {matrix_table(runs), features_table(feature_records(d)), window_table(d.measurements)}) {
    std::ostringstream o;
    csv::write_row(o, t.header);
    for (const auto& r : t.rows) csv::write_row(o, r);
    std::istringstream in(o.str());
    csv::Table back = csv::parse(in, "mem");
    EXPECT_EQ(back.header, t.header);
    EXPECT_EQ(back.rows, t.rows);
  }
  auto back = matrix_from_table(matrix_table(runs));
  for (std::size_t i = 0; i < runs.size(); ++i) EXPECT_EQ(back[i].cpu_seconds, runs[i].cpu_seconds);
  EXPECT_THROW(csv::check_field("a,b"), Error);
}

TEST(Report, TotalsMatchIndependentRecomputation) {
  fs::path dir = temp_dir("totals");
  Dataset d = synthetic_dataset(3, 60);
  csv::write_file((dir / kMatrixFile).string(), matrix_table(flatten(d)));

  // Sum straight from the CSV text, in file order.
  std::map<std::string, double> total;
  std::map<std::string, int> solved;
  std::ifstream in(dir / kMatrixFile);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string inst, strat, status, secs;
    std::getline(ss, inst, ',');
    std::getline(ss, strat, ',');
    std::getline(ss, status, ',');
    std::getline(ss, secs, ',');
    total[strat] += std::strtod(secs.c_str(), nullptr);
    solved[strat] += status != "timeout";
  }

  EvalOptions eo;
  eo.k = 5;
  EvaluationOutput e = evaluate(d, eo);
  Report r = build_report(d, e.selections, e.classifier_oracle);
  double mean_total = 0, mean_solved = 0;
  for (const auto& s : default_portfolio()) {
    EXPECT_EQ(r.row(s.name).total_seconds, total[s.name]) << s.name;
    EXPECT_EQ(r.row(s.name).solved, solved[s.name]) << s.name;
    mean_total += total[s.name] / 9;
    mean_solved += solved[s.name] / 9.0;
  }
  EXPECT_NEAR(r.row("random-pick").total_seconds, mean_total, 1e-9 * mean_total);
  EXPECT_NEAR(r.row("random-pick").solved, mean_solved, 1e-12);
  fs::remove_all(dir);
}

TEST(Report, HistogramAndAccuracyLayout) {
  Dataset d = synthetic_dataset(4, 80, 4.0, 5);
  EvalOptions eo;
  eo.k = 4;
  EvaluationOutput e = evaluate(d, eo);
  Report r = build_report(d, e.selections, e.classifier_oracle);
  EXPECT_EQ(r.instances, 80u);
  EXPECT_EQ(r.too_easy, 5u);
  ASSERT_EQ(r.solved_by_k.size(), 10u);
  std::size_t sum = 0;
  for (auto c : r.solved_by_k) sum += c;
  EXPECT_EQ(sum, r.instances);
  EXPECT_GT(r.solved_by_k[9], 0u);
  EXPECT_LT(r.solved_by_k[9], r.instances);  // cutoff 4 makes some strategies time out
  EXPECT_EQ(r.acc_all.total, r.acc_sat.total + r.acc_unsat.total);
  EXPECT_EQ(r.acc_all.correct, r.acc_sat.correct + r.acc_unsat.correct);
  EXPECT_EQ(r.acc_all.total + r.unlabeled, r.instances);
  std::string text = report_text(r);
  for (const char* row : {"  SAT ", "  UNSAT", "  ALL"}) EXPECT_NE(text.find(row), std::string::npos) << row;
  for (const auto& [name, t] : r.rows) {
    EXPECT_LE(t.solved, static_cast<double>(r.instances)) << name;
    EXPECT_DOUBLE_EQ(t.solved, t.solved_sat + t.solved_unsat) << name;
  }
}

TEST(Report, OracleUpperBound) {
  Dataset d = synthetic_dataset(5, 70, 3.0);
  EvalOptions eo;
  eo.k = 5;
  EvaluationOutput e = evaluate(d, eo);
  // Selections made with both oracles, through the selection machinery.
  std::vector<SelectionRow> oracle;
  for (std::size_t i : d.evaluable()) {
    OracleOverrides o;
    o.sat_label = d.labels[i];
    o.true_runtimes = d.runtimes(i);
    Selection sel = select_strategy(e.bundles[0], *d.features[i], &o);
    oracle.push_back(selection_row(d, i, 0, sel));
    EXPECT_EQ(oracle.back().rank, 1u);
  }
  // Without the window charge the oracle selection is the VBS.
  Dataset no_window = d;
  for (auto& m : no_window.measurements) m.window_cpu_seconds = 0.0;
  Report r = build_report(no_window, oracle, oracle);
  const Totals& vbs = r.row("oracle-vbs");
  EXPECT_EQ(r.row("lmpick-simulated").solved, vbs.solved);
  EXPECT_DOUBLE_EQ(r.row("lmpick-simulated").total_seconds, vbs.total_seconds);
  for (const auto& s : default_portfolio()) {
    EXPECT_LE(vbs.total_seconds, r.row(s.name).total_seconds) << s.name;
    EXPECT_GE(vbs.solved, r.row(s.name).solved) << s.name;
  }
}

TEST(Report, ReproducibleFromCsvFiles) {
  fs::path dir = temp_dir("repro");
  Dataset d = synthetic_dataset(6, 50, 6.0, 4);
  EvalOptions eo;
  eo.k = 5;
  EvaluationOutput e = evaluate(d, eo);
  write_evaluation(dir.string(), d, e);
  Report mem = build_report(d, e.selections, e.classifier_oracle);
  Report disk = report_from_files(d, dir.string());
  EXPECT_EQ(report_text(mem), report_text(disk));
  EXPECT_TRUE(fs::exists(dir / kReportCsv));
  csv::Table t = csv::read_file((dir / kReportCsv).string());
  EXPECT_EQ(t.header, (csv::Row{"section", "row", "metric", "value"}));
  csv::Table sel = csv::read_file((dir / kSelectionsFile).string());
  ASSERT_EQ(sel.header.size(), 14u);
  EXPECT_EQ(sel.header[5], "cost_1");
  EXPECT_EQ(sel.header[13], "cost_9");
  EXPECT_EQ(sel.rows.size(), 50u);
  fs::remove_all(dir);
}

TEST(Report, ClassifierOracleBeatsMislabeledClassifier) {
  Dataset d = synthetic_dataset(12, 120, 2.5);
  EvalOptions eo;
  eo.k = 5;
  EvaluationOutput e = evaluate(d, eo);
  FoldPlan plan = plan_folds(d, 5, 0);
  std::vector<SelectionRow> wrong;
  for (std::size_t i : d.evaluable()) {
    OracleOverrides o;
    if (d.labels[i]) o.sat_label = !*d.labels[i];
    wrong.push_back(selection_row(d, i, plan.fold_of[i], select_strategy(e.bundles[plan.fold_of[i]], *d.features[i], &o)));
  }
  Report truth = build_report(d, e.classifier_oracle, e.classifier_oracle);
  Report mislabeled = build_report(d, wrong, wrong);
  EXPECT_GE(truth.row("lmpick-simulated").solved, mislabeled.row("lmpick-simulated").solved);
  EXPECT_LT(truth.row("lmpick-simulated").total_seconds, mislabeled.row("lmpick-simulated").total_seconds);
}

TEST(Evaluate, FoldIsolation) {
  Dataset d = synthetic_dataset(7, 60);
  FoldPlan plan = plan_folds(d, 5, 3);
  std::set<std::size_t> seen;
  for (std::size_t f = 0; f < plan.test.size(); ++f) {
    for (std::size_t i : plan.test[f]) EXPECT_TRUE(seen.insert(i).second);
    for (std::size_t i : plan.train[f]) EXPECT_NE(plan.fold_of[i], f);
  }
  EXPECT_EQ(seen.size(), 60u);

  for (std::size_t f : {0u, 3u}) {
    std::string before = bundle_to_string(train_for_fold(d, plan.train[f]));
    Dataset perturbed = d;
    std::mt19937_64 rng(f);
    std::normal_distribution<double> g(0.0, 10.0);
    for (std::size_t i : plan.test[f]) {
      for (double& v : *perturbed.features[i]) v += g(rng);
      for (auto& r : perturbed.runs[i]) r.cpu_seconds = std::fabs(g(rng));
      perturbed.labels[i] = !perturbed.labels[i].value_or(false);
    }
    EXPECT_EQ(bundle_to_string(train_for_fold(perturbed, plan.train[f])), before) << "fold " << f;

    // Control: touching a training row does change the bundle.
    Dataset touched = d;
    std::size_t victim = plan.train[f].front();
    for (auto& r : touched.runs[victim]) r.cpu_seconds += 3.0;
    EXPECT_NE(bundle_to_string(train_for_fold(touched, plan.train[f])), before);
  }
}

TEST(Evaluate, SelectionsCoverEachInstanceOnce) {
  Dataset d = synthetic_dataset(8, 40, 10.0, 6);
  EvalOptions eo;
  eo.k = 4;
  eo.workers = 2;
  EvaluationOutput e = evaluate(d, eo);
  EXPECT_EQ(e.bundles.size(), 4u);
  ASSERT_EQ(e.selections.size(), 40u);
  std::set<std::string> ids;
  for (const auto& s : e.selections) {
    EXPECT_TRUE(ids.insert(s.instance).second);
    EXPECT_GE(s.rank, 1u);
    EXPECT_LE(s.rank, 9u);
    EXPECT_GE(s.p_sat, 0.0);
    EXPECT_LE(s.p_sat, 1.0);
  }
  for (const auto& s : e.classifier_oracle) {
    std::size_t i = static_cast<std::size_t>(std::find(d.ids.begin(), d.ids.end(), s.instance) - d.ids.begin());
    if (d.labels[i]) EXPECT_EQ(s.p_sat, *d.labels[i] ? 1.0 : 0.0);
  }
}

TEST(Bundle, RoundTripIsLossless) {
  Dataset d = synthetic_dataset(9, 80);
  TrainedBundle b = train_all(d);
  std::string text = bundle_to_string(b);
  TrainedBundle back = bundle_from_string(text);
  EXPECT_EQ(bundle_to_string(back), text);
  EXPECT_EQ(back.portfolio, b.portfolio);
  EXPECT_EQ(back.model_count(), 18u);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    FeatureVector x{};
    for (double& v : x) v = g(rng);
    Selection a = select_strategy(b, x), c = select_strategy(back, x);
    EXPECT_EQ(a.index, c.index);
    EXPECT_EQ(a.p_sat, c.p_sat);
    EXPECT_EQ(a.costs, c.costs);
  }
  fs::path dir = temp_dir("bundle");
  save_bundle(b, (dir / "b.json").string());
  EXPECT_EQ(bundle_to_string(load_bundle((dir / "b.json").string())), text);
  fs::remove_all(dir);
}

TEST(Bundle, RejectsBadFiles) {
  TrainedBundle b = train_all(synthetic_dataset(10, 60));
  nlohmann::json j = bundle_to_json(b);

  nlohmann::json short_models = j;
  short_models["unsat_models"].erase(short_models["unsat_models"].size() - 1);
  try {
    bundle_from_json(short_models);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("expected 18 runtime models"), std::string::npos) << e.what();
  }

  nlohmann::json bumped = j;
  bumped["schema_version"] = kBundleSchemaVersion + 1;
  try {
    bundle_from_json(bumped);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("incompatible bundle schema version"), std::string::npos);
  }

  std::string text = j.dump();
  EXPECT_THROW(bundle_from_string(text.substr(0, text.size() / 2)), Error);
  nlohmann::json no_weights = j;
  no_weights["classifier"].erase("weights");
  EXPECT_THROW(bundle_from_json(no_weights), Error);
  nlohmann::json bad_shape = j;
  bad_shape["sat_models"][0]["weights"].push_back(1.0);
  EXPECT_THROW(bundle_from_json(bad_shape), Error);
  EXPECT_THROW(load_bundle("/nonexistent/bundle.json"), Error);
}

TEST(ParallelFor, PropagatesFirstError) {
  std::atomic<int> ran{0};
  EXPECT_THROW(parallel_for(100, 4, [&](std::size_t i) {
                 ++ran;
                 if (i == 10) throw Error("boom");
               }),
               Error);
  std::vector<int> out(50, 0);
  parallel_for(50, 3, [&](std::size_t i) { out[i] = static_cast<int>(i); });
  for (int i = 0; i < 50; ++i) EXPECT_EQ(out[i], i);
}
