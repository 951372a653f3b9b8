// mixsel: variable selection and location-model classification for mixed data.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixsel/mixsel.hpp"

namespace {

using namespace mixsel;

struct DataFlags {
  int p = 0;
  int d = 0;
  int q = 0;
  std::string group_column = "z";

  CsvSchema schema() const { return CsvSchema{p, d, q, group_column}; }
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--p", f.p, "p: number of continuous variables (columns x1..xp)")->required();
  cmd->add_option("--d", f.d, "d: number of binary variables (columns y1..yd), M = 2^d cells")->required();
  cmd->add_option("--q", f.q, "q: number of groups (default: largest label in the file)");
  cmd->add_option("--group-column", f.group_column, "column holding the group label Z in 1..q")
      ->capture_default_str();
}

struct SelectionFlags {
  SelectionConfig cfg;
  std::string penalty = "h7";
  std::string estimator = "empirical";
  std::string dimension_index = "variable";

  SelectionConfig resolve() const {
    SelectionConfig c = cfg;
    c.penalty = parse_penalty(penalty);
    if (estimator == "empirical")
      c.estimator = EstimatorKind::empirical;
    else if (estimator == "smoothed")
      c.estimator = EstimatorKind::smoothed;
    else
      throw UsageError("--estimator must be 'empirical' or 'smoothed', got '" + estimator + "'");
    if (dimension_index == "variable")
      c.dimension_index = DimensionIndex::variable;
    else if (dimension_index == "rank")
      c.dimension_index = DimensionIndex::rank;
    else
      throw UsageError("--dimension-index must be 'variable' or 'rank', got '" + dimension_index + "'");
    c.validate();
    return c;
  }
};

void add_selection_flags(CLI::App* cmd, SelectionFlags& f) {
  cmd->add_option("--alpha", f.cfg.alpha, "alpha: exponent of the ordering penalty f_n = n^-alpha / h(i), in ]0, 1/2[")
      ->capture_default_str();
  cmd->add_option("--beta", f.cfg.beta, "beta: exponent of the dimension penalty g_n = n^-beta h(i), in ]0, 1[")
      ->capture_default_str();
  cmd->add_option("--penalty", f.penalty, "h: penalty shape h1..h13")->capture_default_str();
  cmd->add_option("--estimator", f.estimator, "cell estimates: empirical or smoothed (kernel weights lambda^D)")
      ->capture_default_str();
  cmd->add_option("--lambda", f.cfg.lambda, "lambda: smoothing parameter in [0, 1[ for --estimator smoothed")
      ->capture_default_str();
  cmd->add_option("--dimension-index", f.dimension_index,
                  "argument of g_n in psi(i): 'variable' uses sigma(i), 'rank' uses i")
      ->capture_default_str();
}

/// "0.1,0.2" or "start:step:stop" (inclusive).
std::vector<double> parse_grid(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double a = 0, s = 0, b = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> a >> c1 >> s >> c2 >> b) || c1 != ':' || c2 != ':' || !(s > 0) || b < a)
      throw UsageError(flag + ": expected start:step:stop, got '" + text + "'");
    const int count = static_cast<int>(std::floor((b - a) / s + 1e-9)) + 1;
    return arithmetic_grid(a, s, count);
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError(flag + ": empty grid");
  return out;
}

std::string format_set(const VariableSet& s) { return s.to_string(); }

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

VariableSet parse_selected(const std::string& text, int p) {
  VariableSet s;
  std::string cleaned;
  for (char c : text)
    if (c != '{' && c != '}' && c != ' ') cleaned += c;
  std::stringstream ss(cleaned);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    try {
      v = std::stoi(item);
    } catch (const std::exception&) {
      throw UsageError("--selected: '" + item + "' is not a variable index");
    }
    if (v < 1 || v > p) throw UsageError("--selected: variable " + item + " outside 1.." + std::to_string(p));
    s.insert(v - 1);
  }
  if (s.empty()) throw UsageError("--selected: empty variable set");
  return s;
}

int run(int argc, char** argv) {
  CLI::App app{"Variable selection and location-model discrimination for mixed continuous/binary data"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker cap (default: MIXSEL_THREADS or hardware concurrency)");

  // select
  auto* sel_cmd = app.add_subcommand("select", "estimate the permutation sigma and dimension s, print I_1 = {sigma(1..s)}");
  DataFlags sel_data;
  SelectionFlags sel_flags;
  std::string sel_input, sel_output, sel_dump;
  sel_cmd->add_option("--input", sel_input, "training CSV (x1..xp, y1..yd, group column)")->required();
  add_data_flags(sel_cmd, sel_data);
  add_selection_flags(sel_cmd, sel_flags);
  sel_cmd->add_option("--output", sel_output, "JSON report: sigma, s_hat, phi, psi, xi values");
  sel_cmd->add_option("--dump-estimates", sel_dump, "JSON dump of p_m, p_l_given_m, mu_m, mu_lm, V_m");

  // classify
  auto* cls_cmd = app.add_subcommand("classify", "fit the location-model rule on --train and classify --test");
  DataFlags cls_data;
  SelectionFlags cls_flags;
  std::string cls_train, cls_test, cls_output, cls_selected;
  double alpha_cost = 1.0;
  cls_cmd->add_option("--train", cls_train, "training CSV")->required();
  cls_cmd->add_option("--test", cls_test, "CSV to classify; its group column scores CC")->required();
  add_data_flags(cls_cmd, cls_data);
  add_selection_flags(cls_cmd, cls_flags);
  cls_cmd->add_option("--selected", cls_selected, "variables K to use, e.g. 2,3,4 (default: run selection on --train)");
  cls_cmd->add_option("--alpha-cost", alpha_cost, "alpha: cost constant in the two-group rule threshold ln(alpha)")
      ->capture_default_str();
  cls_cmd->add_option("--output", cls_output, "per-row predictions CSV (default: standard output)");

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "leave-one-out choice of (alpha, beta) and of the smoothing lambda");
  DataFlags tune_data;
  SelectionFlags tune_flags;
  std::string tune_train, tune_output, tune_summary, tune_lambda_output;
  std::string grid_alpha = "0.05:0.05:0.45", grid_beta = "0.05:0.05:0.95", grid_lambda;
  std::optional<std::uint64_t> tune_seed;
  tune_cmd->add_option("--train", tune_train, "training CSV")->required();
  add_data_flags(tune_cmd, tune_data);
  add_selection_flags(tune_cmd, tune_flags);
  tune_cmd->add_option("--grid-alpha", grid_alpha, "alpha grid inside ]0, 1/2[: list a,b,c or start:step:stop")
      ->capture_default_str();
  tune_cmd->add_option("--grid-beta", grid_beta, "beta grid inside ]0, 1[: list or start:step:stop")->capture_default_str();
  tune_cmd->add_option("--grid-lambda", grid_lambda,
                       "lambda grid inside [0, 1[; when given, lambda is tuned first with --alpha/--beta, then (alpha, beta) at the chosen lambda");
  tune_cmd->add_option("--seed", tune_seed, "seed recorded with the run (leave-one-out is deterministic)")->required();
  tune_cmd->add_option("--alpha-cost", alpha_cost, "alpha: cost constant of the two-group rule")->capture_default_str();
  tune_cmd->add_option("--output", tune_output, "CV table CSV alpha,beta,cv,failures (default: standard output)");
  tune_cmd->add_option("--lambda-output", tune_lambda_output, "lambda CV table CSV lambda,cv,failures");
  tune_cmd->add_option("--summary", tune_summary, "JSON summary with the best pair");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "replicated train/test experiment on simulated mixed data");
  std::string scenario_name, scenario_file, sim_output, sim_summary;
  std::optional<int> reps;
  std::optional<std::uint64_t> sim_seed;
  auto* name_opt = sim_cmd->add_option("--scenario", scenario_name, "built-in scenario: paper-table1, paper-table2, paper-fig1");
  sim_cmd->add_option("--scenario-file", scenario_file, "key=value scenario file")->excludes(name_opt);
  sim_cmd->add_option("--reps", reps, "number of replications (overrides the scenario)");
  sim_cmd->add_option("--seed", sim_seed, "master seed of the random streams")->required();
  sim_cmd->add_option("--output", sim_output, "CSV report (default: standard output)");
  sim_cmd->add_option("--summary", sim_summary, "JSON summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[E_USAGE]: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::usage);
  }
  const int workers = resolve_threads(threads);

  if (*sel_cmd) {
    const SelectionConfig cfg = sel_flags.resolve();
    const Dataset ds = load_csv(sel_input, sel_data.schema());
    const SampleSummary summary = summarize(ds);
    const CellEstimates est = estimate(summary, cfg.effective_lambda());
    if (!sel_dump.empty()) write_text(sel_dump, estimates_to_json(est).dump(2) + "\n");
    CriterionEvaluator xi(est);
    const SelectionResult r = select_with(xi, ds.size(), cfg);
    if (!sel_output.empty()) {
      nlohmann::json j = selection_to_json(r);
      j["config"] = config_to_json(cfg);
      j["n"] = ds.size();
      write_text(sel_output, j.dump(2) + "\n");
    }
    std::cout << format_set(r.selected) << "\n";
    return 0;
  }

  if (*cls_cmd) {
    const SelectionConfig cfg = cls_flags.resolve();
    const Dataset train = load_csv(cls_train, cls_data.schema());
    CsvSchema test_schema = cls_data.schema();
    test_schema.q = train.q();
    const Dataset test = load_csv(cls_test, test_schema);
    const VariableSet K = cls_selected.empty() ? select_variables(train, cfg).selected
                                               : parse_selected(cls_selected, train.p());
    const ClassifierModel model = fit_classifier(train, K, ClassifierOptions{cfg.effective_lambda(), alpha_cost});
    std::ostringstream out;
    out << "row,cell,group,predicted\n";
    int correct = 0, undefined = 0;
    for (int i = 0; i < test.size(); ++i) {
      const CellIndex cell(test.cell(i) + 1);
      out << i + 1 << "," << cell.value() << "," << test[i].z << ",";
      try {
        const int g = model.classify(test[i].x, cell);
        out << g;
        correct += g == test[i].z;
      } catch (const UndefinedCell&) {
        out << "NA";
        ++undefined;
      }
      out << "\n";
    }
    write_text(cls_output, out.str());
    char cc[32];
    std::snprintf(cc, sizeof cc, "%.5f", static_cast<double>(correct) / test.size());
    std::cerr << "selected=" << format_set(K) << " cc=" << cc << " correct=" << correct << " n=" << test.size()
              << " undefined=" << undefined << "\n";
    return 0;
  }

  if (*tune_cmd) {
    SelectionConfig cfg = tune_flags.resolve();
    TuningGrid grid;
    grid.alphas = parse_grid("--grid-alpha", grid_alpha);
    grid.betas = parse_grid("--grid-beta", grid_beta);
    grid.lambdas = grid_lambda.empty() ? std::vector<double>{cfg.effective_lambda()} : parse_grid("--grid-lambda", grid_lambda);
    grid.validate();
    const Dataset ds = load_csv(tune_train, tune_data.schema());
    nlohmann::json summary{{"seed", *tune_seed}, {"n", ds.size()}};
    if (!grid_lambda.empty()) {
      const LambdaReport lr = tune_lambda(ds, grid.lambdas, cfg, alpha_cost, workers);
      std::ostringstream lt;
      lt << "lambda,cv,failures\n";
      for (const auto& e : lr.table)
        lt << detail::format_double(e.lambda) << "," << detail::format_double(e.cv) << "," << e.failures << "\n";
      if (!tune_lambda_output.empty()) write_text(tune_lambda_output, lt.str());
      cfg.lambda = lr.lambda_best;
      cfg.estimator = lr.lambda_best == 0.0 ? EstimatorKind::empirical : EstimatorKind::smoothed;
      summary["lambda_best"] = lr.lambda_best;
    }
    const CvReport r = loocv_alpha_beta(ds, grid.alphas, grid.betas, cfg, alpha_cost, workers);
    std::ostringstream out;
    out << "alpha,beta,cv,failures\n";
    for (const auto& e : r.cv_table)
      out << detail::format_double(e.alpha) << "," << detail::format_double(e.beta) << ","
          << detail::format_double(e.cv) << "," << e.failures << "\n";
    write_text(tune_output, out.str());
    summary["alpha_opt"] = r.alpha_opt;
    summary["beta_opt"] = r.beta_opt;
    summary["cv_opt"] = r.cv_opt;
    summary["lambda"] = r.lambda;
    summary["fold_failures"] = r.fold_failures;
    summary["config"] = config_to_json(cfg);
    if (!tune_summary.empty()) write_text(tune_summary, summary.dump(2) + "\n");
    std::cerr << "best alpha=" << detail::format_double(r.alpha_opt) << " beta=" << detail::format_double(r.beta_opt)
              << " cv=" << detail::format_double(r.cv_opt) << " lambda=" << detail::format_double(r.lambda) << "\n";
    return 0;
  }

  if (*sim_cmd) {
    if (scenario_name.empty() && scenario_file.empty()) throw UsageError("simulate needs --scenario or --scenario-file");
    Scenario sc = scenario_file.empty() ? named_scenario(scenario_name) : load_scenario(scenario_file);
    if (reps) {
      if (*reps < 1) throw UsageError("--reps must be >= 1");
      sc.base.replications = *reps;
    }
    sc.base.seed = *sim_seed;
    const ScenarioReport report = run_scenario(sc, workers);
    write_text(sim_output, report.csv);
    if (!sim_summary.empty()) write_text(sim_summary, report.summary.dump(2) + "\n");
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mixsel::Error& e) {
    std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error[E_INTERNAL]: " << e.what() << "\n";
    return 1;
  }
}
