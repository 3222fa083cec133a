// coke: simulate, fit, predict, diagnose.
#include "coke/diagnostics.hpp"
#include "coke/io.hpp"
#include "coke/run_config.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr const char* kVersionHeader = "coke 1.0.0";

enum ExitCode { kOk = 0, kFailure = 1, kInputError = 2, kDegenerate = 3, kNumerical = 4 };

int exit_code_for(coke::ErrorKind kind) {
  switch (kind) {
    case coke::ErrorKind::kInvalidInput:
    case coke::ErrorKind::kUnsupported: return kInputError;
    case coke::ErrorKind::kEmptyArm:
    case coke::ErrorKind::kUndefined: return kDegenerate;
    case coke::ErrorKind::kNumericalFailure: return kNumerical;
  }
  return kFailure;
}

// Writes to a temporary sibling and renames, so failed runs leave no output.
void write_file(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) coke::fail(coke::ErrorKind::kInvalidInput, "cannot write '" + path + "'");
    out << contents;
    if (!out) coke::fail(coke::ErrorKind::kInvalidInput, "error writing '" + path + "'");
  }
  std::filesystem::rename(tmp, path);
}

coke::io::Config config_or_empty(const std::string& path) {
  if (path.empty()) {
    std::istringstream empty;
    return coke::io::Config::parse(empty, "<defaults>", coke::io::known_config_keys());
  }
  return coke::io::load_config(path);
}

coke::LabeledDataset read_labeled(const std::string& path) {
  return coke::io::labeled_from(coke::io::read_csv_file(path), path);
}

coke::UnlabeledDataset read_unlabeled(const std::string& path) {
  return coke::io::unlabeled_from(coke::io::read_csv_file(path), path);
}

void require_same_dim(const coke::LabeledDataset& s, const coke::UnlabeledDataset& t) {
  if (s.dim() != t.dim())
    coke::fail(coke::ErrorKind::kInvalidInput, "source has p = " + std::to_string(s.dim()) + " but target has p = " +
                                                   std::to_string(t.dim()));
}

using coke::io::format_double;

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

int cmd_simulate(const SimulateArgs& args) {
  const auto cfg = coke::io::load_config(args.config);
  auto settings = coke::io::simulate_from(cfg);
  if (args.seed) settings.spec.base.seed = *args.seed;
  settings.spec.threads = args.threads;
  const auto rows = coke::sim::sweep(settings.spec);

  std::ostringstream csv;
  csv << "knob,value,method,rep,mse,runtime_ms,status\n";
  bool any_failed = false;
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& ch : status)
      if (ch == ',' || ch == '\n') ch = ';';
    any_failed = any_failed || r.status != "ok";
    csv << coke::sim::to_string(r.knob) << ',' << format_double(r.value) << ',' << coke::sim::to_string(r.method)
        << ',' << r.rep << ',' << format_double(r.mse) << ',' << format_double(settings.timing ? r.runtime_ms : 0.0)
        << ',' << status << '\n';
  }
  write_file(args.out, csv.str());
  if (any_failed) {
    std::cerr << "coke simulate: one or more cells failed; see the status column\n";
    return kDegenerate;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string source;
  std::string target;
  std::string config;
  std::string out;
  std::string report;
  std::string method;
  std::optional<std::uint64_t> seed;
};

void report_selection(std::ostream& out, const std::string& method, const std::string& leg, coke::Index n1,
                      coke::Index n2, double lambda0, const std::vector<double>& grid,
                      const coke::SelectionReport& report) {
  for (std::size_t k = 0; k < grid.size(); ++k)
    out << method << ',' << leg << ',' << n1 << ',' << n2 << ',' << format_double(lambda0) << ',' << k << ','
        << format_double(grid[k]) << ',' << format_double(report.losses[k]) << ','
        << (k == report.chosen_index ? 1 : 0) << '\n';
}

int cmd_fit(const FitArgs& args) {
  const auto cfg = config_or_empty(args.config);
  const auto source = read_labeled(args.source);
  const auto target = read_unlabeled(args.target);
  require_same_dim(source, target);

  const std::string method = !args.method.empty() ? args.method : cfg.get_string("method", "coke");
  coke::sim::MethodSettings settings = coke::io::method_settings_from(cfg, false);
  if (args.seed) settings.coke.split_seed = *args.seed;
  const std::uint64_t seed = settings.coke.split_seed;
  const coke::Index n = source.size();

  std::ostringstream report;
  report << "method,leg,n1,n2,lambda0,candidate,lambda1,loss,chosen\n";
  std::optional<coke::CateModel> model;
  if (method == "coke") {
    if (settings.coke.crossfit) {
      auto res = coke::run_crossfit(source, target, settings.coke);
      for (std::size_t leg = 0; leg < 2; ++leg) {
        const auto& r = res.legs[leg];
        report_selection(report, method, leg == 0 ? "D1" : "D2", r.n1, r.n2, r.report.lambda_chosen->lambda00,
                         r.grid, r.report);
      }
      model = res.model;
    } else {
      auto res = coke::run(source, target, settings.coke);
      report_selection(report, method, "D1", res.n1, res.n2, res.report.lambda_chosen->lambda00, res.grid,
                       res.report);
      model = res.model;
    }
  } else if (method == "sr") {
    const auto grid = coke::build_grid(settings.coke, n);
    const double xi =
        settings.coke.imputation.rule == coke::LambdaRule::kTheory ? settings.kernel.sup_bound() : 0.0;
    const double lambda_tilde = settings.coke.imputation.resolve(n, xi);
    auto res = coke::sr_pseudo_label(settings.kernel, source, target, grid, lambda_tilde, seed);
    const coke::Index n1 = (n + 1) / 2;
    report_selection(report, method, "arm0", n1, n - n1, lambda_tilde, grid, res.control);
    report_selection(report, method, "arm1", n1, n - n1, lambda_tilde, grid, res.treated);
    model = res.model;
  } else if (method == "dr" || method == "acw") {
    const auto m = coke::sim::parse_method(method);
    model = coke::sim::fit_method(m, source, target, settings, seed);
    const coke::Index n1 = (n + 1) / 2;
    report << method << ",all," << n1 << ',' << n - n1 << ",,,,,\n";
  } else {
    coke::fail(coke::ErrorKind::kInvalidInput, "unknown method '" + method + "' (expected coke, sr, dr, or acw)");
  }

  std::ostringstream model_text;
  coke::io::write_model(model_text, *model, kVersionHeader);
  write_file(args.out, model_text.str());
  write_file(args.report.empty() ? args.out + ".report.csv" : args.report, report.str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string input;
  std::string out;
};

int cmd_predict(const PredictArgs& args) {
  const auto model = coke::io::read_model_file(args.model);
  const auto input = read_unlabeled(args.input);
  if (input.dim() != model.dim())
    coke::fail(coke::ErrorKind::kInvalidInput, "model expects p = " + std::to_string(model.dim()) +
                                                   " but input has p = " + std::to_string(input.dim()));
  const coke::Vector h = model.predict(input.z);
  std::ostringstream csv;
  csv << "cate\n";
  for (coke::Index i = 0; i < h.size(); ++i) csv << format_double(h(i)) << '\n';
  write_file(args.out, csv.str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  std::string source;
  std::string target;
  std::string labeled_target;
  std::vector<std::string> models;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

double mean(const coke::Vector& v) { return v.size() ? v.mean() : std::nan(""); }

int cmd_diagnose(const DiagnoseArgs& args) {
  const auto cfg = config_or_empty(args.config);
  const auto source = read_labeled(args.source);
  const auto target = read_unlabeled(args.target);
  require_same_dim(source, target);

  std::vector<std::pair<std::string, coke::CateModel>> models;
  for (const auto& spec : args.models) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
      coke::fail(coke::ErrorKind::kInvalidInput, "--model expects name=path, got '" + spec + "'");
    models.emplace_back(spec.substr(0, eq), coke::io::read_model_file(spec.substr(eq + 1)));
  }
  std::optional<coke::LabeledDataset> labeled;
  if (!args.labeled_target.empty()) {
    labeled = read_labeled(args.labeled_target);
    if (labeled->dim() != source.dim())
      coke::fail(coke::ErrorKind::kInvalidInput, "labeled target has a different covariate dimension");
  }

  // Methods listed in the config are fitted on (source, target).
  coke::sim::MethodSettings settings = coke::io::method_settings_from(cfg, false);
  if (args.seed) settings.coke.split_seed = *args.seed;
  for (const auto& name : cfg.get_list("diagnose.methods")) {
    const auto m = coke::sim::parse_method(name);
    models.emplace_back(name, coke::sim::fit_method(m, source, target, settings, settings.coke.split_seed));
  }
  for (const auto& [name, model] : models)
    if (model.dim() != source.dim())
      coke::fail(coke::ErrorKind::kInvalidInput, "model '" + name + "' has a different covariate dimension");

  const auto diag = coke::density_ratio_diag(source.z, target.z);
  const coke::Vector source_weights = diag.model.ratio(source.z);

  std::ostringstream log_ratio;
  log_ratio << "sample,log10_ratio\n";
  for (coke::Index i = 0; i < diag.source_log10_ratio.size(); ++i)
    log_ratio << "source," << format_double(diag.source_log10_ratio(i)) << '\n';
  for (coke::Index i = 0; i < diag.target_log10_ratio.size(); ++i)
    log_ratio << "target," << format_double(diag.target_log10_ratio(i)) << '\n';

  const auto& info = diag.model.logistic().info();
  std::ostringstream summary;
  summary << "key,value\n"
          << "n_source," << source.size() << '\n'
          << "n_target," << target.size() << '\n'
          << "source_mean_log10_ratio," << format_double(mean(diag.source_log10_ratio)) << '\n'
          << "target_mean_log10_ratio," << format_double(mean(diag.target_log10_ratio)) << '\n'
          << "source_ess," << format_double(coke::effective_sample_size(source_weights)) << '\n'
          << "classifier_converged," << (info.converged ? 1 : 0) << '\n'
          << "classifier_separated," << (info.separated ? 1 : 0) << '\n';

  std::ostringstream scores_csv;
  std::ostringstream corr_csv;
  if (labeled) {
    const auto glr = coke::fit_glr_nuisances(*labeled);
    const auto score = coke::efficient_score(*labeled, glr.propensity, glr.f0, glr.f1, settings.benchmark.propensity_clip);
    std::vector<coke::Vector> preds;
    for (const auto& m : models) preds.push_back(m.second.predict(labeled->z));
    scores_csv << "row,score";
    for (const auto& m : models) scores_csv << ',' << m.first;
    scores_csv << '\n';
    for (coke::Index i = 0; i < labeled->size(); ++i) {
      scores_csv << i << ',' << format_double(score.scores(i));
      for (const auto& p : preds) scores_csv << ',' << format_double(p(i));
      scores_csv << '\n';
    }
    corr_csv << "method,spearman,pearson,n\n";
    for (std::size_t k = 0; k < models.size(); ++k) {
      auto corr = [&](auto&& f) {
        try {
          return format_double(f(score.scores, preds[k]));
        } catch (const coke::Error& e) {
          if (e.kind() != coke::ErrorKind::kUndefined) throw;
          return std::string("nan");
        }
      };
      corr_csv << models[k].first << ',' << corr(coke::spearman) << ',' << corr(coke::pearson) << ','
               << labeled->size() << '\n';
    }
    summary << "labeled_target_n," << labeled->size() << '\n'
            << "score_mean," << format_double(score.scores.mean()) << '\n';
  } else if (!models.empty()) {
    std::cerr << "coke diagnose: models were given without --labeled-target; correlations skipped\n";
  }

  std::filesystem::create_directories(args.out);
  const std::filesystem::path dir(args.out);
  write_file((dir / "log_ratio.csv").string(), log_ratio.str());
  write_file((dir / "summary.csv").string(), summary.str());
  if (labeled) {
    write_file((dir / "scores.csv").string(), scores_csv.str());
    write_file((dir / "correlations.csv").string(), corr_csv.str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer learning of conditional average treatment effects with kernel ridge regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersionHeader);

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Run a simulation sweep and write a results CSV");
  sim->add_option("--config", sim_args.config, "Config file")->required();
  sim->add_option("--out", sim_args.out, "Results CSV")->required();
  sim->add_option("--seed", sim_args.seed, "Master seed (overrides config)");
  sim->add_option("--threads", sim_args.threads, "Worker threads")->check(CLI::PositiveNumber);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a CATE model on source data for a target population");
  fit->add_option("--source", fit_args.source, "Labeled source CSV (z1..zp,a,y)")->required();
  fit->add_option("--target", fit_args.target, "Target covariate CSV (z1..zp)")->required();
  fit->add_option("--config", fit_args.config, "Config file");
  fit->add_option("--out", fit_args.out, "Model file")->required();
  fit->add_option("--report", fit_args.report, "Selection report CSV (default: <out>.report.csv)");
  fit->add_option("--method", fit_args.method, "coke, sr, dr, or acw");
  fit->add_option("--seed", fit_args.seed, "Split seed (overrides config)");

  PredictArgs pred_args;
  auto* pred = app.add_subcommand("predict", "Apply a model file to covariates");
  pred->add_option("--model", pred_args.model, "Model file")->required();
  pred->add_option("--input", pred_args.input, "Covariate CSV (z1..zp)")->required();
  pred->add_option("--out", pred_args.out, "Prediction CSV")->required();

  DiagnoseArgs diag_args;
  auto* diag = app.add_subcommand("diagnose", "Covariate-shift diagnostics and efficient-score validation");
  diag->add_option("--source", diag_args.source, "Labeled source CSV")->required();
  diag->add_option("--target", diag_args.target, "Target covariate CSV")->required();
  diag->add_option("--labeled-target", diag_args.labeled_target, "Labeled target CSV for validation");
  diag->add_option("--model", diag_args.models, "name=path of a model file to validate");
  diag->add_option("--config", diag_args.config, "Config file");
  diag->add_option("--seed", diag_args.seed, "Seed for methods fitted from the config");
  diag->add_option("--out", diag_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*sim) return cmd_simulate(sim_args);
    if (*fit) return cmd_fit(fit_args);
    if (*pred) return cmd_predict(pred_args);
    if (*diag) return cmd_diagnose(diag_args);
  } catch (const coke::Error& e) {
    std::cerr << "coke: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "coke: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
