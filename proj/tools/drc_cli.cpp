// drc: distributionally robust LQ controller synthesis from the command line.
//
// Exit codes: 0 success, 1 solver or computation error, 2 inaccurate solution or skipped
// experiment cells, 64 configuration error. Results go to stdout or --out; logs go to stderr.

#include <drc/io.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using drc::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;
constexpr int kExitConfig = 64;

struct Options {
  std::string config;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void write_output(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

fs::path base_dir(const std::string& config) { return fs::absolute(config).parent_path(); }

std::string format_or(const Options& opt, const char* fallback) {
  return opt.format.empty() ? fallback : opt.format;
}

int exit_for(drc::SolveStatus status) {
  switch (status) {
    case drc::SolveStatus::Optimal: return kExitOk;
    case drc::SolveStatus::Inaccurate: return kExitPartial;
    default: return kExitError;
  }
}

int cmd_synthesize(const Options& opt) {
  const json root = drc::io::load_config(opt.config);
  const drc::io::SynthesizeConfig cfg = drc::io::parse_synthesize_config(root, base_dir(opt.config));
  if (cfg.jittered) std::cerr << "note: empirical M0 was singular; jitter added\n";
  const drc::Dynamics sd = drc::assemble(cfg.system, cfg.cost);
  const drc::SynthesisResult res = drc::synthesize(cfg.method, sd, cfg.ambiguity, cfg.solver);
  std::cerr << "synthesize: method " << drc::to_string(res.method) << ", status " << drc::to_string(res.status)
            << ", objective " << drc::io::format_double(res.objective) << "\n";
  if (!res.message.empty()) std::cerr << "  " << res.message << "\n";
  if (res.status == drc::SolveStatus::Error || res.status == drc::SolveStatus::Infeasible) {
    for (const auto& [k, v] : res.solver_stats) std::cerr << "  " << k << " = " << v << "\n";
    return kExitError;
  }
  if (format_or(opt, "json") == "csv") {
    write_output(drc::io::matrix_csv(res.K.matrix()), opt.out);
  } else {
    write_output(dump(drc::io::synthesis_to_json(res, cfg.ambiguity.radius)), opt.out);
  }
  return exit_for(res.status);
}

int cmd_worst_case(const Options& opt) {
  const json root = drc::io::load_config(opt.config);
  const drc::io::WorstCaseConfig cfg = drc::io::parse_worst_case_config(root, base_dir(opt.config));
  if (cfg.jittered) std::cerr << "note: empirical M0 was singular; jitter added\n";
  const auto res = drc::worst_case_expectation<double>(cfg.C, cfg.ambiguity);
  const auto map = drc::worst_case_pushforward<double>(res, cfg.C);
  const auto moments = drc::worst_case_moments<double>(map, cfg.ambiguity);
  const json report = drc::io::worst_case_to_json(res, map, moments, cfg.ambiguity);
  std::cerr << "worst-case: value " << drc::io::format_double(res.value) << ", gamma* "
            << drc::io::format_double(res.gamma_star) << "\n";
  if (format_or(opt, "json") == "csv") {
    write_output("value,gamma_star,residual16\n" + drc::io::format_double(res.value) + "," +
                     drc::io::format_double(res.gamma_star) + "," + drc::io::format_double(res.residual16) + "\n",
                 opt.out);
  } else {
    write_output(dump(report), opt.out);
  }
  return kExitOk;
}

int cmd_example(const Options& opt) {
  drc::io::ExampleConfig cfg;
  cfg.rho = drc::uniform_grid(-1.0, 1.0, 21);
  if (!opt.config.empty()) {
    cfg = drc::io::parse_example_config(drc::io::load_config(opt.config), base_dir(opt.config));
  }
  const auto rows = drc::example::figure1_data(cfg.c, cfg.rho);
  write_output(format_or(opt, "csv") == "csv" ? drc::example::figure1_csv(rows) : drc::io::figure1_json(rows),
               opt.out);
  return kExitOk;
}

int cmd_experiment(const Options& opt) {
  drc::ExperimentConfig cfg = drc::io::parse_experiment_config(drc::io::load_config(opt.config),
                                                               base_dir(opt.config));
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.threads) {
    if (*opt.threads < 1) throw drc::io::ConfigError("--threads", "must be >= 1");
    cfg.threads = *opt.threads;
  }
  std::cerr << "experiment: " << cfg.trials << " trials x " << cfg.radii.size() << " radii x 2 methods, seed "
            << cfg.seed << ", " << cfg.threads << " thread(s)\n";
  const drc::ExperimentResult res = drc::run_radius_sweep(cfg);
  const auto summary = drc::summarize(res);
  std::cerr << "experiment: " << res.cells.size() << " cells, " << res.skipped << " skipped, " << res.inaccurate
            << " inaccurate\n";

  const std::string csv = drc::io::summary_csv(summary);
  const std::string js = dump(drc::io::experiment_to_json(cfg, res, summary));
  const bool as_csv = format_or(opt, "json") == "csv";
  write_output(as_csv ? csv : js, opt.out);
  if (!opt.out.empty()) {
    fs::path sibling = opt.out;
    sibling.replace_extension(as_csv ? ".json" : ".csv");
    if (sibling != fs::path(opt.out)) {
      write_output(as_csv ? js : csv, sibling.string());
      std::cerr << "experiment: also wrote " << sibling.string() << "\n";
    }
  }
  return res.skipped > 0 ? kExitPartial : kExitOk;
}

int cmd_evaluate(const Options& opt) {
  const drc::io::EvaluateConfig cfg =
      drc::io::parse_evaluate_config(drc::io::load_config(opt.config), base_dir(opt.config));
  const drc::Dynamics sd = drc::assemble(cfg.system, cfg.cost);
  const Eigen::MatrixXd second = cfg.Sigma + cfg.mu * cfg.mu.transpose();
  const double cost = drc::exact_expected_cost(cfg.K, sd, cfg.mu, cfg.Sigma);
  const double floor = (sd.n_cost * second).trace();
  if (format_or(opt, "json") == "csv") {
    write_output("expected_cost,expected_regret,noncausal_cost\n" + drc::io::format_double(cost) + "," +
                     drc::io::format_double(cost - floor) + "," + drc::io::format_double(floor) + "\n",
                 opt.out);
  } else {
    write_output(dump({{"schema_version", drc::io::kSchemaVersion},
                       {"expected_cost", cost},
                       {"expected_regret", cost - floor},
                       {"noncausal_cost", floor}}),
                 opt.out);
  }
  return kExitOk;
}

bool is_config_error(drc::ErrorCode code) {
  switch (code) {
    case drc::ErrorCode::DimensionMismatch:
    case drc::ErrorCode::InvalidArgument:
    case drc::ErrorCode::NotPSD:
    case drc::ErrorCode::StructureViolation: return true;
    default: return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust and minimax-regret LQ controller synthesis"};
  app.set_version_flag("--version", std::string(drc::kToolVersion));
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed = 0;
  int threads = 1;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", opt.config, "JSON configuration file")->check(CLI::ExistingFile);
    if (config_required) c->required();
    sub->add_option("--out", opt.out, "Output file (default stdout)");
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  };

  auto* synth = app.add_subcommand("synthesize", "Synthesize a CE, MRO or DRO controller");
  add_common(synth, true);
  auto* wc = app.add_subcommand("worst-case", "Worst-case expectation over a Wasserstein ball");
  add_common(wc, true);
  auto* ex = app.add_subcommand("example", "Closed-form scalar example costs versus correlation");
  add_common(ex, false);
  auto* expt = app.add_subcommand("experiment", "Data-driven radius sweep over random trials");
  add_common(expt, true);
  auto* seed_opt = expt->add_option("--seed", seed, "Master seed (overrides the config)");
  auto* threads_opt = expt->add_option("--threads", threads, "Worker threads (overrides the config)");
  auto* eval = app.add_subcommand("evaluate", "Exact expected cost of a controller file");
  add_common(eval, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (seed_opt->count() > 0) opt.seed = seed;
  if (threads_opt->count() > 0) opt.threads = threads;

  try {
    if (synth->parsed()) return cmd_synthesize(opt);
    if (wc->parsed()) return cmd_worst_case(opt);
    if (ex->parsed()) return cmd_example(opt);
    if (expt->parsed()) return cmd_experiment(opt);
    if (eval->parsed()) return cmd_evaluate(opt);
  } catch (const drc::io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const drc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_config_error(e.code()) ? kExitConfig : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
