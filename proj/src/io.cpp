#include <drc/io.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace drc::io {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string at_index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& need(const json& obj, const std::string& key, const std::string& path) {
  const json* j = find(obj, key);
  if (!j) throw ConfigError(join(path, key), "required field missing");
  return *j;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

long long as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<long long>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

// Runs f, turning library validation errors into configuration errors at `path`.
template <typename F>
auto validated(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

bool is_matrix_list(const json& j) {
  return j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array();
}

std::vector<Eigen::MatrixXd> parse_matrix_list(const json& j, const std::string& path, const fs::path& base,
                                               int count) {
  if (is_matrix_list(j)) {
    if (static_cast<int>(j.size()) != count) {
      throw ConfigError(path, "expected " + std::to_string(count) + " matrices");
    }
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t t = 0; t < j.size(); ++t) out.push_back(parse_matrix(j[t], at_index(path, t), base));
    return out;
  }
  return std::vector<Eigen::MatrixXd>(count, parse_matrix(j, path, base));
}

struct ParsedAmbiguity {
  Ambiguity amb;
  bool radius_given = false;
  bool jittered = false;
};

// Keys radius, M0, samples, jitter read from `obj` (shared by several commands).
ParsedAmbiguity parse_ambiguity_fields(const json& obj, const std::string& path, const fs::path& base,
                                       Eigen::Index dim) {
  ParsedAmbiguity out;
  const json* m0 = find(obj, "M0");
  const json* samples = find(obj, "samples");
  if ((m0 == nullptr) == (samples == nullptr)) {
    throw ConfigError(join(path, "M0"), "exactly one of M0 and samples is required");
  }
  Eigen::MatrixXd M0;
  if (m0) {
    M0 = parse_square(*m0, join(path, "M0"), base, dim);
  } else {
    const Eigen::MatrixXd w = parse_matrix(*samples, join(path, "samples"), base);
    if (w.cols() != dim) {
      throw ConfigError(join(path, "samples"), "each row must be a trajectory of length " + std::to_string(dim));
    }
    double jitter = 1e-8;
    if (const json* jj = find(obj, "jitter")) jitter = as_number(*jj, join(path, "jitter"));
    if (!(jitter > 0.0)) throw ConfigError(join(path, "jitter"), "must be positive");
    MomentEstimate est = empirical_second_moment(w.transpose(), jitter);
    M0 = std::move(est.M0);
    out.jittered = est.jittered;
  }
  double r = 0.0;
  if (const json* rj = find(obj, "radius")) {
    r = as_number(*rj, join(path, "radius"));
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError(join(path, "radius"), "must be finite and >= 0");
    out.radius_given = true;
  }
  out.amb = Ambiguity::from_moment(std::move(M0), r);
  validated(join(path, m0 ? "M0" : "samples"), [&] {
    out.amb.validate();
    return 0;
  });
  return out;
}

Gain load_controller(const json& j, const std::string& path, const fs::path& base) {
  fs::path file = as_string(j, path);
  if (file.is_relative()) file = base / file;
  json doc;
  try {
    doc = load_json_file(file);
  } catch (const ConfigError& e) {
    throw ConfigError(path, e.what());
  }
  return gain_from_json(doc, path);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json load_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string(), "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string(), std::string("invalid JSON: ") + e.what());
  }
}

json load_config(const fs::path& file) {
  json root = load_json_file(file);
  require_object(root, "");
  const long long v = as_int(need(root, "schema_version", ""), "schema_version");
  if (v != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(v) + " (expected " +
                                            std::to_string(kSchemaVersion) + ")");
  }
  return root;
}

void check_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& path) {
  require_object(obj, path);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == it.key();
    if (!ok) throw ConfigError(join(path, it.key()), "unknown key");
  }
}

Eigen::MatrixXd read_csv_matrix(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string(), "cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(file.string() + ":" + std::to_string(line_no), "not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError(file.string() + ":" + std::to_string(line_no), "ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw ConfigError(file.string(), "empty matrix");
  Eigen::MatrixXd a(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) a(i, j) = rows[i][j];
  return a;
}

std::string matrix_csv(const Eigen::MatrixXd& a) {
  std::string out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(a(i, j));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& path, const fs::path& base) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s.empty() || s[0] != '@') throw ConfigError(path, "expected a matrix or '@file.csv'");
    fs::path file = s.substr(1);
    if (file.is_relative()) file = base / file;
    try {
      return read_csv_matrix(file);
    } catch (const ConfigError& e) {
      throw ConfigError(path, e.what());
    }
  }
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected nested row arrays");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].empty()) throw ConfigError(at_index(path, i), "expected a row array");
    if (i == 0) cols = j[i].size();
    if (j[i].size() != cols) throw ConfigError(at_index(path, i), "ragged row");
  }
  Eigen::MatrixXd a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k) a(i, k) = as_number(j[i][k], at_index(at_index(path, i), k));
  return a;
}

Eigen::MatrixXd parse_square(const json& j, const std::string& path, const fs::path& base, Eigen::Index size) {
  if (j.is_string() && j.get<std::string>() == "identity") return Eigen::MatrixXd::Identity(size, size);
  if (j.is_number()) return j.get<double>() * Eigen::MatrixXd::Identity(size, size);
  Eigen::MatrixXd a = parse_matrix(j, path, base);
  if (a.rows() != size || a.cols() != size) {
    throw ConfigError(path, "expected a " + std::to_string(size) + "x" + std::to_string(size) + " matrix");
  }
  return a;
}

Eigen::VectorXd parse_vector(const json& j, const std::string& path, Eigen::Index size) {
  if (j.is_number()) return Eigen::VectorXd::Constant(size, j.get<double>());
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw ConfigError(path, "expected a number or an array of length " + std::to_string(size));
  }
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = as_number(j[i], at_index(path, i));
  return v;
}

std::vector<double> parse_grid(const json& j, const std::string& path) {
  if (j.is_object()) {
    check_keys(j, {"start", "stop", "count"}, path);
    const double lo = as_number(need(j, "start", path), join(path, "start"));
    const double hi = as_number(need(j, "stop", path), join(path, "stop"));
    const long long n = as_int(need(j, "count", path), join(path, "count"));
    if (n < 1) throw ConfigError(join(path, "count"), "must be >= 1");
    return uniform_grid(lo, hi, static_cast<int>(n));
  }
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected an array or {start, stop, count}");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], at_index(path, i)));
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(number(a(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

LtvSystem<double> parse_system(const json& j, const std::string& path, const fs::path& base) {
  check_keys(j, {"preset", "T", "A", "B"}, path);
  int T = 10;
  if (const json* tj = find(j, "T")) {
    const long long t = as_int(*tj, join(path, "T"));
    if (t < 1 || t > 10000) throw ConfigError(join(path, "T"), "must be between 1 and 10000");
    T = static_cast<int>(t);
  }
  if (const json* p = find(j, "preset")) {
    const std::string name = as_string(*p, join(path, "preset"));
    if (name != "random_walk") throw ConfigError(join(path, "preset"), "unknown preset '" + name + "'");
    if (find(j, "A") || find(j, "B")) throw ConfigError(join(path, "A"), "not allowed with a preset");
    return ExperimentConfig::random_walk(0.0, T).system;
  }
  need(j, "T", path);
  LtvSystem<double> sys;
  sys.T = T;
  sys.A = parse_matrix_list(need(j, "A", path), join(path, "A"), base, T);
  sys.B = parse_matrix_list(need(j, "B", path), join(path, "B"), base, T);
  sys.n = static_cast<int>(sys.A.front().rows());
  sys.m = static_cast<int>(sys.B.front().cols());
  validated(path, [&] {
    sys.validate();
    return 0;
  });
  return sys;
}

json system_to_json(const LtvSystem<double>& sys) {
  json a = json::array(), b = json::array();
  for (int t = 0; t < sys.T; ++t) {
    a.push_back(matrix_to_json(sys.A[t]));
    b.push_back(matrix_to_json(sys.B[t]));
  }
  return {{"T", sys.T}, {"A", a}, {"B", b}};
}

CostSpec<double> parse_cost(const json* j, const std::string& path, const fs::path& base, int state_dim,
                            int input_dim) {
  CostSpec<double> cost = CostSpec<double>::identity(state_dim, input_dim);
  if (j) {
    check_keys(*j, {"Q", "R"}, path);
    if (const json* q = find(*j, "Q")) cost.Q = parse_square(*q, join(path, "Q"), base, state_dim);
    if (const json* r = find(*j, "R")) cost.R = parse_square(*r, join(path, "R"), base, input_dim);
  }
  validated(path, [&] {
    cost.validate(state_dim, input_dim);
    return 0;
  });
  return cost;
}

json cost_to_json(const CostSpec<double>& cost) {
  return {{"Q", matrix_to_json(cost.Q)}, {"R", matrix_to_json(cost.R)}};
}

SolverOpts parse_solver(const json* j, const std::string& path) {
  SolverOpts opts;
  if (!j) return opts;
  check_keys(*j, {"max_iter", "tol_feas", "tol_gap", "verbosity"}, path);
  if (const json* v = find(*j, "max_iter")) {
    opts.max_iter = static_cast<int>(as_int(*v, join(path, "max_iter")));
    if (opts.max_iter < 1) throw ConfigError(join(path, "max_iter"), "must be >= 1");
  }
  if (const json* v = find(*j, "tol_feas")) opts.tol_feas = as_number(*v, join(path, "tol_feas"));
  if (const json* v = find(*j, "tol_gap")) opts.tol_gap = as_number(*v, join(path, "tol_gap"));
  if (const json* v = find(*j, "verbosity")) opts.verbosity = static_cast<int>(as_int(*v, join(path, "verbosity")));
  if (!(opts.tol_feas > 0.0)) throw ConfigError(join(path, "tol_feas"), "must be positive");
  if (!(opts.tol_gap > 0.0)) throw ConfigError(join(path, "tol_gap"), "must be positive");
  return opts;
}

json solver_to_json(const SolverOpts& opts) {
  return {{"max_iter", opts.max_iter}, {"tol_feas", opts.tol_feas}, {"tol_gap", opts.tol_gap},
          {"verbosity", opts.verbosity}};
}

json gain_to_json(const Gain& K) {
  return {{"n", K.n()}, {"m", K.m()}, {"T", K.T()}, {"K", matrix_to_json(K.matrix())}};
}

Gain gain_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  const int n = static_cast<int>(as_int(need(j, "n", path), join(path, "n")));
  const int m = static_cast<int>(as_int(need(j, "m", path), join(path, "m")));
  const int T = static_cast<int>(as_int(need(j, "T", path), join(path, "T")));
  const Eigen::MatrixXd k = parse_matrix(need(j, "K", path), join(path, "K"), fs::path());
  return validated(join(path, "K"), [&] { return Gain::from_matrix(n, m, T, k); });
}

SynthesizeConfig parse_synthesize_config(const json& root, const fs::path& base) {
  check_keys(root, {"schema_version", "method", "system", "cost", "ambiguity", "solver"}, "");
  SynthesizeConfig cfg;
  const std::string name = as_string(need(root, "method", ""), "method");
  cfg.method = validated("method", [&] { return method_from_string(name); });
  cfg.system = parse_system(need(root, "system", ""), "system", base);
  cfg.cost = parse_cost(find(root, "cost"), "cost", base, cfg.system.state_dim(), cfg.system.input_dim());
  const json& aj = need(root, "ambiguity", "");
  check_keys(aj, {"radius", "M0", "samples", "jitter"}, "ambiguity");
  ParsedAmbiguity pa = parse_ambiguity_fields(aj, "ambiguity", base, cfg.system.state_dim());
  if (!pa.radius_given && cfg.method != Method::CertaintyEquivalent) {
    throw ConfigError("ambiguity.radius", std::string("required field missing for method ") + to_string(cfg.method));
  }
  cfg.ambiguity = std::move(pa.amb);
  cfg.jittered = pa.jittered;
  cfg.solver = parse_solver(find(root, "solver"), "solver");
  return cfg;
}

WorstCaseConfig parse_worst_case_config(const json& root, const fs::path& base) {
  check_keys(root, {"schema_version", "radius", "M0", "samples", "jitter", "C", "controller", "system", "cost",
                    "objective"},
             "");
  WorstCaseConfig cfg;
  const json* c = find(root, "C");
  const json* ctrl = find(root, "controller");
  if ((c == nullptr) == (ctrl == nullptr)) throw ConfigError("C", "exactly one of C and controller is required");
  if (c) {
    for (const char* k : {"system", "cost", "objective"}) {
      if (find(root, k)) throw ConfigError(k, "only allowed together with controller");
    }
    cfg.C = parse_matrix(*c, "C", base);
    if (cfg.C.rows() != cfg.C.cols()) throw ConfigError("C", "must be square");
    if ((cfg.C - cfg.C.transpose()).norm() > tol::psd_rel * (1.0 + cfg.C.norm())) {
      throw ConfigError("C", "must be symmetric");
    }
  } else {
    const LtvSystem<double> sys = parse_system(need(root, "system", ""), "system", base);
    const CostSpec<double> cost = parse_cost(find(root, "cost"), "cost", base, sys.state_dim(), sys.input_dim());
    const Gain K = load_controller(*ctrl, "controller", base);
    if (K.n() != sys.n || K.m() != sys.m || K.T() != sys.T) {
      throw ConfigError("controller", "controller dimensions do not match the system");
    }
    std::string objective = "regret";
    if (const json* o = find(root, "objective")) objective = as_string(*o, "objective");
    if (objective != "regret" && objective != "cost") throw ConfigError("objective", "expected regret or cost");
    const Dynamics sd = validated("system", [&] { return assemble(sys, cost); });
    cfg.C = regret_matrix(K, sd);
    if (objective == "cost") cfg.C += sd.n_cost;
  }
  ParsedAmbiguity pa = parse_ambiguity_fields(root, "", base, cfg.C.rows());
  if (!pa.radius_given) throw ConfigError("radius", "required field missing");
  if (!(pa.amb.radius > 0.0)) throw ConfigError("radius", "must be positive");
  cfg.ambiguity = std::move(pa.amb);
  cfg.jittered = pa.jittered;
  return cfg;
}

ExampleConfig parse_example_config(const json& root, const fs::path&) {
  check_keys(root, {"schema_version", "c", "rho"}, "");
  ExampleConfig cfg;
  if (const json* c = find(root, "c")) cfg.c = as_number(*c, "c");
  cfg.rho = find(root, "rho") ? parse_grid(root["rho"], "rho") : uniform_grid(-1.0, 1.0, 21);
  validated("c", [&] {
    example::check_spec(cfg.c, 0.0);
    return 0;
  });
  for (std::size_t i = 0; i < cfg.rho.size(); ++i) {
    validated(at_index("rho", i), [&] {
      example::check_spec(cfg.c, cfg.rho[i]);
      return 0;
    });
  }
  return cfg;
}

namespace {

void parse_distribution(const json* j, const std::string& path, const fs::path& base, Eigen::Index dim,
                        Eigen::VectorXd& mu, Eigen::MatrixXd& Sigma) {
  mu = Eigen::VectorXd::Zero(dim);
  Sigma = Eigen::MatrixXd::Identity(dim, dim);
  if (!j) return;
  check_keys(*j, {"mean", "covariance"}, path);
  if (const json* m = find(*j, "mean")) mu = parse_vector(*m, join(path, "mean"), dim);
  if (const json* s = find(*j, "covariance")) Sigma = parse_square(*s, join(path, "covariance"), base, dim);
  if (!is_psd(Sigma)) throw ConfigError(join(path, "covariance"), "must be positive semidefinite");
}

}  // namespace

EvaluateConfig parse_evaluate_config(const json& root, const fs::path& base) {
  check_keys(root, {"schema_version", "controller", "system", "cost", "distribution"}, "");
  EvaluateConfig cfg;
  cfg.system = parse_system(need(root, "system", ""), "system", base);
  cfg.cost = parse_cost(find(root, "cost"), "cost", base, cfg.system.state_dim(), cfg.system.input_dim());
  cfg.K = load_controller(need(root, "controller", ""), "controller", base);
  if (cfg.K.n() != cfg.system.n || cfg.K.m() != cfg.system.m || cfg.K.T() != cfg.system.T) {
    throw ConfigError("controller", "controller dimensions do not match the system");
  }
  parse_distribution(find(root, "distribution"), "distribution", base, cfg.system.state_dim(), cfg.mu, cfg.Sigma);
  return cfg;
}

ExperimentConfig parse_experiment_config(const json& root, const fs::path& base) {
  check_keys(root, {"schema_version", "system", "cost", "distribution", "samples", "trials", "radii", "seed",
                    "jitter", "threads", "solver"},
             "");
  ExperimentConfig cfg = ExperimentConfig::random_walk();
  cfg.system = parse_system(need(root, "system", ""), "system", base);
  const int nx = cfg.system.state_dim();
  cfg.cost = parse_cost(find(root, "cost"), "cost", base, nx, cfg.system.input_dim());
  parse_distribution(find(root, "distribution"), "distribution", base, nx, cfg.mu, cfg.Sigma);
  if (const json* v = find(root, "samples")) cfg.samples = static_cast<int>(as_int(*v, "samples"));
  if (const json* v = find(root, "trials")) cfg.trials = static_cast<int>(as_int(*v, "trials"));
  if (const json* v = find(root, "radii")) cfg.radii = parse_grid(*v, "radii");
  if (const json* v = find(root, "seed")) {
    if (!v->is_number_integer() || v->get<long long>() < 0) throw ConfigError("seed", "expected a nonnegative integer");
    cfg.seed = v->get<std::uint64_t>();
  }
  if (const json* v = find(root, "jitter")) cfg.jitter = as_number(*v, "jitter");
  if (const json* v = find(root, "threads")) cfg.threads = static_cast<int>(as_int(*v, "threads"));
  cfg.solver = parse_solver(find(root, "solver"), "solver");
  validated("", [&] {
    cfg.validate();
    return 0;
  });
  return cfg;
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
  json radii = json::array();
  for (double r : cfg.radii) radii.push_back(r);
  return {{"schema_version", kSchemaVersion},
          {"system", system_to_json(cfg.system)},
          {"cost", cost_to_json(cfg.cost)},
          {"distribution", {{"mean", vector_to_json(cfg.mu)}, {"covariance", matrix_to_json(cfg.Sigma)}}},
          {"samples", cfg.samples},
          {"trials", cfg.trials},
          {"radii", radii},
          {"seed", cfg.seed},
          {"jitter", cfg.jitter},
          {"threads", cfg.threads},
          {"solver", solver_to_json(cfg.solver)}};
}

json synthesis_to_json(const SynthesisResult& res, double radius) {
  json residuals = json::array();
  for (const BlockResidual& r : res.residuals) {
    residuals.push_back({{"block", r.name},
                         {"min_eigenvalue", number(r.min_eigenvalue)},
                         {"violation", number(r.violation)},
                         {"strict", r.strict}});
  }
  json stats = json::object();
  for (const auto& [k, v] : res.solver_stats) stats[k] = number(v);
  json out = gain_to_json(res.K);
  out["schema_version"] = kSchemaVersion;
  out["method"] = to_string(res.method);
  out["radius"] = radius;
  out["gamma"] = number(res.gamma);
  out["objective"] = number(res.objective);
  out["status"] = to_string(res.status);
  out["k_star_causal"] = res.k_star_causal;
  out["residuals"] = residuals;
  out["solver_stats"] = stats;
  out["message"] = res.message;
  return out;
}

SynthesisResult synthesis_from_json(const json& j) {
  SynthesisResult res;
  res.K = gain_from_json(j, "");
  res.method = validated("method", [&] { return method_from_string(as_string(need(j, "method", ""), "method")); });
  res.gamma = number_or_nan(need(j, "gamma", ""));
  res.objective = number_or_nan(need(j, "objective", ""));
  const std::string status = as_string(need(j, "status", ""), "status");
  bool known = false;
  for (SolveStatus s : {SolveStatus::Optimal, SolveStatus::Inaccurate, SolveStatus::Infeasible, SolveStatus::Error}) {
    if (status == to_string(s)) {
      res.status = s;
      known = true;
    }
  }
  if (!known) throw ConfigError("status", "unknown status '" + status + "'");
  if (const json* k = find(j, "k_star_causal")) res.k_star_causal = k->get<bool>();
  if (const json* r = find(j, "residuals")) {
    for (const json& b : *r) {
      res.residuals.push_back({b.at("block").get<std::string>(), number_or_nan(b.at("min_eigenvalue")),
                               number_or_nan(b.at("violation")), b.at("strict").get<bool>()});
    }
  }
  if (const json* s = find(j, "solver_stats")) {
    for (auto it = s->begin(); it != s->end(); ++it) res.solver_stats[it.key()] = number_or_nan(it.value());
  }
  if (const json* m = find(j, "message")) res.message = m->get<std::string>();
  return res;
}

json worst_case_to_json(const DualResult<double>& res, const PushforwardMap<double>& map,
                        const WorstCaseMoments<double>& moments, const Ambiguity& amb) {
  const double r2 = amb.radius * amb.radius;
  const Eigen::MatrixXd cov_wc = moments.M - moments.mean * moments.mean.transpose();
  const Eigen::MatrixXd cov0 = amb.M0 - amb.mean0 * amb.mean0.transpose();
  const double bound = gelbrich_bound<double>(moments.mean, (cov_wc + cov_wc.transpose()) / 2.0, amb.mean0, cov0);
  return {{"schema_version", kSchemaVersion},
          {"value", number(res.value)},
          {"gamma_star", number(res.gamma_star)},
          {"residual16", number(res.residual16)},
          {"iterations", res.iterations},
          {"degenerate", res.degenerate},
          {"pushforward", {{"S", matrix_to_json(map.S)}}},
          {"worst_case_moments", {{"mean", vector_to_json(moments.mean)}, {"M", matrix_to_json(moments.M)}}},
          {"gelbrich_check",
           {{"bound", number(bound)},
            {"radius_squared", number(r2)},
            {"coupling_cost", number(coupling_cost(map, amb))},
            {"passed", bound <= r2 + 1e-9 * (1.0 + r2)}}}};
}

std::string figure1_json(const std::vector<example::Figure1Row>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    json r = {{"rho", row.rho}};
    for (std::size_t k = 0; k < example::kPolicies.size(); ++k) {
      r[example::to_string(example::kPolicies[k])] = number(row.cost[k]);
    }
    out.push_back(std::move(r));
  }
  return json{{"schema_version", kSchemaVersion}, {"rows", out}}.dump(2) + "\n";
}

json experiment_to_json(const ExperimentConfig& cfg, const ExperimentResult& res,
                        const std::vector<SummaryRow>& summary) {
  json config = experiment_config_to_json(cfg);
  json hashed = config;
  hashed.erase("threads");
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(hashed.dump())));

  json trials = json::array();
  json seeds = json::array();
  for (std::size_t t = 0; t < res.trials.size(); ++t) {
    trials.push_back({{"trial", t}, {"seed", res.trials[t].seed}, {"jittered", res.trials[t].jittered}});
    seeds.push_back(res.trials[t].seed);
  }
  json cells = json::array();
  for (const CellRecord& c : res.cells) {
    cells.push_back({{"trial", c.trial},
                     {"radius_index", c.radius_index},
                     {"radius", c.radius},
                     {"method", to_string(c.method)},
                     {"status", to_string(c.status)},
                     {"skipped", c.skipped},
                     {"objective", number(c.objective)},
                     {"worst_case_value", number(c.worst_case_value)},
                     {"gamma", number(c.gamma)},
                     {"expected_cost", number(c.expected_cost)},
                     {"message", c.message},
                     {"K", matrix_to_json(c.K.matrix())}});
  }
  json rows = json::array();
  for (const SummaryRow& r : summary) {
    rows.push_back({{"radius", r.radius},
                    {"method", to_string(r.method)},
                    {"mean", number(r.mean)},
                    {"q20", number(r.q20)},
                    {"q80", number(r.q80)},
                    {"count", r.count},
                    {"skipped", r.skipped}});
  }
  return {{"schema_version", kSchemaVersion},
          {"metadata",
           {{"tool", "drc"},
            {"version", kToolVersion},
            {"config_hash", hash},
            {"seed", cfg.seed},
            {"trial_seeds", seeds},
            {"quantile_rule", kQuantileRule},
            {"skipped_cells", res.skipped},
            {"inaccurate_cells", res.inaccurate}}},
          {"config", config},
          {"cost_floor", number(res.cost_floor)},
          {"trials", trials},
          {"cells", cells},
          {"summary", rows}};
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "radius,method,mean,q20,q80\n";
  for (const SummaryRow& r : rows) {
    out += format_double(r.radius) + ',' + to_string(r.method) + ',' + format_double(r.mean) + ',' +
           format_double(r.q20) + ',' + format_double(r.q80) + '\n';
  }
  return out;
}

}  // namespace drc::io
