#include <drc/bench_example.hpp>

#include <drc/io.hpp>
#include <drc/types.hpp>

#include <cmath>
#include <sstream>

namespace drc::example {

const char* to_string(Policy policy) {
  switch (policy) {
    case Policy::Noncausal: return "noncausal";
    case Policy::Causal: return "causal";
    case Policy::Mro: return "mro";
    case Policy::Dro: return "dro";
  }
  return "unknown";
}

void check_spec(double c, double rho) {
  if (!(c >= 1.0) || !std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "c must be >= 1");
  if (!(std::abs(rho) <= 1.0)) throw Error(ErrorCode::InvalidArgument, "rho must lie in [-1, 1]");
}

PolicyGain policy_gain(Policy policy, double c, double rho) {
  check_spec(c, rho);
  switch (policy) {
    case Policy::Noncausal: return {1.0 / (1.0 + c), 1.0 / (1.0 + c)};
    case Policy::Causal: return {(1.0 + rho) / (1.0 + c), 0.0};
    case Policy::Mro: return {1.0 / (1.0 + c), 0.0};
    case Policy::Dro: return {2.0 / (1.0 + c), 0.0};
  }
  return {};
}

double noncausal_cost(double c, double rho) { return 2.0 * c * (1.0 + rho) / (1.0 + c); }

double expected_cost(Policy policy, double c, double rho) {
  check_spec(c, rho);
  const double j_star = noncausal_cost(c, rho);
  switch (policy) {
    case Policy::Noncausal: return j_star;
    case Policy::Causal: return j_star + (1.0 - rho * rho) / (1.0 + c);
    case Policy::Mro: return j_star + 1.0 / (1.0 + c);
    case Policy::Dro: return j_star + 2.0 * (1.0 - rho) / (1.0 + c);
  }
  return j_star;
}

double expected_cost_general(double k, double c, double rho) {
  const double a = 1.0 - k;
  return a * a + 2.0 * a * rho + 1.0 + c * k * k;
}

std::vector<Figure1Row> figure1_data(double c, const std::vector<double>& rho_grid) {
  std::vector<Figure1Row> rows;
  rows.reserve(rho_grid.size());
  for (double rho : rho_grid) {
    Figure1Row row{rho, {}};
    for (std::size_t i = 0; i < kPolicies.size(); ++i) row.cost[i] = expected_cost(kPolicies[i], c, rho);
    rows.push_back(row);
  }
  return rows;
}

std::string figure1_csv(const std::vector<Figure1Row>& rows) {
  std::ostringstream os;
  os << "rho,noncausal,causal,mro,dro\n";
  for (const auto& row : rows) {
    os << io::format_double(row.rho);
    for (double v : row.cost) os << ',' << io::format_double(v);
    os << '\n';
  }
  return os.str();
}

}  // namespace drc::example
