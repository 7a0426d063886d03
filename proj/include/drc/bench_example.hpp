#pragma once

// Closed forms for the scalar one-period system x_1 = x_0 + u_0 + w_0 with cost
// x_1^2 + c u_0^2, unit-variance zero-mean x_0 and w_0 of unknown correlation rho.
// Causal policies are u_0 = -k x_0.

#include <array>
#include <string>
#include <vector>

namespace drc::example {

enum class Policy { Noncausal, Causal, Mro, Dro };

inline constexpr std::array<Policy, 4> kPolicies = {Policy::Noncausal, Policy::Causal, Policy::Mro,
                                                    Policy::Dro};

const char* to_string(Policy policy);

/// u_0 = -(x0_gain x_0 + w0_gain w_0); w0_gain is nonzero only for the noncausal policy.
struct PolicyGain {
  double x0_gain = 0.0;
  double w0_gain = 0.0;
};

/// Throws InvalidArgument unless c >= 1 and |rho| <= 1.
void check_spec(double c, double rho);

PolicyGain policy_gain(Policy policy, double c, double rho = 0.0);

/// Expected cost of the optimal noncausal controller, 2c(1 + rho)/(1 + c).
double noncausal_cost(double c, double rho);

double expected_cost(Policy policy, double c, double rho);

/// E[(x_0 + u_0 + w_0)^2 + c u_0^2] for u_0 = -k x_0.
double expected_cost_general(double k, double c, double rho);

struct Figure1Row {
  double rho;
  std::array<double, 4> cost;  // indexed like kPolicies
};

std::vector<Figure1Row> figure1_data(double c, const std::vector<double>& rho_grid);

/// CSV with header rho,noncausal,causal,mro,dro.
std::string figure1_csv(const std::vector<Figure1Row>& rows);

}  // namespace drc::example
