#ifndef GSF_LEGENDRE_HPP
#define GSF_LEGENDRE_HPP

#include <map>

#include "gsf/model.hpp"
#include "gsf/tensor.hpp"

namespace gsf {
namespace legendre {

/// The fiber derivative p_i -> dL/dv_i as a substitution map.
struct PullbackMap {
  std::map<Symbol, Expression> assignments;
  static PullbackMap from_model(const ModelSpec& spec);
};

/// FL*: substitute every momentum by its image. `e` must be velocity-free.
Expression pullback(const Expression& e, const PullbackMap& pm);

/// R_mu^i = FL*(dG_mu/dp_i).
IndexedExpr gauge_generators(const ModelSpec& spec, const PullbackMap& pm);

/// max |FL* Hc - (v.dL/dv - L)| over the points.
double check_hc(const ModelSpec& spec, const PullbackMap& pm,
                const std::vector<SamplePoint>& points);

struct MultiplierReport {
  std::vector<std::vector<double>> lambdas;  // per point, size m
  double max_fit_residual = 0.0;             // |R^T lambda - rhs|
  double max_dq_residual = 0.0;              // gradient-compatibility residual
  double max_bracket_residual = 0.0;         // FL*{Hc,G} + R.alpha + R B R lambda
};

/// Solve R_mu^i lambda^mu = v^i - FL*(dHc/dp_i) by least squares at each
/// point. Throws GeneratorRank when R drops rank at a point.
MultiplierReport multipliers(const ModelSpec& spec, const PullbackMap& pm,
                             const std::vector<SamplePoint>& points);

struct TransportResiduals {
  double dRdv = 0.0;       // dR/dv vs W . FL*(d2G/dpdp)
  double dRdq = 0.0;       // dR/dq vs FL*(d2G/dqdp) + d2L/dqdv . FL*(d2G/dpdp)
  double dTdq = 0.0;       // dT/dq vs FL*(dC/dq) + d2L/dqdv . FL*(dC/dp)
  double dTdv = 0.0;       // dT/dv vs W . FL*(dC/dp)
  double rdot = 0.0;       // dR/dt decomposition with random accelerations
};

/// Derivative-transport identities relating velocity-space derivatives of the
/// pulled-back tensors to phase-space derivatives of the constraints.
TransportResiduals transport_checks(const ModelSpec& spec, const PullbackMap& pm,
                                    const std::vector<SamplePoint>& points);

}  // namespace legendre
}  // namespace gsf

#endif
