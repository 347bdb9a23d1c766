#ifndef GSF_HAMILTON_HPP
#define GSF_HAMILTON_HPP

#include "gsf/legendre.hpp"
#include "gsf/model.hpp"
#include "gsf/tensor.hpp"

namespace gsf {
namespace hamilton {

/// {f, g} = sum_i (df/dq_i dg/dp_i - df/dp_i dg/dq_i).
Expression poisson_bracket(const ModelSpec& spec, const Expression& f, const Expression& g);

/// Antisymmetric table of {G_mu, G_nu}; only mu < nu stored.
struct BracketTable {
  int m = 0;
  std::vector<Expression> upper;  // index over mu < nu
  Expression at(int mu, int nu) const;
};
BracketTable constraint_brackets(const ModelSpec& spec);

struct FirstClassResiduals {
  double pulled_gg = 0.0;       // max |FL*{G,G}|
  double pulled_hg = 0.0;       // max |FL*{Hc,G}|
  double closure_on = 0.0;      // |{G,G} - C.G| at pulled-back momenta
  double closure_off = 0.0;     // same at off-surface (q,p) points
};

FirstClassResiduals first_class_check(const ModelSpec& spec, const legendre::PullbackMap& pm,
                                      const std::vector<SamplePoint>& points,
                                      const std::vector<PhasePoint>& off_points);

struct JacobiResiduals {
  double double_bracket = 0.0;  // cyclic {{G,G},G} at off-surface points
  double pulled_second_order = 0.0;  // pulled cyclic {C,G} - CC combination
};

JacobiResiduals jacobi_checks(const ModelSpec& spec, const legendre::PullbackMap& pm,
                              const std::vector<SamplePoint>& points,
                              const std::vector<PhasePoint>& off_points);

/// Change of constraint basis G' = Lambda G. The new structure functions are
/// computed symbolically so that {G'_mu, G'_nu} = C'_mun'u^gamma G'_gamma
/// holds identically, then antisymmetrized in (mu, nu). Lambda must be
/// numerically invertible at the sample points (|det| > 1e-6).
ModelSpec rebase(const ModelSpec& spec, const std::vector<std::vector<Expression>>& lambda,
                 const std::vector<SamplePoint>& points);

/// Applies spec.rebase when present, otherwise returns spec unchanged.
ModelSpec effective_model(const ModelSpec& spec, const std::vector<SamplePoint>& points);

}  // namespace hamilton
}  // namespace gsf

#endif
