#ifndef GSF_LAGRANGE_HPP
#define GSF_LAGRANGE_HPP

#include "gsf/model.hpp"
#include "gsf/tensor.hpp"

namespace gsf {
namespace lagrange {

/// W_ij = d2L/dv_i dv_j, symmetric by construction.
IndexedExpr hessian(const ModelSpec& spec);

/// alpha_i = dL/dq_i - v_l d2L/dq_l dv_i.
IndexedExpr alpha(const ModelSpec& spec);

/// Euler-Lagrange left-hand sides L_i = W_ij a_j - alpha_i, in (q, v, a).
IndexedExpr el_residual(const ModelSpec& spec);

/// B_ij = d2L/dv_i dq_j - d2L/dv_j dq_i, antisymmetric.
IndexedExpr b_field(const ModelSpec& spec);

struct NoetherResiduals {
  double max_r_alpha = 0.0;  // max |R.alpha|
  double max_r_el = 0.0;     // max |R.L| with the points' accelerations
};

/// Contracts the supplied generators against alpha and the Euler-Lagrange
/// residual at every point (normalized residuals).
NoetherResiduals noether_check(const ModelSpec& spec, const IndexedExpr& R,
                               const std::vector<SamplePoint>& points);

}  // namespace lagrange
}  // namespace gsf

#endif
