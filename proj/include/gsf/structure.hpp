#ifndef GSF_STRUCTURE_HPP
#define GSF_STRUCTURE_HPP

#include "gsf/lagrange.hpp"
#include "gsf/legendre.hpp"
#include "gsf/model.hpp"
#include "gsf/tensor.hpp"

namespace gsf {
namespace structure {

/// The gauge-structure tensors of a model, stored symbolically in (q, v)
/// except A and Bten, which pick up accelerations through total time
/// derivatives. Index order follows the shape comments.
struct StructureTensors {
  IndexedExpr R;     // [m][n]            first-order generators
  IndexedExpr T;     // [m][m][m]         T[mu][nu][gamma]
  IndexedExpr E;     // [m][m][n][n]      E[mu][nu][i][j]
  IndexedExpr b;     // [m][n][n]         b[mu][i][k]
  IndexedExpr A;     // [m][m][m][m]      A[al][be][ga][rho]
  IndexedExpr Bten;  // [m][m][m][n][n]   Bten[al][be][ga][i][j]
  IndexedExpr D;     // [m][m][m][n][m]   D[al][be][ga][i][rho]
  IndexedExpr P1;    // [n][m][n]         P1[j][mu][i]
  IndexedExpr P2;    // [n][m][m][n][n]   P2[k][mu][nu][i][j]
  IndexedExpr M;     // [m][m][m][n][n][n] M[al][be][ga][i][j][k]
};

IndexedExpr tensor_T(const ModelSpec& spec, const legendre::PullbackMap& pm);
IndexedExpr tensor_E(const ModelSpec& spec, const legendre::PullbackMap& pm);
IndexedExpr tensor_b(const ModelSpec& spec, const legendre::PullbackMap& pm);
IndexedExpr tensor_D(const ModelSpec& spec, const legendre::PullbackMap& pm);
IndexedExpr tensor_A(const ModelSpec& spec, const legendre::PullbackMap& pm);
IndexedExpr tensor_Bten(const ModelSpec& spec, const legendre::PullbackMap& pm);

struct MRoutes {
  IndexedExpr M;   // from constraint derivatives and the Hessian jet
  IndexedExpr P1;
  IndexedExpr P2;
};
MRoutes tensor_M(const ModelSpec& spec, const legendre::PullbackMap& pm);

/// Alternative route through derivatives of the computed E and R; must agree
/// with tensor_M entry by entry.
IndexedExpr tensor_M_from_jets(const ModelSpec& spec, const legendre::PullbackMap& pm);

/// E -> E + e_{mu nu}^{al be}(R_al^i R_be^j - R_be^i R_al^j),
/// D -> D + d_{al be ga}^{rho delta} R_delta^i.
/// e must be antisymmetric in its first index pair (checked structurally);
/// d is arbitrary. Other tensors pass through unchanged.
StructureTensors ambiguity_shift(const StructureTensors& tensors, const IndexedExpr& e,
                                 const IndexedExpr& d);

/// Everything the verification tower needs, built once per model. All
/// derivative families are shared subtrees of the same DAG, so per-point
/// evaluation through one Evaluator touches each distinct node once.
struct Workspace {
  ModelSpec spec;  // effective model (rebase already applied by the caller)
  legendre::PullbackMap pm;

  IndexedExpr W;      // [n][n]
  IndexedExpr Wv;     // [n][n][n]      dW_ij/dv_k
  IndexedExpr Lq;     // [n]            dL/dq
  IndexedExpr Lqv;    // [n][n]         d2L/dq_i dv_j
  IndexedExpr alpha;  // [n]
  IndexedExpr Bf;     // [n][n]
  IndexedExpr EL;     // [n]            Euler-Lagrange residual (q, v, a)

  IndexedExpr Rq;     // [m][n][n]      dR_mu^i/dq_k
  IndexedExpr Rv;     // [m][n][n]      dR_mu^i/dv_k
  IndexedExpr Rdot;   // [m][n]
  IndexedExpr Rvdot;  // [m][n][n]      d/dt of Rv entries

  IndexedExpr c3;     // [m][n][n][n]   FL* d3G/dp dp dp
  IndexedExpr Gq;     // [m][n]         FL* dG/dq
  IndexedExpr Gqp;    // [m][n][n]      FL* d2G/dq_k dp_i  (indices [mu][k][i])

  IndexedExpr Tq, Tv;  // [m][m][m][n]
  IndexedExpr Cp, Cq;  // [m][m][m][n]  pulled C derivatives
  IndexedExpr Eq, Ev;  // [m][m][n][n][n]
  IndexedExpr Edot;    // [m][m][n][n]

  IndexedExpr Gpull;   // [m]           FL* G (identically zero for a consistent model)
  Expression hc_pull;
  Expression energy;   // v.dL/dv - L

  StructureTensors tensors;
  IndexedExpr M54;     // jet-route M for the cross-check
};

Workspace build_workspace(const ModelSpec& spec);

}  // namespace structure
}  // namespace gsf

#endif
