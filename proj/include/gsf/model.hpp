#ifndef GSF_MODEL_HPP
#define GSF_MODEL_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gsf/expr.hpp"

namespace gsf {

/// A validated model: degenerate Lagrangian, primary constraints, structure
/// functions, canonical Hamiltonian, sampling domain, optional rebase matrix.
struct ModelSpec {
  std::string name;
  int n = 0;  // coordinate count
  int m = 0;  // constraint count

  std::vector<Symbol> q, v, a, p;

  Expression L;                           // in (q, v)
  std::vector<std::string> g_names;       // constraint labels, unique
  std::vector<Expression> G;              // in (q, p)
  Expression Hc;                          // in (q, p)
  std::vector<Expression> domain;         // predicates "expr > 0" over (q, v)

  // Structure functions: only mu < nu stored; use c(mu, nu, gamma).
  // stored_c[index(mu, nu)][gamma] with index over the strict upper triangle.
  std::vector<std::vector<Expression>> stored_c;

  std::optional<std::vector<std::vector<Expression>>> rebase;  // m x m, in (q, p)

  /// Antisymmetric accessor: c(nu, mu, g) == -c(mu, nu, g), diagonal zero.
  Expression c(int mu, int nu, int gamma) const;
  void set_c(int mu, int nu, int gamma, const Expression& e);  // requires mu < nu

  JetFamilies jets() const { return JetFamilies{q, v, a}; }

  bool has_rebase() const { return rebase.has_value(); }
};

struct SamplePoint {
  std::vector<double> q, v, a;
};

/// Parse the line-oriented model grammar. Throws gsf::Error with line/column
/// positions on syntax errors, arity mismatches, unknown symbols, duplicate
/// constraint names, and structure entries violating antisymmetric storage.
ModelSpec parse_model(const std::string& text);

/// Re-serialize; parse_model(render(spec)) reproduces the spec.
std::string render(const ModelSpec& spec);

/// Deterministic rejection sampler over [-2,2]^(3n); a point is accepted when
/// every domain predicate is positive at its (q, v). Throws DomainTooSmall
/// after 10000 consecutive rejections.
std::vector<SamplePoint> sample_points(const ModelSpec& spec, int count, uint64_t seed);

/// Off-surface phase-space points: q sampled like sample_points (domain-
/// respecting), p uniform in [-2,2]^n. Deterministic per seed.
struct PhasePoint {
  std::vector<double> q, p;
};
std::vector<PhasePoint> sample_phase_points(const ModelSpec& spec, int count, uint64_t seed);

void bind_point(Bindings& b, const ModelSpec& spec, const SamplePoint& pt);
void bind_point(Evaluator& ev, const ModelSpec& spec, const SamplePoint& pt);

struct ValidationReport {
  int points = 0;
  bool rank_w_ok = true;         // rank W == n - m everywhere
  bool rank_r_ok = true;         // rank FL*(dG/dp) == m everywhere
  int worst_rank_w = -1;         // a rank actually seen when rank_w_ok fails
  int worst_rank_r = -1;
  double max_constraint_residual = 0.0;  // max |FL* G_mu|
  double max_hc_residual = 0.0;          // max |FL* Hc - (v.dL/dv - L)|
  double tolerance = 0.0;
  bool passed = false;
};

/// Numeric sanity of the model at the given points: Hessian corank, generator
/// rank, pulled-back constraints, canonical-Hamiltonian compatibility.
ValidationReport validate_model(const ModelSpec& spec, const std::vector<SamplePoint>& points,
                                double tol = 1e-10);

}  // namespace gsf

#endif
