#include "gsf/lagrange.hpp"

#include <cmath>

namespace gsf {
namespace lagrange {

IndexedExpr hessian(const ModelSpec& spec) {
  const int n = spec.n;
  IndexedExpr W({n, n});
  for (int i = 0; i < n; ++i) {
    Expression di = differentiate(spec.L, spec.v[i]);
    for (int j = i; j < n; ++j) {
      Expression e = differentiate(di, spec.v[j]);
      W.at({i, j}) = e;
      W.at({j, i}) = e;  // structural symmetry: shared node
    }
  }
  return W;
}

IndexedExpr alpha(const ModelSpec& spec) {
  const int n = spec.n;
  IndexedExpr out({n});
  for (int i = 0; i < n; ++i) {
    std::vector<Expression> parts;
    parts.push_back(differentiate(spec.L, spec.q[i]));
    Expression dLvi = differentiate(spec.L, spec.v[i]);
    for (int l = 0; l < n; ++l) {
      Expression mixed = differentiate(dLvi, spec.q[l]);
      if (!mixed.is_zero())
        parts.push_back(-(Expression::symbol(spec.v[l]) * mixed));
    }
    out.at({i}) = Expression::sum(std::move(parts));
  }
  return out;
}

IndexedExpr el_residual(const ModelSpec& spec) {
  const int n = spec.n;
  IndexedExpr W = hessian(spec);
  IndexedExpr al = alpha(spec);
  IndexedExpr out({n});
  for (int i = 0; i < n; ++i) {
    std::vector<Expression> parts;
    for (int j = 0; j < n; ++j) {
      if (!W.at({i, j}).is_zero())
        parts.push_back(W.at({i, j}) * Expression::symbol(spec.a[j]));
    }
    parts.push_back(-al.at({i}));
    out.at({i}) = Expression::sum(std::move(parts));
  }
  return out;
}

IndexedExpr b_field(const ModelSpec& spec) {
  const int n = spec.n;
  IndexedExpr B({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;  // diagonal stays the zero constant
      Expression e = differentiate(differentiate(spec.L, spec.v[i]), spec.q[j]) -
                     differentiate(differentiate(spec.L, spec.v[j]), spec.q[i]);
      B.at({i, j}) = e;
    }
  return B;
}

NoetherResiduals noether_check(const ModelSpec& spec, const IndexedExpr& R,
                               const std::vector<SamplePoint>& points) {
  const int n = spec.n, m = spec.m;
  IndexedExpr al = alpha(spec);
  IndexedExpr el = el_residual(spec);
  NoetherResiduals res;
  Evaluator ev;
  for (const auto& pt : points) {
    ev.begin_point();
    bind_point(ev, spec, pt);
    for (int mu = 0; mu < m; ++mu) {
      double sa = 0.0, aa = 0.0, se = 0.0, ae = 0.0;
      for (int i = 0; i < n; ++i) {
        double r = ev.eval(R.at({mu, i}));
        double ta = r * ev.eval(al.at({i}));
        double te = r * ev.eval(el.at({i}));
        sa += ta;
        aa += std::abs(ta);
        se += te;
        ae += std::abs(te);
      }
      res.max_r_alpha = std::max(res.max_r_alpha, std::abs(sa) / (1.0 + aa));
      res.max_r_el = std::max(res.max_r_el, std::abs(se) / (1.0 + ae));
    }
  }
  return res;
}

}  // namespace lagrange
}  // namespace gsf
