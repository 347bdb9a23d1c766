#include "gsf/legendre.hpp"

#include <cmath>

#include "gsf/lagrange.hpp"
#include "gsf/numeric.hpp"

namespace gsf {
namespace legendre {

namespace {
struct Acc {
  double sum = 0.0, abs = 0.0;
  void add(double t) {
    sum += t;
    abs += std::abs(t);
  }
  double norm() const { return std::abs(sum) / (1.0 + abs); }
};
}  // namespace

PullbackMap PullbackMap::from_model(const ModelSpec& spec) {
  PullbackMap pm;
  for (int i = 0; i < spec.n; ++i)
    pm.assignments.emplace(spec.p[i], differentiate(spec.L, spec.v[i]));
  return pm;
}

Expression pullback(const Expression& e, const PullbackMap& pm) {
  return substitute(e, pm.assignments);
}

IndexedExpr gauge_generators(const ModelSpec& spec, const PullbackMap& pm) {
  const int n = spec.n, m = spec.m;
  IndexedExpr R({m, n});
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i)
      R.at({mu, i}) = pullback(differentiate(spec.G[mu], spec.p[i]), pm);
  return R;
}

double check_hc(const ModelSpec& spec, const PullbackMap& pm,
                const std::vector<SamplePoint>& points) {
  Expression hc = pullback(spec.Hc, pm);
  std::vector<Expression> parts;
  for (int i = 0; i < spec.n; ++i)
    parts.push_back(Expression::symbol(spec.v[i]) * differentiate(spec.L, spec.v[i]));
  Expression energy = Expression::sum(std::move(parts)) - spec.L;
  Evaluator ev;
  double worst = 0.0;
  for (const auto& pt : points) {
    ev.begin_point();
    bind_point(ev, spec, pt);
    worst = std::max(worst, std::abs(ev.eval(hc) - ev.eval(energy)));
  }
  return worst;
}

MultiplierReport multipliers(const ModelSpec& spec, const PullbackMap& pm,
                             const std::vector<SamplePoint>& points) {
  const int n = spec.n, m = spec.m;
  IndexedExpr R = gauge_generators(spec, pm);
  IndexedExpr al = lagrange::alpha(spec);
  IndexedExpr Bf = lagrange::b_field(spec);
  std::vector<Expression> hcp(n), hcq(n), dLq(n);
  for (int i = 0; i < n; ++i) {
    hcp[i] = pullback(differentiate(spec.Hc, spec.p[i]), pm);
    hcq[i] = pullback(differentiate(spec.Hc, spec.q[i]), pm);
    dLq[i] = differentiate(spec.L, spec.q[i]);
  }
  std::vector<std::vector<Expression>> Lqv(n, std::vector<Expression>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      Lqv[i][j] = differentiate(differentiate(spec.L, spec.q[i]), spec.v[j]);
  std::vector<Expression> hcbr(m);
  for (int mu = 0; mu < m; ++mu) {
    std::vector<Expression> parts;
    for (int i = 0; i < n; ++i) {
      parts.push_back(differentiate(spec.Hc, spec.q[i]) * differentiate(spec.G[mu], spec.p[i]));
      parts.push_back(-(differentiate(spec.Hc, spec.p[i]) * differentiate(spec.G[mu], spec.q[i])));
    }
    hcbr[mu] = pullback(Expression::sum(std::move(parts)), pm);
  }

  MultiplierReport rep;
  Evaluator ev;
  int ptIndex = 0;
  for (const auto& pt : points) {
    ev.begin_point();
    bind_point(ev, spec, pt);
    Mat A(n, m);
    for (int i = 0; i < n; ++i)
      for (int mu = 0; mu < m; ++mu) A(i, mu) = ev.eval(R.at({mu, i}));
    if (numeric_rank(A) != m)
      throw Error(ErrorCode::GeneratorRank,
                  "generator-rank: R drops rank at sample point " + std::to_string(ptIndex));
    std::vector<double> rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = pt.v[i] - ev.eval(hcp[i]);
    std::vector<double> lam;
    if (!solve_least_squares(A, rhs, lam))
      throw Error(ErrorCode::GeneratorRank,
                  "generator-rank: normal equations singular at point " + std::to_string(ptIndex));
    for (int i = 0; i < n; ++i) {
      double fit = -rhs[i];
      for (int mu = 0; mu < m; ++mu) fit += A(i, mu) * lam[mu];
      rep.max_fit_residual = std::max(rep.max_fit_residual, std::abs(fit));
    }
    // FL*(dHc/dq_i) + dL/dq_i - lambda_mu R_mu^j d2L/dv_j dq_i
    for (int i = 0; i < n; ++i) {
      Acc acc;
      acc.add(ev.eval(hcq[i]));
      acc.add(ev.eval(dLq[i]));
      for (int mu = 0; mu < m; ++mu)
        for (int j = 0; j < n; ++j) acc.add(-lam[mu] * A(j, mu) * ev.eval(Lqv[i][j]));
      rep.max_dq_residual = std::max(rep.max_dq_residual, acc.norm());
    }
    // FL*{Hc, G_mu} + R_mu.alpha + R_mu B R_nu lambda^nu
    for (int mu = 0; mu < m; ++mu) {
      Acc acc;
      acc.add(ev.eval(hcbr[mu]));
      for (int i = 0; i < n; ++i) acc.add(A(i, mu) * ev.eval(al.at({i})));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int nu = 0; nu < m; ++nu)
            acc.add(A(i, mu) * ev.eval(Bf.at({i, j})) * A(j, nu) * lam[nu]);
      rep.max_bracket_residual = std::max(rep.max_bracket_residual, acc.norm());
    }
    rep.lambdas.push_back(std::move(lam));
    ++ptIndex;
  }
  return rep;
}

TransportResiduals transport_checks(const ModelSpec& spec, const PullbackMap& pm,
                                    const std::vector<SamplePoint>& points) {
  const int n = spec.n, m = spec.m;
  IndexedExpr W = lagrange::hessian(spec);
  IndexedExpr R = gauge_generators(spec, pm);
  IndexedExpr el = lagrange::el_residual(spec);
  JetFamilies fam = spec.jets();

  IndexedExpr Rq({m, n, n}), Rv({m, n, n}), bten({m, n, n}), Gqp({m, n, n}), Rdot({m, n});
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        Rq.at({mu, i, k}) = differentiate(R.at({mu, i}), spec.q[k]);
        Rv.at({mu, i, k}) = differentiate(R.at({mu, i}), spec.v[k]);
        bten.at({mu, i, k}) = pullback(differentiate(differentiate(spec.G[mu], spec.p[i]), spec.p[k]), pm);
        Gqp.at({mu, k, i}) = pullback(differentiate(differentiate(spec.G[mu], spec.q[k]), spec.p[i]), pm);
      }
      Rdot.at({mu, i}) = total_time_derivative(R.at({mu, i}), fam);
    }
  IndexedExpr Lqv({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      Lqv.at({i, j}) = differentiate(differentiate(spec.L, spec.q[i]), spec.v[j]);
  std::vector<Expression> dLq(n);
  for (int l = 0; l < n; ++l) dLq[l] = differentiate(spec.L, spec.q[l]);

  // T entries and their derivatives plus pulled C-derivatives.
  IndexedExpr T({m, m, m}), Tq({m, m, m, n}), Tv({m, m, m, n}), Cp({m, m, m, n}), Cq({m, m, m, n});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int g = 0; g < m; ++g) {
        Expression cezz = spec.c(mu, nu, g);
        Expression t = pullback(cezz, pm);
        T.at({mu, nu, g}) = t;
        for (int j = 0; j < n; ++j) {
          Tq.at({mu, nu, g, j}) = differentiate(t, spec.q[j]);
          Tv.at({mu, nu, g, j}) = differentiate(t, spec.v[j]);
          Cp.at({mu, nu, g, j}) = pullback(differentiate(cezz, spec.p[j]), pm);
          Cq.at({mu, nu, g, j}) = pullback(differentiate(cezz, spec.q[j]), pm);
        }
      }

  TransportResiduals res;
  Evaluator ev;
  for (const auto& pt : points) {
    ev.begin_point();
    bind_point(ev, spec, pt);
    for (int mu = 0; mu < m; ++mu)
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          Acc a30;
          a30.add(ev.eval(Rv.at({mu, i, k})));
          for (int l = 0; l < n; ++l)
            a30.add(-ev.eval(W.at({k, l})) * ev.eval(bten.at({mu, l, i})));
          res.dRdv = std::max(res.dRdv, a30.norm());
          Acc a31;
          a31.add(ev.eval(Rq.at({mu, i, k})));
          a31.add(-ev.eval(Gqp.at({mu, k, i})));
          for (int l = 0; l < n; ++l)
            a31.add(-ev.eval(Lqv.at({k, l})) * ev.eval(bten.at({mu, l, i})));
          res.dRdq = std::max(res.dRdq, a31.norm());
        }
        // dR/dt decomposition (uses the point's accelerations through el)
        Acc a47;
        a47.add(ev.eval(Rdot.at({mu, i})));
        for (int l = 0; l < n; ++l) {
          a47.add(-ev.eval(Gqp.at({mu, l, i})) * pt.v[l]);
          a47.add(-ev.eval(bten.at({mu, i, l})) * ev.eval(dLq[l]));
          a47.add(-ev.eval(bten.at({mu, i, l})) * ev.eval(el.at({l})));
        }
        res.rdot = std::max(res.rdot, a47.norm());
      }
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu)
        for (int g = 0; g < m; ++g)
          for (int j = 0; j < n; ++j) {
            Acc a44;
            a44.add(ev.eval(Tq.at({mu, nu, g, j})));
            a44.add(-ev.eval(Cq.at({mu, nu, g, j})));
            for (int k = 0; k < n; ++k)
              a44.add(-ev.eval(Lqv.at({j, k})) * ev.eval(Cp.at({mu, nu, g, k})));
            res.dTdq = std::max(res.dTdq, a44.norm());
            Acc a45;
            a45.add(ev.eval(Tv.at({mu, nu, g, j})));
            for (int k = 0; k < n; ++k)
              a45.add(-ev.eval(W.at({j, k})) * ev.eval(Cp.at({mu, nu, g, k})));
            res.dTdv = std::max(res.dTdv, a45.norm());
          }
  }
  return res;
}

}  // namespace legendre
}  // namespace gsf
