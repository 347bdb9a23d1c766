#include "gsf/hamilton.hpp"

#include <cmath>

namespace gsf {
namespace hamilton {

namespace {
struct Acc {
  double sum = 0.0, abs = 0.0;
  void add(double t) {
    sum += t;
    abs += std::abs(t);
  }
  double norm() const { return std::abs(sum) / (1.0 + abs); }
};

// Determinant by cofactor expansion; fine at gauge-sector sizes.
Expression sym_det(const std::vector<std::vector<Expression>>& a) {
  size_t m = a.size();
  if (m == 1) return a[0][0];
  std::vector<Expression> parts;
  for (size_t j = 0; j < m; ++j) {
    if (a[0][j].is_zero()) continue;
    std::vector<std::vector<Expression>> minor;
    for (size_t r = 1; r < m; ++r) {
      std::vector<Expression> row;
      for (size_t c = 0; c < m; ++c)
        if (c != j) row.push_back(a[r][c]);
      minor.push_back(std::move(row));
    }
    Expression term = a[0][j] * sym_det(minor);
    parts.push_back(j % 2 == 0 ? term : -term);
  }
  return Expression::sum(std::move(parts));
}

// inv[i][j] = cofactor(j, i) / det
std::vector<std::vector<Expression>> sym_inverse(const std::vector<std::vector<Expression>>& a,
                                                 const Expression& det) {
  size_t m = a.size();
  std::vector<std::vector<Expression>> inv(m, std::vector<Expression>(m));
  Expression dinv = Expression::power(det, Rational(-1));
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j) {
      std::vector<std::vector<Expression>> minor;
      for (size_t r = 0; r < m; ++r) {
        if (r == j) continue;
        std::vector<Expression> row;
        for (size_t c = 0; c < m; ++c)
          if (c != i) row.push_back(a[r][c]);
        minor.push_back(std::move(row));
      }
      Expression cof = m == 1 ? Expression::one() : sym_det(minor);
      Expression term = cof * dinv;
      inv[i][j] = (i + j) % 2 == 0 ? term : -term;
    }
  return inv;
}
}  // namespace

Expression poisson_bracket(const ModelSpec& spec, const Expression& f, const Expression& g) {
  std::vector<Expression> parts;
  for (int i = 0; i < spec.n; ++i) {
    Expression fq = differentiate(f, spec.q[i]);
    Expression gp = differentiate(g, spec.p[i]);
    if (!fq.is_zero() && !gp.is_zero()) parts.push_back(fq * gp);
    Expression fp = differentiate(f, spec.p[i]);
    Expression gq = differentiate(g, spec.q[i]);
    if (!fp.is_zero() && !gq.is_zero()) parts.push_back(-(fp * gq));
  }
  return Expression::sum(std::move(parts));
}

Expression BracketTable::at(int mu, int nu) const {
  if (mu == nu) return Expression::zero();
  if (mu < nu) return upper[static_cast<size_t>(mu) * m - mu * (mu + 1) / 2 + (nu - mu - 1)];
  return -at(nu, mu);
}

BracketTable constraint_brackets(const ModelSpec& spec) {
  BracketTable t;
  t.m = spec.m;
  for (int mu = 0; mu < spec.m; ++mu)
    for (int nu = mu + 1; nu < spec.m; ++nu)
      t.upper.push_back(poisson_bracket(spec, spec.G[mu], spec.G[nu]));
  return t;
}

FirstClassResiduals first_class_check(const ModelSpec& spec, const legendre::PullbackMap& pm,
                                      const std::vector<SamplePoint>& points,
                                      const std::vector<PhasePoint>& off_points) {
  const int m = spec.m;
  BracketTable br = constraint_brackets(spec);
  FirstClassResiduals res;
  Evaluator ev;

  std::vector<Expression> pulled_br, pulled_hg;
  for (int mu = 0; mu < m; ++mu)
    for (int nu = mu + 1; nu < m; ++nu) pulled_br.push_back(legendre::pullback(br.at(mu, nu), pm));
  for (int mu = 0; mu < m; ++mu)
    pulled_hg.push_back(legendre::pullback(poisson_bracket(spec, spec.Hc, spec.G[mu]), pm));
  std::vector<Expression> closure_pulled;  // FL*({G,G} - C.G) for mu<nu
  for (int mu = 0; mu < m; ++mu)
    for (int nu = mu + 1; nu < m; ++nu) {
      std::vector<Expression> parts{br.at(mu, nu)};
      for (int g = 0; g < m; ++g) parts.push_back(-(spec.c(mu, nu, g) * spec.G[g]));
      closure_pulled.push_back(legendre::pullback(Expression::sum(std::move(parts)), pm));
    }

  for (const auto& pt : points) {
    ev.begin_point();
    bind_point(ev, spec, pt);
    for (const auto& e : pulled_br) res.pulled_gg = std::max(res.pulled_gg, std::abs(ev.eval(e)));
    for (const auto& e : pulled_hg) res.pulled_hg = std::max(res.pulled_hg, std::abs(ev.eval(e)));
    for (const auto& e : closure_pulled)
      res.closure_on = std::max(res.closure_on, std::abs(ev.eval(e)));
  }

  for (const auto& pp : off_points) {
    ev.begin_point();
    for (int i = 0; i < spec.n; ++i) {
      ev.bind(spec.q[i], pp.q[i]);
      ev.bind(spec.p[i], pp.p[i]);
    }
    int k = 0;
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu, ++k) {
        Acc acc;
        acc.add(ev.eval(br.upper[k]));
        for (int g = 0; g < m; ++g)
          acc.add(-ev.eval(spec.c(mu, nu, g)) * ev.eval(spec.G[g]));
        res.closure_off = std::max(res.closure_off, acc.norm());
      }
  }
  return res;
}

JacobiResiduals jacobi_checks(const ModelSpec& spec, const legendre::PullbackMap& pm,
                              const std::vector<SamplePoint>& points,
                              const std::vector<PhasePoint>& off_points) {
  const int m = spec.m;
  JacobiResiduals res;
  Evaluator ev;

  std::vector<Expression> cyc;  // cyclic double brackets per (a<b<c)
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      for (int c = b + 1; c < m; ++c) {
        Expression e = poisson_bracket(spec, poisson_bracket(spec, spec.G[a], spec.G[b]), spec.G[c]) +
                       poisson_bracket(spec, poisson_bracket(spec, spec.G[b], spec.G[c]), spec.G[a]) +
                       poisson_bracket(spec, poisson_bracket(spec, spec.G[c], spec.G[a]), spec.G[b]);
        cyc.push_back(e);
      }
  for (const auto& pp : off_points) {
    ev.begin_point();
    for (int i = 0; i < spec.n; ++i) {
      ev.bind(spec.q[i], pp.q[i]);
      ev.bind(spec.p[i], pp.p[i]);
    }
    for (const auto& e : cyc)
      res.double_bracket = std::max(res.double_bracket, std::abs(ev.eval(e)));
  }

  // pulled second-order combination, all (alpha, beta, gamma, eta)
  std::vector<Expression> pulled;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c)
        for (int eta = 0; eta < m; ++eta) {
          std::vector<Expression> parts;
          auto add_cyc = [&](int x, int y, int z) {
            parts.push_back(poisson_bracket(spec, spec.c(x, y, eta), spec.G[z]));
            for (int d = 0; d < m; ++d) parts.push_back(-(spec.c(x, y, d) * spec.c(z, d, eta)));
          };
          add_cyc(a, b, c);
          add_cyc(b, c, a);
          add_cyc(c, a, b);
          Expression e = Expression::sum(std::move(parts));
          if (!e.is_zero()) pulled.push_back(legendre::pullback(e, pm));
        }
  for (const auto& pt : points) {
    ev.begin_point();
    bind_point(ev, spec, pt);
    for (const auto& e : pulled)
      res.pulled_second_order = std::max(res.pulled_second_order, std::abs(ev.eval(e)));
  }
  return res;
}

ModelSpec rebase(const ModelSpec& spec, const std::vector<std::vector<Expression>>& lambda,
                 const std::vector<SamplePoint>& points) {
  const int m = spec.m;
  Expression det = sym_det(lambda);

  // invertibility where the model actually lives: at pulled-back momenta
  {
    auto pm = legendre::PullbackMap::from_model(spec);
    Expression det_pulled = legendre::pullback(det, pm);
    Evaluator ev;
    for (size_t k = 0; k < points.size(); ++k) {
      ev.begin_point();
      bind_point(ev, spec, points[k]);
      double d = ev.eval(det_pulled);
      if (std::abs(d) <= 1e-6)
        throw Error(ErrorCode::SingularRebase,
                    "rebase matrix numerically singular at sample point " + std::to_string(k) +
                        " (|det| = " + std::to_string(std::abs(d)) + ")");
    }
  }

  auto inv = sym_inverse(lambda, det);

  ModelSpec out = spec;
  out.rebase.reset();
  // G'_mu = Lambda_mu^alpha G_alpha
  for (int mu = 0; mu < m; ++mu) {
    std::vector<Expression> parts;
    for (int al = 0; al < m; ++al) parts.push_back(lambda[mu][al] * spec.G[al]);
    out.G[mu] = Expression::sum(std::move(parts));
  }

  // K_{mu nu}^delta, then C' = K . Lambda^{-1}, antisymmetrized
  auto K = [&](int mu, int nu, int d) {
    std::vector<Expression> parts;
    for (int al = 0; al < m; ++al)
      for (int be = 0; be < m; ++be) {
        Expression cexp = spec.c(al, be, d);
        if (!cexp.is_zero()) parts.push_back(lambda[mu][al] * lambda[nu][be] * cexp);
      }
    for (int al = 0; al < m; ++al) {
      Expression b1 = poisson_bracket(spec, spec.G[al], lambda[nu][d]);
      if (!b1.is_zero()) parts.push_back(lambda[mu][al] * b1);
      Expression b2 = poisson_bracket(spec, spec.G[al], lambda[mu][d]);
      if (!b2.is_zero()) parts.push_back(-(lambda[nu][al] * b2));
      Expression b3 = poisson_bracket(spec, lambda[mu][al], lambda[nu][d]);
      if (!b3.is_zero()) parts.push_back(b3 * spec.G[al]);
    }
    return Expression::sum(std::move(parts));
  };

  for (int mu = 0; mu < m; ++mu)
    for (int nu = mu + 1; nu < m; ++nu)
      for (int g = 0; g < m; ++g) {
        std::vector<Expression> parts;
        for (int d = 0; d < m; ++d) {
          Expression kmn = K(mu, nu, d);
          Expression knm = K(nu, mu, d);
          if (!kmn.is_zero()) parts.push_back(kmn * inv[d][g]);
          if (!knm.is_zero()) parts.push_back(-(knm * inv[d][g]));
        }
        Expression sum = Expression::sum(std::move(parts));
        out.set_c(mu, nu, g, Expression::product({Expression::constant(Rational(1, 2)), sum}));
      }
  return out;
}

ModelSpec effective_model(const ModelSpec& spec, const std::vector<SamplePoint>& points) {
  if (!spec.rebase) return spec;
  return rebase(spec, *spec.rebase, points);
}

}  // namespace hamilton
}  // namespace gsf
