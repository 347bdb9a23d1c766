#include "gsf/structure.hpp"

#include <array>

namespace gsf {
namespace structure {

namespace {

const std::array<std::array<int, 3>, 3> kCyclic = {{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}};

// Product that skips construction when a factor is structurally zero.
inline void add_product(std::vector<Expression>& parts, std::vector<Expression> factors) {
  for (const auto& f : factors)
    if (f.is_zero()) return;
  parts.push_back(Expression::product(std::move(factors)));
}

IndexedExpr hessian_of(const ModelSpec& spec) { return lagrange::hessian(spec); }

IndexedExpr build_b(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  const int n = spec.n, m = spec.m;
  IndexedExpr b({m, n, n});
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i) {
      Expression di = differentiate(spec.G[mu], spec.p[i]);
      for (int k = i; k < n; ++k) {
        Expression e = legendre::pullback(differentiate(di, spec.p[k]), pm);
        b.at({mu, i, k}) = e;
        b.at({mu, k, i}) = e;
      }
    }
  return b;
}

IndexedExpr build_T(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  const int m = spec.m;
  IndexedExpr T({m, m, m});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int g = 0; g < m; ++g)
        T.at({mu, nu, g}) = legendre::pullback(spec.c(mu, nu, g), pm);
  return T;
}

IndexedExpr build_E(const ModelSpec& spec, const IndexedExpr& b, const IndexedExpr& W) {
  const int n = spec.n, m = spec.m;
  IndexedExpr E({m, m, n, n});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu) {
      if (mu == nu) continue;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          std::vector<Expression> parts;
          for (int l = 0; l < n; ++l)
            for (int k = 0; k < n; ++k) {
              add_product(parts, {b.at({mu, i, l}), W.at({l, k}), b.at({nu, k, j})});
              add_product(parts, {Expression::constant(-1), b.at({nu, i, l}), W.at({l, k}),
                                  b.at({mu, k, j})});
            }
          E.at({mu, nu, i, j}) = Expression::sum(std::move(parts));
        }
    }
  return E;
}

IndexedExpr build_Cp(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  const int n = spec.n, m = spec.m;
  IndexedExpr Cp({m, m, m, n});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int g = 0; g < m; ++g) {
        Expression c = spec.c(mu, nu, g);
        if (c.is_zero()) continue;
        for (int k = 0; k < n; ++k)
          Cp.at({mu, nu, g, k}) = legendre::pullback(differentiate(c, spec.p[k]), pm);
      }
  return Cp;
}

IndexedExpr build_D(const ModelSpec& spec, const IndexedExpr& b, const IndexedExpr& W,
                    const IndexedExpr& Cp) {
  const int n = spec.n, m = spec.m;
  IndexedExpr D({m, m, m, n, m});
  Expression third = Expression::constant(Rational(-1, 3));
  for (int al = 0; al < m; ++al)
    for (int be = 0; be < m; ++be)
      for (int ga = 0; ga < m; ++ga) {
        std::array<int, 3> idx = {al, be, ga};
        for (int i = 0; i < n; ++i)
          for (int rho = 0; rho < m; ++rho) {
            std::vector<Expression> parts;
            for (const auto& cyc : kCyclic) {
              int x = idx[cyc[0]], y = idx[cyc[1]], z = idx[cyc[2]];
              for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                  add_product(parts, {b.at({x, i, j}), W.at({j, k}), Cp.at({y, z, rho, k})});
            }
            if (!parts.empty())
              D.at({al, be, ga, i, rho}) = third * Expression::sum(std::move(parts));
          }
      }
  return D;
}

IndexedExpr build_c3(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  const int n = spec.n, m = spec.m;
  IndexedExpr c3({m, n, n, n});
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i) {
      Expression di = differentiate(spec.G[mu], spec.p[i]);
      for (int j = i; j < n; ++j) {
        Expression dij = differentiate(di, spec.p[j]);
        for (int k = j; k < n; ++k) {
          Expression e = legendre::pullback(differentiate(dij, spec.p[k]), pm);
          // totally symmetric: fill all permutations with the shared node
          c3.at({mu, i, j, k}) = e;
          c3.at({mu, i, k, j}) = e;
          c3.at({mu, j, i, k}) = e;
          c3.at({mu, j, k, i}) = e;
          c3.at({mu, k, i, j}) = e;
          c3.at({mu, k, j, i}) = e;
        }
      }
    }
  return c3;
}

IndexedExpr build_P1(const ModelSpec& spec, const IndexedExpr& W, const IndexedExpr& b) {
  const int n = spec.n, m = spec.m;
  IndexedExpr P1({n, m, n});
  for (int j = 0; j < n; ++j)
    for (int mu = 0; mu < m; ++mu)
      for (int i = 0; i < n; ++i) {
        std::vector<Expression> parts;
        for (int k = 0; k < n; ++k) add_product(parts, {W.at({j, k}), b.at({mu, k, i})});
        P1.at({j, mu, i}) = Expression::sum(std::move(parts));
      }
  return P1;
}

IndexedExpr build_P2(const ModelSpec& spec, const IndexedExpr& W, const IndexedExpr& Wv,
                     const IndexedExpr& b, const IndexedExpr& c3) {
  const int n = spec.n, m = spec.m;
  IndexedExpr P2({n, m, m, n, n});
  for (int k = 0; k < n; ++k)
    for (int mu = 0; mu < m; ++mu)
      for (int nu = 0; nu < m; ++nu) {
        if (mu == nu) continue;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            std::vector<Expression> parts;
            for (int l = 0; l < n; ++l)
              for (int mm = 0; mm < n; ++mm) {
                add_product(parts, {Wv.at({l, mm, k}), b.at({mu, i, l}), b.at({nu, mm, j})});
                add_product(parts, {Expression::constant(-1), Wv.at({l, mm, k}),
                                    b.at({nu, i, l}), b.at({mu, mm, j})});
              }
            for (int l = 0; l < n; ++l)
              for (int mm = 0; mm < n; ++mm)
                for (int nn = 0; nn < n; ++nn) {
                  const Expression& wl = W.at({l, mm});
                  const Expression& wk = W.at({k, nn});
                  if (wl.is_zero() || wk.is_zero()) continue;
                  add_product(parts, {wl, wk, c3.at({mu, nn, i, l}), b.at({nu, mm, j})});
                  add_product(parts, {wl, wk, b.at({mu, i, l}), c3.at({nu, nn, mm, j})});
                  add_product(parts, {Expression::constant(-1), wl, wk, c3.at({nu, nn, i, l}),
                                      b.at({mu, mm, j})});
                  add_product(parts, {Expression::constant(-1), wl, wk, b.at({nu, i, l}),
                                      c3.at({mu, nn, mm, j})});
                }
            P2.at({k, mu, nu, i, j}) = Expression::sum(std::move(parts));
          }
      }
  return P2;
}

IndexedExpr build_M55(const ModelSpec& spec, const IndexedExpr& b, const IndexedExpr& c3,
                      const IndexedExpr& P1, const IndexedExpr& P2) {
  const int n = spec.n, m = spec.m;
  IndexedExpr M({m, m, m, n, n, n});
  Expression third = Expression::constant(Rational(-1, 3));
  for (int al = 0; al < m; ++al)
    for (int be = 0; be < m; ++be)
      for (int ga = 0; ga < m; ++ga) {
        std::array<int, 3> idx = {al, be, ga};
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
              std::vector<Expression> parts;
              for (const auto& cyc : kCyclic) {
                int x = idx[cyc[0]], y = idx[cyc[1]], z = idx[cyc[2]];
                for (int l = 0; l < n; ++l)
                  add_product(parts, {b.at({x, k, l}), P2.at({l, y, z, i, j})});
                for (int mm = 0; mm < n; ++mm)
                  for (int nn = 0; nn < n; ++nn) {
                    const Expression& c = c3.at({x, k, mm, nn});
                    if (c.is_zero()) continue;
                    add_product(parts, {c, P1.at({mm, y, i}), P1.at({nn, z, j})});
                    add_product(parts,
                                {Expression::constant(-1), c, P1.at({mm, z, i}), P1.at({nn, y, j})});
                  }
              }
              if (!parts.empty())
                M.at({al, be, ga, i, j, k}) = third * Expression::sum(std::move(parts));
            }
      }
  return M;
}

IndexedExpr build_M54(const ModelSpec& spec, const IndexedExpr& b, const IndexedExpr& c3,
                      const IndexedExpr& Ev, const IndexedExpr& Rv) {
  const int n = spec.n, m = spec.m;
  IndexedExpr M({m, m, m, n, n, n});
  Expression third = Expression::constant(Rational(-1, 3));
  for (int al = 0; al < m; ++al)
    for (int be = 0; be < m; ++be)
      for (int ga = 0; ga < m; ++ga) {
        std::array<int, 3> idx = {al, be, ga};
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
              std::vector<Expression> parts;
              for (const auto& cyc : kCyclic) {
                int x = idx[cyc[0]], y = idx[cyc[1]], z = idx[cyc[2]];
                for (int l = 0; l < n; ++l)
                  add_product(parts, {b.at({x, k, l}), Ev.at({y, z, i, j, l})});
                for (int mm = 0; mm < n; ++mm)
                  for (int nn = 0; nn < n; ++nn) {
                    const Expression& c = c3.at({x, k, mm, nn});
                    if (c.is_zero()) continue;
                    add_product(parts, {c, Rv.at({y, i, mm}), Rv.at({z, j, nn})});
                    add_product(parts,
                                {Expression::constant(-1), c, Rv.at({z, i, mm}), Rv.at({y, j, nn})});
                  }
              }
              if (!parts.empty())
                M.at({al, be, ga, i, j, k}) = third * Expression::sum(std::move(parts));
            }
      }
  return M;
}

// d/dt of a (q, v) tensor family from its q- and v-derivative families.
Expression dot_from(const IndexedExpr& dq, const IndexedExpr& dv, std::vector<int> base_idx,
                    const ModelSpec& spec) {
  std::vector<Expression> parts;
  const int n = spec.n;
  for (int k = 0; k < n; ++k) {
    std::vector<int> idx = base_idx;
    idx.push_back(k);
    // flat access: both families have the derivative direction as last index
    size_t fq = 0, fv = 0;
    {
      size_t f = 0;
      auto s = dq.shape().begin();
      for (int v : idx) {
        f = f * static_cast<size_t>(*s) + static_cast<size_t>(v);
        ++s;
      }
      fq = f;
    }
    {
      size_t f = 0;
      auto s = dv.shape().begin();
      for (int v : idx) {
        f = f * static_cast<size_t>(*s) + static_cast<size_t>(v);
        ++s;
      }
      fv = f;
    }
    const Expression& eq = dq.flat_at(fq);
    const Expression& ev = dv.flat_at(fv);
    if (!eq.is_zero()) parts.push_back(eq * Expression::symbol(spec.v[k]));
    if (!ev.is_zero()) parts.push_back(ev * Expression::symbol(spec.a[k]));
  }
  return Expression::sum(std::move(parts));
}

IndexedExpr build_A(const ModelSpec& spec, const IndexedExpr& R, const IndexedExpr& Rdot,
                    const IndexedExpr& T, const IndexedExpr& Tq, const IndexedExpr& Tv) {
  const int n = spec.n, m = spec.m;
  IndexedExpr A({m, m, m, m});
  Expression third = Expression::constant(Rational(1, 3));
  for (int al = 0; al < m; ++al)
    for (int be = 0; be < m; ++be)
      for (int ga = 0; ga < m; ++ga) {
        std::array<int, 3> idx = {al, be, ga};
        for (int rho = 0; rho < m; ++rho) {
          std::vector<Expression> parts;
          for (const auto& cyc : kCyclic) {
            int x = idx[cyc[0]], y = idx[cyc[1]], z = idx[cyc[2]];
            for (int eta = 0; eta < m; ++eta)
              add_product(parts, {T.at({x, eta, rho}), T.at({y, z, eta})});
            for (int j = 0; j < n; ++j) {
              add_product(parts, {Expression::constant(-1), R.at({x, j}), Tq.at({y, z, rho, j})});
              add_product(parts, {Expression::constant(-1), Rdot.at({x, j}), Tv.at({y, z, rho, j})});
            }
          }
          if (!parts.empty()) A.at({al, be, ga, rho}) = third * Expression::sum(std::move(parts));
        }
      }
  return A;
}

IndexedExpr build_Bten(const ModelSpec& spec, const IndexedExpr& R, const IndexedExpr& Rq,
                       const IndexedExpr& Rv, const IndexedExpr& Rdot, const IndexedExpr& Rvdot,
                       const IndexedExpr& T, const IndexedExpr& E, const IndexedExpr& Eq,
                       const IndexedExpr& Ev, const IndexedExpr& Edot) {
  const int n = spec.n, m = spec.m;
  IndexedExpr B({m, m, m, n, n});
  Expression third = Expression::constant(Rational(1, 3));
  Expression half = Expression::constant(Rational(1, 2));
  for (int al = 0; al < m; ++al)
    for (int be = 0; be < m; ++be)
      for (int ga = 0; ga < m; ++ga) {
        std::array<int, 3> idx = {al, be, ga};
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            std::vector<Expression> parts;
            for (const auto& cyc : kCyclic) {
              int x = idx[cyc[0]], y = idx[cyc[1]], z = idx[cyc[2]];
              for (int eta = 0; eta < m; ++eta)
                add_product(parts, {E.at({x, eta, i, j}), T.at({y, z, eta})});
              for (int k = 0; k < n; ++k) {
                add_product(parts, {Expression::constant(-1), R.at({x, k}), Eq.at({y, z, i, j, k})});
                add_product(parts,
                            {Expression::constant(-1), Rdot.at({x, k}), Ev.at({y, z, i, j, k})});
                add_product(parts, {Rq.at({x, i, k}), E.at({y, z, k, j})});
                add_product(parts, {Expression::constant(-1), Rq.at({x, j, k}), E.at({y, z, k, i})});
                add_product(parts, {Rv.at({x, i, k}), Edot.at({y, z, k, j})});
                add_product(parts,
                            {Expression::constant(-1), Rv.at({x, j, k}), Edot.at({y, z, k, i})});
                // (1/2) d/dt of (Rv[x]^{jk} E^{ki} - Rv[x]^{ik} E^{kj})
                add_product(parts, {half, Rvdot.at({x, j, k}), E.at({y, z, k, i})});
                add_product(parts, {half, Rv.at({x, j, k}), Edot.at({y, z, k, i})});
                add_product(parts,
                            {Expression::constant(Rational(-1, 2)), Rvdot.at({x, i, k}), E.at({y, z, k, j})});
                add_product(parts,
                            {Expression::constant(Rational(-1, 2)), Rv.at({x, i, k}), Edot.at({y, z, k, j})});
              }
            }
            if (!parts.empty()) B.at({al, be, ga, i, j}) = third * Expression::sum(std::move(parts));
          }
      }
  return B;
}

}  // namespace

IndexedExpr tensor_T(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  return build_T(spec, pm);
}

IndexedExpr tensor_b(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  return build_b(spec, pm);
}

IndexedExpr tensor_E(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  return build_E(spec, build_b(spec, pm), hessian_of(spec));
}

IndexedExpr tensor_D(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  return build_D(spec, build_b(spec, pm), hessian_of(spec), build_Cp(spec, pm));
}

MRoutes tensor_M(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  const int n = spec.n;
  IndexedExpr W = hessian_of(spec);
  IndexedExpr Wv({n, n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) Wv.at({i, j, k}) = differentiate(W.at({i, j}), spec.v[k]);
  IndexedExpr b = build_b(spec, pm);
  IndexedExpr c3 = build_c3(spec, pm);
  MRoutes out;
  out.P1 = build_P1(spec, W, b);
  out.P2 = build_P2(spec, W, Wv, b, c3);
  out.M = build_M55(spec, b, c3, out.P1, out.P2);
  return out;
}

IndexedExpr tensor_M_from_jets(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  const int n = spec.n, m = spec.m;
  IndexedExpr b = build_b(spec, pm);
  IndexedExpr c3 = build_c3(spec, pm);
  IndexedExpr W = hessian_of(spec);
  IndexedExpr E = build_E(spec, b, W);
  IndexedExpr R = legendre::gauge_generators(spec, pm);
  IndexedExpr Rv({m, n, n});
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) Rv.at({mu, i, k}) = differentiate(R.at({mu, i}), spec.v[k]);
  IndexedExpr Ev({m, m, n, n, n});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            Ev.at({mu, nu, i, j, k}) = differentiate(E.at({mu, nu, i, j}), spec.v[k]);
  return build_M54(spec, b, c3, Ev, Rv);
}

IndexedExpr tensor_A(const ModelSpec& spec, const legendre::PullbackMap& pm) {
  const int n = spec.n, m = spec.m;
  IndexedExpr R = legendre::gauge_generators(spec, pm);
  IndexedExpr T = build_T(spec, pm);
  IndexedExpr Tq({m, m, m, n}), Tv({m, m, m, n});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int g = 0; g < m; ++g)
        for (int k = 0; k < n; ++k) {
          Tq.at({mu, nu, g, k}) = differentiate(T.at({mu, nu, g}), spec.q[k]);
          Tv.at({mu, nu, g, k}) = differentiate(T.at({mu, nu, g}), spec.v[k]);
        }
  IndexedExpr Rdot({m, n});
  JetFamilies fam = spec.jets();
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i) Rdot.at({mu, i}) = total_time_derivative(R.at({mu, i}), fam);
  return build_A(spec, R, Rdot, T, Tq, Tv);
}

IndexedExpr tensor_Bten(const ModelSpec& spec, const legendre::PullbackMap&) {
  // needs the full derivative families anyway; the workspace shares them
  Workspace ws = build_workspace(spec);
  return ws.tensors.Bten;
}

StructureTensors ambiguity_shift(const StructureTensors& tensors, const IndexedExpr& e,
                                 const IndexedExpr& d) {
  const int m = tensors.T.shape()[0];
  const int n = tensors.R.shape()[1];
  // antisymmetry of e in the first index pair, structurally
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int al = 0; al < m; ++al)
        for (int be = 0; be < m; ++be) {
          Expression s = e.at({mu, nu, al, be}) + e.at({nu, mu, al, be});
          if (!s.is_zero())
            throw Error(ErrorCode::StructureSymmetry,
                        "ambiguity shift requires e antisymmetric in its lower index pair");
        }
  StructureTensors out = tensors;
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          std::vector<Expression> parts{tensors.E.at({mu, nu, i, j})};
          for (int al = 0; al < m; ++al)
            for (int be = 0; be < m; ++be) {
              const Expression& coeff = e.at({mu, nu, al, be});
              if (coeff.is_zero()) continue;
              parts.push_back(coeff * tensors.R.at({al, i}) * tensors.R.at({be, j}));
              parts.push_back(-(coeff * tensors.R.at({be, i}) * tensors.R.at({al, j})));
            }
          out.E.at({mu, nu, i, j}) = Expression::sum(std::move(parts));
        }
  for (int al = 0; al < m; ++al)
    for (int be = 0; be < m; ++be)
      for (int ga = 0; ga < m; ++ga)
        for (int i = 0; i < n; ++i)
          for (int rho = 0; rho < m; ++rho) {
            std::vector<Expression> parts{tensors.D.at({al, be, ga, i, rho})};
            for (int de = 0; de < m; ++de) {
              const Expression& coeff = d.at({al, be, ga, rho, de});
              if (coeff.is_zero()) continue;
              parts.push_back(coeff * tensors.R.at({de, i}));
            }
            out.D.at({al, be, ga, i, rho}) = Expression::sum(std::move(parts));
          }
  return out;
}

Workspace build_workspace(const ModelSpec& spec) {
  Workspace ws;
  ws.spec = spec;
  ws.pm = legendre::PullbackMap::from_model(spec);
  const int n = spec.n, m = spec.m;
  const auto& pm = ws.pm;

  ws.W = lagrange::hessian(spec);
  ws.Wv = IndexedExpr({n, n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) ws.Wv.at({i, j, k}) = differentiate(ws.W.at({i, j}), spec.v[k]);
  ws.Lq = IndexedExpr({n});
  for (int i = 0; i < n; ++i) ws.Lq.at({i}) = differentiate(spec.L, spec.q[i]);
  ws.Lqv = IndexedExpr({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      ws.Lqv.at({i, j}) = differentiate(differentiate(spec.L, spec.q[i]), spec.v[j]);
  ws.alpha = lagrange::alpha(spec);
  ws.Bf = lagrange::b_field(spec);
  ws.EL = lagrange::el_residual(spec);

  ws.tensors.R = legendre::gauge_generators(spec, pm);
  ws.Rq = IndexedExpr({m, n, n});
  ws.Rv = IndexedExpr({m, n, n});
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        ws.Rq.at({mu, i, k}) = differentiate(ws.tensors.R.at({mu, i}), spec.q[k]);
        ws.Rv.at({mu, i, k}) = differentiate(ws.tensors.R.at({mu, i}), spec.v[k]);
      }
  ws.Rdot = IndexedExpr({m, n});
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i)
      ws.Rdot.at({mu, i}) = dot_from(ws.Rq, ws.Rv, {mu, i}, spec);
  // d/dt of Rv entries from their q/v derivatives
  {
    IndexedExpr Rvq({m, n, n, n}), Rvv({m, n, n, n});
    for (int mu = 0; mu < m; ++mu)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            Rvq.at({mu, i, k, l}) = differentiate(ws.Rv.at({mu, i, k}), spec.q[l]);
            Rvv.at({mu, i, k, l}) = differentiate(ws.Rv.at({mu, i, k}), spec.v[l]);
          }
    ws.Rvdot = IndexedExpr({m, n, n});
    for (int mu = 0; mu < m; ++mu)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
          ws.Rvdot.at({mu, i, k}) = dot_from(Rvq, Rvv, {mu, i, k}, spec);
  }

  ws.tensors.b = build_b(spec, pm);
  ws.c3 = build_c3(spec, pm);
  ws.Gq = IndexedExpr({m, n});
  ws.Gqp = IndexedExpr({m, n, n});
  for (int mu = 0; mu < m; ++mu)
    for (int k = 0; k < n; ++k) {
      ws.Gq.at({mu, k}) = legendre::pullback(differentiate(spec.G[mu], spec.q[k]), pm);
      for (int i = 0; i < n; ++i)
        ws.Gqp.at({mu, k, i}) = legendre::pullback(
            differentiate(differentiate(spec.G[mu], spec.q[k]), spec.p[i]), pm);
    }

  ws.tensors.T = build_T(spec, pm);
  ws.Tq = IndexedExpr({m, m, m, n});
  ws.Tv = IndexedExpr({m, m, m, n});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int g = 0; g < m; ++g)
        for (int k = 0; k < n; ++k) {
          ws.Tq.at({mu, nu, g, k}) = differentiate(ws.tensors.T.at({mu, nu, g}), spec.q[k]);
          ws.Tv.at({mu, nu, g, k}) = differentiate(ws.tensors.T.at({mu, nu, g}), spec.v[k]);
        }
  ws.Cp = build_Cp(spec, pm);
  ws.Cq = IndexedExpr({m, m, m, n});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int g = 0; g < m; ++g) {
        Expression c = spec.c(mu, nu, g);
        if (c.is_zero()) continue;
        for (int k = 0; k < n; ++k)
          ws.Cq.at({mu, nu, g, k}) = legendre::pullback(differentiate(c, spec.q[k]), pm);
      }

  ws.tensors.E = build_E(spec, ws.tensors.b, ws.W);
  ws.Eq = IndexedExpr({m, m, n, n, n});
  ws.Ev = IndexedExpr({m, m, n, n, n});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            ws.Eq.at({mu, nu, i, j, k}) = differentiate(ws.tensors.E.at({mu, nu, i, j}), spec.q[k]);
            ws.Ev.at({mu, nu, i, j, k}) = differentiate(ws.tensors.E.at({mu, nu, i, j}), spec.v[k]);
          }
  ws.Edot = IndexedExpr({m, m, n, n});
  for (int mu = 0; mu < m; ++mu)
    for (int nu = 0; nu < m; ++nu)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          ws.Edot.at({mu, nu, i, j}) = dot_from(ws.Eq, ws.Ev, {mu, nu, i, j}, spec);

  ws.Gpull = IndexedExpr({m});
  for (int mu = 0; mu < m; ++mu) ws.Gpull.at({mu}) = legendre::pullback(spec.G[mu], pm);
  ws.hc_pull = legendre::pullback(spec.Hc, pm);
  {
    std::vector<Expression> parts;
    for (int i = 0; i < n; ++i)
      parts.push_back(Expression::symbol(spec.v[i]) * differentiate(spec.L, spec.v[i]));
    ws.energy = Expression::sum(std::move(parts)) - spec.L;
  }

  ws.tensors.A = build_A(spec, ws.tensors.R, ws.Rdot, ws.tensors.T, ws.Tq, ws.Tv);
  ws.tensors.Bten = build_Bten(spec, ws.tensors.R, ws.Rq, ws.Rv, ws.Rdot, ws.Rvdot, ws.tensors.T,
                               ws.tensors.E, ws.Eq, ws.Ev, ws.Edot);
  ws.tensors.D = build_D(spec, ws.tensors.b, ws.W, ws.Cp);
  ws.tensors.P1 = build_P1(spec, ws.W, ws.tensors.b);
  ws.tensors.P2 = build_P2(spec, ws.W, ws.Wv, ws.tensors.b, ws.c3);
  ws.tensors.M = build_M55(spec, ws.tensors.b, ws.c3, ws.tensors.P1, ws.tensors.P2);
  ws.M54 = build_M54(spec, ws.tensors.b, ws.c3, ws.Ev, ws.Rv);
  return ws;
}

}  // namespace structure
}  // namespace gsf
