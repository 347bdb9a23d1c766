#include "gsf/verify.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "gsf/numeric.hpp"

namespace gsf {
namespace verify {

namespace {
const std::array<std::array<int, 3>, 3> kCyclic = {{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}};

struct Acc {
  double sum = 0.0, abs = 0.0;
  void add(double t) {
    sum += t;
    abs += std::abs(t);
  }
  double norm() const { return std::abs(sum) / (1.0 + abs); }
};

struct CheckEval {
  double residual = 0.0;
  double scale = 0.0;  // max over index tuples of sum |terms|; 0 marks vacuous
  void update(const Acc& a) {
    residual = std::max(residual, a.norm());
    scale = std::max(scale, a.abs);
  }
  void update_abs(double v) {
    residual = std::max(residual, std::abs(v));
    scale = std::max(scale, std::abs(v));
  }
};
}  // namespace

const std::vector<std::string>& supported_identities() {
  static const std::vector<std::string> ids = {
      "1.23", "1.24", "1.25", "1.27", "1.30", "1.35", "1.37", "1.381", "1.382",
      "1.45", "2.8",  "2.11", "2.15", "2.20", "2.21", "2.22", "2.23",  "2.24",
      "2.26", "2.29", "2.30", "2.31", "2.44", "2.45", "2.47", "2.54=2.55"};
  return ids;
}

const CheckResult* SuiteReport::find(const std::string& id) const {
  for (const auto& c : checks)
    if (c.id == id) return &c;
  return nullptr;
}

struct Verifier::PointData {
  int n = 0, m = 0;
  std::vector<double> v, acc;
  NumericTensor W, Lq, Lqv, alpha, Bf, EL;
  NumericTensor R, Rq, Rv, Rdot;
  NumericTensor b, Gq, Gqp, Gpull;
  NumericTensor T, Tq, Tv, Cp, Cq;
  NumericTensor E, Ev, D;  // effective (possibly shifted)
  NumericTensor Dc;        // canonical, used by the fourth-order relation
  NumericTensor A, Bten, M55, M54;
  std::vector<double> pulledGG, pulledHG, comb29, dbl26;
};

// Shifted E/D and the velocity derivative of the shifted E, built once per
// suite run when an ambiguity shift is requested.
struct Verifier::ShiftCache {
  IndexedExpr E, Ev, D;
};

Verifier::Verifier(const ModelSpec& parsed) : parsed_(parsed) {
  ModelSpec eff = parsed;
  if (parsed.has_rebase()) {
    auto pts = sample_points(parsed, 16, 42);
    eff = hamilton::effective_model(parsed, pts);
  }
  ws_ = structure::build_workspace(eff);
  const ModelSpec& spec = ws_.spec;
  brackets_ = hamilton::constraint_brackets(spec);
  for (int mu = 0; mu < spec.m; ++mu)
    for (int nu = mu + 1; nu < spec.m; ++nu)
      pulled_gg_.push_back(legendre::pullback(brackets_.at(mu, nu), ws_.pm));
  for (int mu = 0; mu < spec.m; ++mu)
    pulled_hg_.push_back(
        legendre::pullback(hamilton::poisson_bracket(spec, spec.Hc, spec.G[mu]), ws_.pm));
  for (int a = 0; a < spec.m; ++a)
    for (int b = 0; b < spec.m; ++b)
      for (int c = 0; c < spec.m; ++c)
        for (int eta = 0; eta < spec.m; ++eta) {
          std::array<int, 3> idx = {a, b, c};
          std::vector<Expression> parts;
          for (const auto& cyc : kCyclic) {
            int x = idx[cyc[0]], y = idx[cyc[1]], z = idx[cyc[2]];
            Expression cb = hamilton::poisson_bracket(spec, spec.c(x, y, eta), spec.G[z]);
            if (!cb.is_zero()) parts.push_back(cb);
            for (int dd = 0; dd < spec.m; ++dd) {
              Expression prod = spec.c(x, y, dd) * spec.c(z, dd, eta);
              if (!prod.is_zero()) parts.push_back(-prod);
            }
          }
          Expression e = Expression::sum(std::move(parts));
          if (!e.is_zero()) comb29_.push_back(legendre::pullback(e, ws_.pm));
        }
  for (int a = 0; a < spec.m; ++a)
    for (int b = a + 1; b < spec.m; ++b)
      for (int c = b + 1; c < spec.m; ++c) {
        Expression e = hamilton::poisson_bracket(spec, brackets_.at(a, b), spec.G[c]) +
                       hamilton::poisson_bracket(spec, brackets_.at(b, c), spec.G[a]) +
                       hamilton::poisson_bracket(spec, brackets_.at(c, a), spec.G[b]);
        dbl_brackets_.push_back(e);
        pulled_dbl_.push_back(legendre::pullback(e, ws_.pm));
      }
}

void Verifier::eval_point(const SamplePoint& pt, PointData& out, const ShiftCache* shift) const {
  const ModelSpec& spec = ws_.spec;
  out.n = spec.n;
  out.m = spec.m;
  out.v = pt.v;
  out.acc = pt.a;
  thread_local Evaluator ev;
  ev.begin_point();
  bind_point(ev, spec, pt);
  out.W = NumericTensor::evaluate(ws_.W, ev);
  out.Lq = NumericTensor::evaluate(ws_.Lq, ev);
  out.Lqv = NumericTensor::evaluate(ws_.Lqv, ev);
  out.alpha = NumericTensor::evaluate(ws_.alpha, ev);
  out.Bf = NumericTensor::evaluate(ws_.Bf, ev);
  out.EL = NumericTensor::evaluate(ws_.EL, ev);
  out.R = NumericTensor::evaluate(ws_.tensors.R, ev);
  out.Rq = NumericTensor::evaluate(ws_.Rq, ev);
  out.Rv = NumericTensor::evaluate(ws_.Rv, ev);
  out.Rdot = NumericTensor::evaluate(ws_.Rdot, ev);
  out.b = NumericTensor::evaluate(ws_.tensors.b, ev);
  out.Gq = NumericTensor::evaluate(ws_.Gq, ev);
  out.Gqp = NumericTensor::evaluate(ws_.Gqp, ev);
  out.Gpull = NumericTensor::evaluate(ws_.Gpull, ev);
  out.T = NumericTensor::evaluate(ws_.tensors.T, ev);
  out.Tq = NumericTensor::evaluate(ws_.Tq, ev);
  out.Tv = NumericTensor::evaluate(ws_.Tv, ev);
  out.Cp = NumericTensor::evaluate(ws_.Cp, ev);
  out.Cq = NumericTensor::evaluate(ws_.Cq, ev);
  out.A = NumericTensor::evaluate(ws_.tensors.A, ev);
  out.Bten = NumericTensor::evaluate(ws_.tensors.Bten, ev);
  out.M55 = NumericTensor::evaluate(ws_.tensors.M, ev);
  out.M54 = NumericTensor::evaluate(ws_.M54, ev);
  out.Dc = NumericTensor::evaluate(ws_.tensors.D, ev);
  out.pulledGG.clear();
  for (const auto& e : pulled_gg_) out.pulledGG.push_back(ev.eval(e));
  out.pulledHG.clear();
  for (const auto& e : pulled_hg_) out.pulledHG.push_back(ev.eval(e));
  out.comb29.clear();
  for (const auto& e : comb29_) out.comb29.push_back(ev.eval(e));
  out.dbl26.clear();
  for (const auto& e : pulled_dbl_) out.dbl26.push_back(ev.eval(e));
  if (shift) {
    out.E = NumericTensor::evaluate(shift->E, ev);
    out.Ev = NumericTensor::evaluate(shift->Ev, ev);
    out.D = NumericTensor::evaluate(shift->D, ev);
  } else {
    out.E = NumericTensor::evaluate(ws_.tensors.E, ev);
    out.Ev = NumericTensor::evaluate(ws_.Ev, ev);
    out.D = out.Dc;
  }
}

std::pair<double, double> Verifier::check_at(const std::string& id, const PointData& pd) const {
  CheckEval ce;
  const int n = pd.n, m = pd.m;
  const auto& W = pd.W;
  const auto& R = pd.R;
  const auto& Rq = pd.Rq;
  const auto& Rv = pd.Rv;
  const auto& E = pd.E;
  const auto& T = pd.T;
  const auto& D = pd.D;

  if (id == "1.23") {
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu)
        for (int i = 0; i < n; ++i) {
          Acc a;
          for (int j = 0; j < n; ++j) {
            a.add(Rq.at({mu, i, j}) * R.at({nu, j}));
            a.add(-Rq.at({nu, i, j}) * R.at({mu, j}));
            for (int k = 0; k < n; ++k) {
              a.add(Rv.at({mu, i, j}) * Rq.at({nu, j, k}) * pd.v[k]);
              a.add(-Rv.at({nu, i, j}) * Rq.at({mu, j, k}) * pd.v[k]);
            }
          }
          for (int g = 0; g < m; ++g) a.add(-T.at({mu, nu, g}) * R.at({g, i}));
          for (int j = 0; j < n; ++j) a.add(E.at({mu, nu, i, j}) * pd.alpha.at({j}));
          ce.update(a);
        }
  } else if (id == "1.24") {
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu)
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) {
            Acc a;
            for (int j = 0; j < n; ++j) {
              a.add(Rv.at({mu, i, j}) * Rv.at({nu, j, k}));
              a.add(-Rv.at({nu, i, j}) * Rv.at({mu, j, k}));
              a.add(-E.at({mu, nu, i, j}) * W.at({j, k}));
            }
            ce.update(a);
          }
  } else if (id == "1.25") {
    for (int mu = 0; mu < m; ++mu)
      for (int nu = 0; nu < m; ++nu)
        for (int i = 0; i < n; ++i) {
          Acc a;
          for (int j = 0; j < n; ++j) a.add(Rv.at({mu, i, j}) * R.at({nu, j}));
          ce.update(a);
        }
  } else if (id == "1.27") {
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu)
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) {
            Acc a;
            for (int j = 0; j < n; ++j) {
              a.add(E.at({mu, nu, i, j}) * W.at({j, k}));
              for (int mm = 0; mm < n; ++mm)
                for (int nn = 0; nn < n; ++nn) {
                  a.add(-pd.b.at({mu, i, mm}) * W.at({mm, nn}) * pd.b.at({nu, nn, j}) *
                        W.at({j, k}));
                  a.add(pd.b.at({nu, i, mm}) * W.at({mm, nn}) * pd.b.at({mu, nn, j}) *
                        W.at({j, k}));
                }
            }
            ce.update(a);
          }
  } else if (id == "1.30") {
    for (int al = 0; al < m; ++al)
      for (int be = 0; be < m; ++be)
        for (int ga = 0; ga < m; ++ga) {
          std::array<int, 3> idx = {al, be, ga};
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
              Acc a;
              for (const auto& cyc : kCyclic) {
                int x = idx[cyc[0]], y = idx[cyc[1]], z = idx[cyc[2]];
                for (int k = 0; k < n; ++k) {
                  a.add(Rv.at({x, i, k}) * E.at({y, z, k, j}));
                  a.add(Rv.at({x, j, k}) * E.at({y, z, k, i}));
                }
              }
              ce.update(a);
            }
        }
  } else if (id == "1.35") {
    for (int al = 0; al < m; ++al)
      for (int be = 0; be < m; ++be)
        for (int ga = 0; ga < m; ++ga)
          for (int i = 0; i < n; ++i) {
            Acc a;
            for (int eta = 0; eta < m; ++eta)
              for (int k = 0; k < n; ++k) {
                a.add(-R.at({eta, i}) * R.at({al, k}) * pd.Tv.at({be, ga, eta, k}));
                a.add(-Rv.at({eta, i, k}) * R.at({al, k}) * T.at({be, ga, eta}));
              }
            for (int j = 0; j < n; ++j) {
              double lj = pd.EL.at({j});
              for (int k = 0; k < n; ++k) {
                a.add(Rv.at({be, i, k}) * E.at({ga, al, k, j}) * lj);
                a.add(Rv.at({ga, i, k}) * E.at({al, be, k, j}) * lj);
                a.add(Rv.at({al, j, k}) * E.at({be, ga, k, i}) * lj);
                a.add(-R.at({al, k}) * pd.Ev.at({be, ga, i, j, k}) * lj);
              }
            }
            ce.update(a);
          }
  } else if (id == "1.37") {
    for (int al = 0; al < m; ++al)
      for (int be = 0; be < m; ++be)
        for (int ga = 0; ga < m; ++ga)
          for (int i = 0; i < n; ++i) {
            Acc a;
            for (int rho = 0; rho < m; ++rho) a.add(R.at({rho, i}) * pd.A.at({al, be, ga, rho}));
            for (int j = 0; j < n; ++j) a.add(pd.Bten.at({al, be, ga, i, j}) * pd.EL.at({j}));
            ce.update(a);
          }
  } else if (id == "1.381") {
    for (int al = 0; al < m; ++al)
      for (int be = 0; be < m; ++be)
        for (int ga = 0; ga < m; ++ga) {
          std::array<int, 3> idx = {al, be, ga};
          for (int rho = 0; rho < m; ++rho) {
            Acc a;
            for (const auto& cyc : kCyclic) {
              int x = idx[cyc[0]], y = idx[cyc[1]], z = idx[cyc[2]];
              for (int eta = 0; eta < m; ++eta)
                a.add(T.at({x, eta, rho}) * T.at({y, z, eta}) / 3.0);
              for (int j = 0; j < n; ++j) {
                a.add(-R.at({x, j}) * pd.Tq.at({y, z, rho, j}) / 3.0);
                for (int l = 0; l < n; ++l)
                  a.add(-Rq.at({x, j, l}) * pd.Tv.at({y, z, rho, j}) * pd.v[l] / 3.0);
              }
            }
            for (int i = 0; i < n; ++i) a.add(D.at({al, be, ga, i, rho}) * pd.alpha.at({i}));
            ce.update(a);
          }
        }
  } else if (id == "1.382") {
    for (int al = 0; al < m; ++al)
      for (int be = 0; be < m; ++be)
        for (int ga = 0; ga < m; ++ga) {
          std::array<int, 3> idx = {al, be, ga};
          for (int rho = 0; rho < m; ++rho)
            for (int k = 0; k < n; ++k) {
              Acc a;
              for (const auto& cyc : kCyclic) {
                int x = idx[cyc[0]], y = idx[cyc[1]], z = idx[cyc[2]];
                for (int j = 0; j < n; ++j)
                  a.add(-Rv.at({x, j, k}) * pd.Tv.at({y, z, rho, j}) / 3.0);
              }
              for (int i = 0; i < n; ++i) a.add(-D.at({al, be, ga, i, rho}) * W.at({i, k}));
              ce.update(a);
            }
        }
  } else if (id == "1.45") {
    for (int al = 0; al < m; ++al)
      for (int be = 0; be < m; ++be)
        for (int ga = 0; ga < m; ++ga)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
              Acc a;
              for (int rho = 0; rho < m; ++rho) {
                a.add(R.at({rho, i}) * pd.Dc.at({al, be, ga, j, rho}));
                a.add(-R.at({rho, j}) * pd.Dc.at({al, be, ga, i, rho}));
              }
              a.add(pd.Bten.at({al, be, ga, i, j}));
              for (int k = 0; k < n; ++k)
                a.add(-pd.M55.at({al, be, ga, i, j, k}) * pd.EL.at({k}));
              ce.update(a);
            }
  } else if (id == "2.8") {
    for (int mu = 0; mu < m; ++mu) ce.update_abs(pd.Gpull.at({mu}));
  } else if (id == "2.11") {
    for (int mu = 0; mu < m; ++mu)
      for (int i = 0; i < n; ++i) {
        Acc a;
        a.add(pd.Gq.at({mu, i}));
        for (int j = 0; j < n; ++j) a.add(R.at({mu, j}) * pd.Lqv.at({i, j}));
        ce.update(a);
      }
  } else if (id == "2.15") {
    int k = 0;
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu, ++k) {
        Acc a;
        a.add(pd.pulledGG[k]);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) a.add(R.at({mu, i}) * pd.Bf.at({i, j}) * R.at({nu, j}));
        ce.update(a);
      }
  } else if (id == "2.20") {
    for (int al = 0; al < m; ++al)
      for (int j = 0; j < n; ++j) {
        Acc a;
        for (int i = 0; i < n; ++i) {
          a.add(Rv.at({al, i, j}) * pd.alpha.at({i}));
          a.add(-R.at({al, i}) * pd.Bf.at({i, j}));
          for (int l = 0; l < n; ++l) a.add(pd.v[l] * Rq.at({al, i, l}) * W.at({i, j}));
        }
        ce.update(a);
      }
  } else if (id == "2.21") {
    for (int al = 0; al < m; ++al)
      for (int be = 0; be < m; ++be) {
        Acc a;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) a.add(R.at({al, i}) * pd.Bf.at({i, j}) * R.at({be, j}));
        ce.update(a);
      }
  } else if (id == "2.22") {
    for (double gg : pd.pulledGG) ce.update_abs(gg);
  } else if (id == "2.23") {
    for (double hg : pd.pulledHG) ce.update_abs(hg);
  } else if (id == "2.24") {
    // on-surface closure; run_suite adds the off-surface sweep
    int k = 0;
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu, ++k) {
        Acc a;
        a.add(pd.pulledGG[k]);
        for (int g = 0; g < m; ++g) a.add(-T.at({mu, nu, g}) * pd.Gpull.at({g}));
        ce.update(a);
      }
  } else if (id == "2.26") {
    // on-surface values; run_suite additionally sweeps off-surface points
    for (double dval : pd.dbl26) ce.update_abs(dval);
  } else if (id == "2.29") {
    for (double cval : pd.comb29) ce.update_abs(cval);
  } else if (id == "2.30") {
    for (int mu = 0; mu < m; ++mu)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          Acc a;
          a.add(Rv.at({mu, i, k}));
          for (int l = 0; l < n; ++l) a.add(-W.at({k, l}) * pd.b.at({mu, l, i}));
          ce.update(a);
        }
  } else if (id == "2.31") {
    for (int mu = 0; mu < m; ++mu)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          Acc a;
          a.add(Rq.at({mu, i, k}));
          a.add(-pd.Gqp.at({mu, k, i}));
          for (int l = 0; l < n; ++l) a.add(-pd.Lqv.at({k, l}) * pd.b.at({mu, l, i}));
          ce.update(a);
        }
  } else if (id == "2.44") {
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu)
        for (int g = 0; g < m; ++g)
          for (int j = 0; j < n; ++j) {
            Acc a;
            a.add(pd.Tq.at({mu, nu, g, j}));
            a.add(-pd.Cq.at({mu, nu, g, j}));
            for (int k = 0; k < n; ++k) a.add(-pd.Lqv.at({j, k}) * pd.Cp.at({mu, nu, g, k}));
            ce.update(a);
          }
  } else if (id == "2.45") {
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu)
        for (int g = 0; g < m; ++g)
          for (int j = 0; j < n; ++j) {
            Acc a;
            a.add(pd.Tv.at({mu, nu, g, j}));
            for (int k = 0; k < n; ++k) a.add(-W.at({j, k}) * pd.Cp.at({mu, nu, g, k}));
            ce.update(a);
          }
  } else if (id == "2.47") {
    for (int al = 0; al < m; ++al)
      for (int j = 0; j < n; ++j) {
        Acc a;
        a.add(pd.Rdot.at({al, j}));
        for (int l = 0; l < n; ++l) {
          a.add(-pd.Gqp.at({al, l, j}) * pd.v[l]);
          a.add(-pd.b.at({al, j, l}) * pd.Lq.at({l}));
          a.add(-pd.b.at({al, j, l}) * pd.EL.at({l}));
        }
        ce.update(a);
      }
  } else if (id == "2.54=2.55") {
    for (size_t i = 0; i < pd.M55.size(); ++i) {
      Acc a;
      a.add(pd.M54.flat_at(i));
      a.add(-pd.M55.flat_at(i));
      ce.update(a);
    }
  } else {
    throw Error(ErrorCode::Usage, "unknown identity id '" + id + "'");
  }
  return {ce.residual, ce.scale};
}

double Verifier::identity_residual(const std::string& id, const SamplePoint& pt) const {
  // validate the id before paying for the evaluation
  bool known = false;
  for (const auto& s : supported_identities())
    if (s == id) known = true;
  if (!known) throw Error(ErrorCode::Usage, "unknown identity id '" + id + "'");
  PointData pd;
  eval_point(pt, pd, nullptr);
  return check_at(id, pd).first;
}

SuiteReport Verifier::run_suite(const SuiteOptions& opts) const {
  const ModelSpec& spec = ws_.spec;
  auto points = sample_points(spec, opts.count, opts.seed);
  auto phase = sample_phase_points(spec, opts.count, opts.seed);

  std::optional<ShiftCache> shift;
  if (opts.shift) {
    structure::StructureTensors shifted =
        structure::ambiguity_shift(ws_.tensors, opts.shift->e, opts.shift->d);
    ShiftCache sc;
    sc.E = shifted.E;
    sc.D = shifted.D;
    sc.Ev = IndexedExpr({spec.m, spec.m, spec.n, spec.n, spec.n});
    for (int mu = 0; mu < spec.m; ++mu)
      for (int nu = 0; nu < spec.m; ++nu)
        for (int i = 0; i < spec.n; ++i)
          for (int j = 0; j < spec.n; ++j)
            for (int k = 0; k < spec.n; ++k)
              sc.Ev.at({mu, nu, i, j, k}) =
                  differentiate(sc.E.at({mu, nu, i, j}), spec.v[k]);
    shift = std::move(sc);
  }

  SuiteReport rep;
  rep.model = spec.name;
  rep.seed = opts.seed;
  rep.points = opts.count;
  rep.tolerance = opts.tol;

  const auto& ids = supported_identities();
  std::vector<CheckEval> evals(ids.size());

  PointData pd;
  for (const auto& pt : points) {
    eval_point(pt, pd, shift ? &*shift : nullptr);
    for (size_t k = 0; k < ids.size(); ++k) {
      auto [res, scale] = check_at(ids[k], pd);
      evals[k].residual = std::max(evals[k].residual, res);
      evals[k].scale = std::max(evals[k].scale, scale);
    }
    rep.max_T = std::max(rep.max_T, pd.T.max_abs());
    rep.max_E = std::max(rep.max_E, pd.E.max_abs());
    rep.max_D = std::max(rep.max_D, pd.D.max_abs());
    rep.max_M = std::max(rep.max_M, pd.M55.max_abs());
  }

  // off-surface closure (2.24) and Jacobi double bracket (2.26)
  {
    size_t i24 = 0, i26 = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      if (ids[k] == "2.24") i24 = k;
      if (ids[k] == "2.26") i26 = k;
    }
    const std::vector<Expression>& dbl = dbl_brackets_;
    Evaluator ev;
    for (const auto& pp : phase) {
      ev.begin_point();
      for (int i = 0; i < spec.n; ++i) {
        ev.bind(spec.q[i], pp.q[i]);
        ev.bind(spec.p[i], pp.p[i]);
      }
      for (int mu = 0; mu < spec.m; ++mu)
        for (int nu = mu + 1; nu < spec.m; ++nu) {
          Acc a;
          a.add(ev.eval(brackets_.at(mu, nu)));
          for (int g = 0; g < spec.m; ++g)
            a.add(-ev.eval(spec.c(mu, nu, g)) * ev.eval(spec.G[g]));
          evals[i24].residual = std::max(evals[i24].residual, a.norm());
          evals[i24].scale = std::max(evals[i24].scale, a.abs);
        }
      for (const auto& e : dbl) {
        double val = ev.eval(e);
        evals[i26].residual = std::max(evals[i26].residual, std::abs(val));
        evals[i26].scale = std::max(evals[i26].scale, std::abs(val));
      }
    }
  }

  rep.passed = true;
  for (size_t k = 0; k < ids.size(); ++k) {
    CheckResult cr;
    cr.id = ids[k];
    cr.max_residual = evals[k].residual;
    cr.scale = (ids[k] == "2.8" || ids[k] == "2.22" || ids[k] == "2.23" || ids[k] == "2.26" ||
                ids[k] == "2.29")
                   ? "abs"
                   : "normalized";
    cr.vacuous = evals[k].scale == 0.0;
    cr.passed = cr.vacuous || cr.max_residual <= opts.tol;
    if (!cr.vacuous && !cr.passed) rep.passed = false;
    rep.checks.push_back(std::move(cr));
  }
  return rep;
}

std::string SuiteReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["seed"] = seed;
  j["points"] = points;
  j["tolerance"] = tolerance;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    nlohmann::ordered_json cj;
    cj["id"] = c.id;
    cj["max_residual"] = c.max_residual;
    cj["passed"] = c.passed;
    cj["vacuous"] = c.vacuous;
    j["checks"].push_back(cj);
  }
  j["tensor_magnitudes"] = {{"T", max_T}, {"E", max_E}, {"D", max_D}, {"M", max_M}};
  j["passed"] = passed;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// finite-difference oracle

namespace {
double fd_step(double x) { return 1e-5 * std::max(1.0, std::abs(x)); }

struct OracleAcc {
  double worst = 0.0;
  double max_scale = 0.0;
  void add(double sym, double fd) {
    worst = std::max(worst, std::abs(sym - fd) / (1.0 + std::max(std::abs(sym), std::abs(fd))));
    max_scale = std::max(max_scale, std::max(std::abs(sym), std::abs(fd)));
  }
};
}  // namespace

std::vector<CheckResult> Verifier::fd_oracle(uint64_t seed, int count,
                                             const std::optional<Corruption>& corrupt,
                                             double fd_tol) const {
  const ModelSpec& spec = ws_.spec;
  const int n = spec.n, m = spec.m;
  auto points = sample_points(spec, count, seed);

  std::vector<std::string> family_names;
  std::vector<OracleAcc> accs;
  auto family_index = [&](const std::string& name) {
    for (size_t i = 0; i < family_names.size(); ++i)
      if (family_names[i] == name) return i;
    family_names.push_back(name);
    accs.emplace_back();
    return family_names.size() - 1;
  };
  auto record = [&](const std::string& family, size_t entry, double sym, double fd) {
    if (corrupt && corrupt->family == family && corrupt->index == entry) sym += corrupt->delta;
    accs[family_index(family)].add(sym, fd);
  };

  Evaluator ev;
  Bindings bnd;

  for (const auto& pt : points) {
    // bind once for the symbolic side
    ev.begin_point();
    bind_point(ev, spec, pt);

    std::vector<double> mom(n);
    for (int i = 0; i < n; ++i) mom[i] = ev.eval(ws_.pm.assignments.at(spec.p[i]));

    // -- phase-space functions: FD in (q, p) at the pulled-back momenta
    auto bind_qp = [&](const std::vector<double>& q, const std::vector<double>& p) {
      bnd.clear();
      for (int i = 0; i < n; ++i) {
        bnd.set(spec.q[i], q[i]);
        bnd.set(spec.p[i], p[i]);
      }
    };
    auto fd_qp = [&](const Expression& f, bool in_p, int dir, const std::vector<double>& q0,
                     const std::vector<double>& p0) {
      std::vector<double> q = q0, p = p0;
      double& x = in_p ? p[dir] : q[dir];
      double h = fd_step(x);
      double keep = x;
      x = keep + h;
      bind_qp(q, p);
      double fp = evaluate(f, bnd);
      x = keep - h;
      bind_qp(q, p);
      double fm = evaluate(f, bnd);
      return (fp - fm) / (2 * h);
    };
    auto fd2_qp = [&](const Expression& f, bool p1_, int d1, bool p2_, int d2,
                      const std::vector<double>& q0, const std::vector<double>& p0) {
      std::vector<double> q = q0, p = p0;
      double& x1 = p1_ ? p[d1] : q[d1];
      double h1 = fd_step(x1);
      if (p1_ == p2_ && d1 == d2) {
        double keep = x1;
        bind_qp(q0, p0);
        double f0 = evaluate(f, bnd);
        x1 = keep + 2 * h1;
        bind_qp(q, p);
        double fp = evaluate(f, bnd);
        x1 = keep - 2 * h1;
        bind_qp(q, p);
        double fm = evaluate(f, bnd);
        return (fp - 2 * f0 + fm) / (4 * h1 * h1);
      }
      double& x2 = p2_ ? p[d2] : q[d2];
      double h2 = fd_step(x2);
      double k1 = x1, k2 = x2;
      double s = 0.0;
      x1 = k1 + h1;
      x2 = k2 + h2;
      bind_qp(q, p);
      s += evaluate(f, bnd);
      x2 = k2 - h2;
      bind_qp(q, p);
      s -= evaluate(f, bnd);
      x1 = k1 - h1;
      x2 = k2 + h2;
      bind_qp(q, p);
      s -= evaluate(f, bnd);
      x2 = k2 - h2;
      bind_qp(q, p);
      s += evaluate(f, bnd);
      return s / (4 * h1 * h2);
    };

    for (int mu = 0; mu < m; ++mu) {
      for (int i = 0; i < n; ++i) {
        record("dG/dp", static_cast<size_t>(mu) * n + i, ev.eval(ws_.tensors.R.at({mu, i})),
               fd_qp(spec.G[mu], true, i, pt.q, mom));
        record("dG/dq", static_cast<size_t>(mu) * n + i, ev.eval(ws_.Gq.at({mu, i})),
               fd_qp(spec.G[mu], false, i, pt.q, mom));
        for (int k = i; k < n; ++k)
          record("d2G/dpdp", (static_cast<size_t>(mu) * n + i) * n + k,
                 ev.eval(ws_.tensors.b.at({mu, i, k})),
                 fd2_qp(spec.G[mu], true, i, true, k, pt.q, mom));
        for (int k = 0; k < n; ++k)
          record("d2G/dqdp", (static_cast<size_t>(mu) * n + k) * n + i,
                 ev.eval(ws_.Gqp.at({mu, k, i})),
                 fd2_qp(spec.G[mu], false, k, true, i, pt.q, mom));
      }
    }
    for (int i = 0; i < n; ++i) {
      record("dHc/dp", static_cast<size_t>(i),
             ev.eval(legendre::pullback(differentiate(spec.Hc, spec.p[i]), ws_.pm)),
             fd_qp(spec.Hc, true, i, pt.q, mom));
      record("dHc/dq", static_cast<size_t>(i),
             ev.eval(legendre::pullback(differentiate(spec.Hc, spec.q[i]), ws_.pm)),
             fd_qp(spec.Hc, false, i, pt.q, mom));
    }
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu)
        for (int g = 0; g < m; ++g) {
          Expression c = spec.c(mu, nu, g);
          if (c.is_zero()) continue;
          for (int k = 0; k < n; ++k) {
            size_t idx = ((static_cast<size_t>(mu) * m + nu) * m + g) * n + k;
            record("dC/dp", idx, ev.eval(ws_.Cp.at({mu, nu, g, k})),
                   fd_qp(c, true, k, pt.q, mom));
            record("dC/dq", idx, ev.eval(ws_.Cq.at({mu, nu, g, k})),
                   fd_qp(c, false, k, pt.q, mom));
          }
        }

    // -- velocity-space parents: FD of evaluated entries in q or v
    auto bind_shifted = [&](int dir, bool in_v, double delta) {
      bnd.clear();
      for (int i = 0; i < n; ++i) {
        bnd.set(spec.q[i], pt.q[i] + ((!in_v && i == dir) ? delta : 0.0));
        bnd.set(spec.v[i], pt.v[i] + ((in_v && i == dir) ? delta : 0.0));
        bnd.set(spec.a[i], pt.a[i]);
      }
    };
    auto fd_qv = [&](const Expression& f, bool in_v, int dir) {
      double x = in_v ? pt.v[dir] : pt.q[dir];
      double h = fd_step(x);
      bind_shifted(dir, in_v, h);
      double fp = evaluate(f, bnd);
      bind_shifted(dir, in_v, -h);
      double fm = evaluate(f, bnd);
      return (fp - fm) / (2 * h);
    };
    auto fd2_qv = [&](const Expression& f, bool v1_, int d1, bool v2_, int d2) {
      // mixed and nested second differences on (q, v)
      auto set2 = [&](double e1, double e2) {
        bnd.clear();
        for (int i = 0; i < n; ++i) {
          double dq = 0.0, dv = 0.0;
          if (!v1_ && i == d1) dq += e1;
          if (!v2_ && i == d2) dq += e2;
          if (v1_ && i == d1) dv += e1;
          if (v2_ && i == d2) dv += e2;
          bnd.set(spec.q[i], pt.q[i] + dq);
          bnd.set(spec.v[i], pt.v[i] + dv);
          bnd.set(spec.a[i], pt.a[i]);
        }
      };
      double x1 = v1_ ? pt.v[d1] : pt.q[d1];
      double h1 = fd_step(x1);
      if (v1_ == v2_ && d1 == d2) {
        set2(0, 0);
        double f0 = evaluate(f, bnd);
        set2(2 * h1, 0);
        double fp = evaluate(f, bnd);
        set2(-2 * h1, 0);
        double fm = evaluate(f, bnd);
        return (fp - 2 * f0 + fm) / (4 * h1 * h1);
      }
      double x2 = v2_ ? pt.v[d2] : pt.q[d2];
      double h2 = fd_step(x2);
      double s = 0.0;
      set2(h1, h2);
      s += evaluate(f, bnd);
      set2(h1, -h2);
      s -= evaluate(f, bnd);
      set2(-h1, h2);
      s -= evaluate(f, bnd);
      set2(-h1, -h2);
      s += evaluate(f, bnd);
      return s / (4 * h1 * h2);
    };

    for (int i = 0; i < n; ++i) {
      record("dL/dv", static_cast<size_t>(i), mom[i], fd_qv(spec.L, true, i));
      record("dL/dq", static_cast<size_t>(i), ev.eval(ws_.Lq.at({i})), fd_qv(spec.L, false, i));
      for (int j = i; j < n; ++j)
        record("W", static_cast<size_t>(i) * n + j, ev.eval(ws_.W.at({i, j})),
               fd2_qv(spec.L, true, i, true, j));
      for (int j = 0; j < n; ++j)
        record("d2L/dqdv", static_cast<size_t>(i) * n + j, ev.eval(ws_.Lqv.at({i, j})),
               fd2_qv(spec.L, false, i, true, j));
    }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int k = 0; k < n; ++k)
          record("dW/dv", (static_cast<size_t>(i) * n + j) * n + k,
                 ev.eval(ws_.Wv.at({i, j, k})), fd_qv(ws_.W.at({i, j}), true, k));
    for (int mu = 0; mu < m; ++mu)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          size_t idx = (static_cast<size_t>(mu) * n + i) * n + k;
          record("dR/dq", idx, ev.eval(ws_.Rq.at({mu, i, k})),
                 fd_qv(ws_.tensors.R.at({mu, i}), false, k));
          record("dR/dv", idx, ev.eval(ws_.Rv.at({mu, i, k})),
                 fd_qv(ws_.tensors.R.at({mu, i}), true, k));
        }
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu)
        for (int g = 0; g < m; ++g) {
          if (ws_.tensors.T.at({mu, nu, g}).is_zero()) continue;
          for (int k = 0; k < n; ++k) {
            size_t idx = ((static_cast<size_t>(mu) * m + nu) * m + g) * n + k;
            record("dT/dq", idx, ev.eval(ws_.Tq.at({mu, nu, g, k})),
                   fd_qv(ws_.tensors.T.at({mu, nu, g}), false, k));
            record("dT/dv", idx, ev.eval(ws_.Tv.at({mu, nu, g, k})),
                   fd_qv(ws_.tensors.T.at({mu, nu, g}), true, k));
          }
        }
    for (int mu = 0; mu < m; ++mu)
      for (int nu = mu + 1; nu < m; ++nu)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const Expression& entry = ws_.tensors.E.at({mu, nu, i, j});
            if (entry.is_zero()) continue;
            for (int k = 0; k < n; ++k)
              record("dE/dv", ((static_cast<size_t>(mu) * m + nu) * n + i) * n * n + j * n + k,
                     ev.eval(ws_.Ev.at({mu, nu, i, j, k})), fd_qv(entry, true, k));
          }
  }

  std::vector<CheckResult> out;
  for (size_t i = 0; i < family_names.size(); ++i) {
    CheckResult cr;
    cr.id = family_names[i];
    cr.max_residual = accs[i].worst;
    cr.scale = "fd-normalized";
    cr.vacuous = accs[i].max_scale == 0.0 && accs[i].worst == 0.0;
    cr.passed = cr.max_residual <= fd_tol;
    out.push_back(std::move(cr));
  }
  return out;
}

}  // namespace verify
}  // namespace gsf
