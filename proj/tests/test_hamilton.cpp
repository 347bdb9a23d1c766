#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "gsf/hamilton.hpp"

using namespace gsf;

namespace {
std::string slurp(const std::string& rel) {
  std::ifstream f(std::string(GSF_CORPUS_DIR) + "/" + rel);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}
ModelSpec load(const std::string& rel) { return parse_model(slurp(rel)); }
}  // namespace

TEST_CASE("Poisson bracket basics") {
  ModelSpec spec = load("free-sqrt.gsf");
  Expression q1 = Expression::symbol(spec.q[0]);
  Expression p1 = Expression::symbol(spec.p[0]);
  Expression p2 = Expression::symbol(spec.p[1]);

  SUBCASE("canonical pair") {
    CHECK(hamilton::poisson_bracket(spec, q1, p1).is_one());
  }
  SUBCASE("monomial against a coordinate") {
    Expression br = hamilton::poisson_bracket(spec, p1 * p2, q1);
    Bindings b;
    b.set(spec.p[1], 0.5);
    CHECK(evaluate(br, b) == doctest::Approx(-0.5));  // -p2
  }
  SUBCASE("antisymmetry kills the diagonal") {
    Expression f = p1 * p1 + q1 * q1;
    CHECK(hamilton::poisson_bracket(spec, f, f).is_zero());
  }
}

TEST_CASE("bracket bilinearity and Leibniz on random polynomials") {
  ModelSpec spec = load("double-root.gsf");
  std::mt19937_64 rng(8675309);
  auto upick = [&](int k) { return static_cast<int>(rng() % static_cast<uint64_t>(k)); };
  auto rnd_poly = [&]() {
    std::vector<Expression> terms;
    int nterms = 1 + upick(3);
    for (int t = 0; t < nterms; ++t) {
      std::vector<Expression> factors;
      factors.push_back(Expression::constant(Rational(1 + upick(5), 1 + upick(3))));
      int nf = 1 + upick(3);
      for (int f = 0; f < nf; ++f) {
        int i = upick(4);
        factors.push_back(upick(2) ? Expression::symbol(spec.q[i])
                                   : Expression::symbol(spec.p[i]));
      }
      terms.push_back(Expression::product(factors));
    }
    return Expression::sum(terms);
  };
  auto rnd_bindings = [&]() {
    Bindings b;
    for (int i = 0; i < 4; ++i) {
      b.set(spec.q[i], -2.0 + 4.0 * ((rng() >> 11) * 0x1.0p-53));
      b.set(spec.p[i], -2.0 + 4.0 * ((rng() >> 11) * 0x1.0p-53));
    }
    return b;
  };

  for (int iter = 0; iter < 200; ++iter) {
    Expression f = rnd_poly(), g = rnd_poly(), h = rnd_poly();
    Rational ar(1 + upick(4), 1 + upick(3)), br(1 + upick(4), 1 + upick(3));
    Expression a = Expression::constant(ar), b = Expression::constant(br);
    Bindings at = rnd_bindings();

    // bilinearity: {a f + b g, h} = a {f,h} + b {g,h}
    double lhs = evaluate(hamilton::poisson_bracket(spec, a * f + b * g, h), at);
    double rhs = ar.to_double() * evaluate(hamilton::poisson_bracket(spec, f, h), at) +
                 br.to_double() * evaluate(hamilton::poisson_bracket(spec, g, h), at);
    REQUIRE(std::abs(lhs - rhs) <= 1e-10 * (1 + std::abs(rhs)));

    // Leibniz: {f g, h} = f {g,h} + {f,h} g
    double l2 = evaluate(hamilton::poisson_bracket(spec, f * g, h), at);
    double r2 = evaluate(f, at) * evaluate(hamilton::poisson_bracket(spec, g, h), at) +
                evaluate(hamilton::poisson_bracket(spec, f, h), at) * evaluate(g, at);
    REQUIRE(std::abs(l2 - r2) <= 1e-10 * (1 + std::abs(r2)));
  }
}

TEST_CASE("first-class residuals") {
  SUBCASE("single-constraint model is trivially first class") {
    ModelSpec spec = load("free-sqrt.gsf");
    auto pm = legendre::PullbackMap::from_model(spec);
    auto pts = sample_points(spec, 100, 42);
    auto off = sample_phase_points(spec, 100, 42);
    auto res = hamilton::first_class_check(spec, pm, pts, off);
    CHECK(res.pulled_gg <= 1e-10);
    CHECK(res.pulled_hg <= 1e-10);
    CHECK(res.closure_on <= 1e-10);
    CHECK(res.closure_off <= 1e-10);
  }

  SUBCASE("rebased model closes off-surface exactly") {
    ModelSpec parsed = load("double-root-rebased-q.gsf");
    auto pts = sample_points(parsed, 50, 42);
    ModelSpec spec = hamilton::effective_model(parsed, pts);
    auto pm = legendre::PullbackMap::from_model(spec);
    auto off = sample_phase_points(spec, 100, 42);
    auto res = hamilton::first_class_check(spec, pm, pts, off);
    CHECK(res.closure_off <= 1e-10);
    CHECK(res.pulled_gg <= 1e-10);
  }

  SUBCASE("perturbed structure function fails off-surface") {
    ModelSpec spec = load("mutants/double-root-rebased-q-badC.gsf");
    auto pm = legendre::PullbackMap::from_model(spec);
    auto pts = sample_points(spec, 50, 42);
    auto off = sample_phase_points(spec, 50, 42);
    auto res = hamilton::first_class_check(spec, pm, pts, off);
    CHECK(res.closure_off > 1e-3);
  }
}

TEST_CASE("Jacobi checks") {
  SUBCASE("polynomial constraints satisfy the double-bracket identity") {
    ModelSpec parsed = load("triple-root-rebased.gsf");
    auto pts = sample_points(parsed, 50, 42);
    ModelSpec spec = hamilton::effective_model(parsed, pts);
    auto pm = legendre::PullbackMap::from_model(spec);
    auto off = sample_phase_points(spec, 50, 42);
    auto res = hamilton::jacobi_checks(spec, pm, pts, off);
    CHECK(res.double_bracket <= 1e-10);
    CHECK(res.pulled_second_order <= 1e-9);
  }
  SUBCASE("single constraint: everything vanishes") {
    ModelSpec spec = load("free-sqrt.gsf");
    auto pm = legendre::PullbackMap::from_model(spec);
    auto pts = sample_points(spec, 20, 42);
    auto off = sample_phase_points(spec, 20, 42);
    auto res = hamilton::jacobi_checks(spec, pm, pts, off);
    CHECK(res.double_bracket == 0.0);
    CHECK(res.pulled_second_order == 0.0);
  }
}

TEST_CASE("rebased corpus models validate like any other") {
  for (const char* file : {"double-root-rebased-q.gsf", "double-root-rebased-p.gsf",
                           "conformal-double-rebased-p.gsf", "triple-root-rebased.gsf"}) {
    CAPTURE(file);
    ModelSpec parsed = load(file);
    auto pts = sample_points(parsed, 100, 42);
    ModelSpec spec = hamilton::effective_model(parsed, pts);
    auto rep = validate_model(spec, pts);
    CHECK(rep.rank_w_ok);
    CHECK(rep.rank_r_ok);
    CHECK(rep.max_constraint_residual <= 1e-10);
    CHECK(rep.max_hc_residual <= 1e-10);
    CHECK(rep.passed);
  }
}

TEST_CASE("rebase") {
  ModelSpec base = load("double-root.gsf");
  auto pts = sample_points(base, 50, 42);

  SUBCASE("coordinate-dependent rebase produces C'_12^2 = p4") {
    std::vector<std::vector<Expression>> lam(2, std::vector<Expression>(2, Expression::zero()));
    lam[0][0] = Expression::one();
    lam[1][1] = Expression::one();
    lam[0][1] = Expression::symbol(base.q[2]);
    ModelSpec out = hamilton::rebase(base, lam, pts);
    CHECK(out.c(0, 1, 1).same(Expression::symbol(base.p[3])));
    CHECK(out.c(0, 1, 0).is_zero());
    // G'_1 = G_1 + q3 G_2 still pulls back to zero
    auto pm = legendre::PullbackMap::from_model(out);
    CHECK(simplify(legendre::pullback(out.G[0], pm)).is_zero());
  }

  SUBCASE("momentum-dependent rebase cancels all brackets") {
    std::vector<std::vector<Expression>> lam(2, std::vector<Expression>(2, Expression::zero()));
    lam[0][0] = Expression::one();
    lam[1][1] = Expression::one();
    lam[0][1] = Expression::symbol(base.p[0]);
    lam[1][0] = Expression::symbol(base.p[2]);
    ModelSpec out = hamilton::rebase(base, lam, pts);
    for (int g = 0; g < 2; ++g) CHECK(out.c(0, 1, g).is_zero());
    // and the rebased model still closes off-surface
    auto pm = legendre::PullbackMap::from_model(out);
    auto off = sample_phase_points(out, 50, 42);
    auto res = hamilton::first_class_check(out, pm, pts, off);
    CHECK(res.closure_off <= 1e-10);
  }

  SUBCASE("identity rebase leaves the model unchanged") {
    std::vector<std::vector<Expression>> lam(2, std::vector<Expression>(2, Expression::zero()));
    lam[0][0] = Expression::one();
    lam[1][1] = Expression::one();
    ModelSpec out = hamilton::rebase(base, lam, pts);
    for (int mu = 0; mu < 2; ++mu) CHECK(out.G[mu].same(base.G[mu]));
    for (int g = 0; g < 2; ++g) CHECK(out.c(0, 1, g).is_zero());
  }

  SUBCASE("numerically singular rebase matrix is rejected") {
    std::vector<std::vector<Expression>> lam(2, std::vector<Expression>(2, Expression::zero()));
    lam[0][0] = Expression::one();
    lam[1][1] = Expression::one();
    // Lambda = [[1, 2 p1],[ (1/(2 p1 p2... )) ...]] -- easier: scale row to zero
    lam[1][1] = Expression::zero();
    lam[1][0] = Expression::zero();
    try {
      hamilton::rebase(base, lam, pts);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code == ErrorCode::SingularRebase);
    }
  }
}
