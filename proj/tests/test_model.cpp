#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "gsf/model.hpp"
#include "gsf/numeric.hpp"

using namespace gsf;

namespace {
std::string slurp(const std::string& rel) {
  std::ifstream f(std::string(GSF_CORPUS_DIR) + "/" + rel);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kMinimalModel = R"(model tiny
dim 2
gauge 1
coords q1 q2
lagrangian sqrt(v1*v2)
constraint G1 p1*p2 - 1/4
hamiltonian 0
)";
}  // namespace

TEST_CASE("parsing the bundled root model") {
  ModelSpec spec = parse_model(slurp("free-sqrt.gsf"));
  CHECK(spec.name == "free-sqrt");
  CHECK(spec.n == 2);
  CHECK(spec.m == 1);
  CHECK(spec.g_names[0] == "G1");
  CHECK(spec.domain.size() == 2);
  CHECK_FALSE(spec.has_rebase());
  // C is all zero for m = 1 by construction
  CHECK(spec.c(0, 0, 0).is_zero());
  // derived families follow the v1/a1/p1 naming
  CHECK(spec.v[0].name() == "v1");
  CHECK(spec.a[1].name() == "a2");
  CHECK(spec.p[1].name() == "p2");
}

TEST_CASE("parse errors") {
  SUBCASE("missing hamiltonian") {
    std::string text = kMinimalModel;
    text.erase(text.find("hamiltonian 0"));
    try {
      parse_model(text);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code == ErrorCode::MissingSection);
      CHECK(std::string(e.what()) == "missing section: hamiltonian");
    }
  }
  SUBCASE("diagonal structure entry") {
    std::string text = kMinimalModel;
    text += "structure 1 1 1 p1\n";
    try {
      parse_model(text);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code == ErrorCode::StructureSymmetry);
      CHECK(std::string(e.what()).find("diagonal must vanish") != std::string::npos);
    }
  }
  SUBCASE("lower-triangle structure entry") {
    std::string text = R"(model bad
dim 3
gauge 2
coords q1 q2 q3
lagrangian sqrt(v1*v2) + (1/2)*v3^2
constraint G1 p1*p2 - 1/4
constraint G2 p1 + p2
structure 2 1 1 p1
hamiltonian 0
)";
    CHECK_THROWS_AS(parse_model(text), Error);
  }
  SUBCASE("unknown symbol with position") {
    std::string text = kMinimalModel;
    text.insert(text.find("hamiltonian"), "domain bogus > 0\n");
    try {
      parse_model(text);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code == ErrorCode::UnknownSymbol);
      CHECK(e.line > 0);
    }
  }
  SUBCASE("duplicate constraint name") {
    std::string text = kMinimalModel;
    text = text.substr(0, text.find("hamiltonian"));
    text += "constraint G1 p1 + p2\nhamiltonian 0\n";
    CHECK_THROWS_AS(parse_model(text), Error);
  }
  SUBCASE("constraint without momenta") {
    std::string text = kMinimalModel;
    std::string from = "constraint G1 p1*p2 - 1/4";
    text.replace(text.find(from), from.size(), "constraint G1 q1 - 1/4");
    CHECK_THROWS_AS(parse_model(text), Error);
  }
  SUBCASE("syntax error carries line and column") {
    std::string text = kMinimalModel;
    std::string from = "lagrangian sqrt(v1*v2)";
    text.replace(text.find(from), from.size(), "lagrangian sqrt(v1*v2");
    try {
      parse_model(text);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code == ErrorCode::Parse);
      CHECK(e.line == 5);
      CHECK(e.col > 0);
    }
  }
}

TEST_CASE("sampling") {
  ModelSpec spec = parse_model(slurp("free-sqrt.gsf"));

  SUBCASE("domain contract: three points, velocities positive") {
    auto pts = sample_points(spec, 3, 7);
    REQUIRE(pts.size() == 3);
    for (const auto& pt : pts) {
      CHECK(pt.v[0] > 0.0);
      CHECK(pt.v[1] > 0.0);
    }
  }

  SUBCASE("determinism: same seed gives bitwise-identical points") {
    auto a = sample_points(spec, 50, 123);
    auto b = sample_points(spec, 50, 123);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].q == b[i].q);
      CHECK(a[i].v == b[i].v);
      CHECK(a[i].a == b[i].a);
    }
  }

  SUBCASE("contradictory domain exhausts the rejection budget") {
    std::string text = kMinimalModel;
    text.insert(text.find("lagrangian"), "domain v1 > 0\ndomain -v1 - 1 > 0\n");
    ModelSpec bad = parse_model(text);
    try {
      sample_points(bad, 1, 5);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code == ErrorCode::DomainTooSmall);
    }
  }
}

TEST_CASE("render and reparse is the identity") {
  for (const char* file :
       {"free-sqrt.gsf", "relativistic-particle.gsf", "relative-oscillator.gsf",
        "double-root.gsf", "double-root-rebased-q.gsf", "double-root-rebased-p.gsf",
        "conformal-double.gsf", "conformal-double-rebased-p.gsf", "triple-root-rebased.gsf",
        "mutants/double-root-rebased-q-badC.gsf"}) {
    CAPTURE(file);
    ModelSpec spec = parse_model(slurp(file));
    ModelSpec back = parse_model(render(spec));
    CHECK(back.name == spec.name);
    CHECK(back.n == spec.n);
    CHECK(back.m == spec.m);
    // reparsing registers fresh symbols, so compare printed trees
    CHECK(to_string(back.L) == to_string(spec.L));
    for (int mu = 0; mu < spec.m; ++mu) CHECK(to_string(back.G[mu]) == to_string(spec.G[mu]));
    for (int mu = 0; mu < spec.m; ++mu)
      for (int nu = mu + 1; nu < spec.m; ++nu)
        for (int g = 0; g < spec.m; ++g)
          CHECK(to_string(back.c(mu, nu, g)) == to_string(spec.c(mu, nu, g)));
    CHECK(to_string(back.Hc) == to_string(spec.Hc));
    CHECK(back.domain.size() == spec.domain.size());
    CHECK(back.has_rebase() == spec.has_rebase());
    if (spec.has_rebase())
      for (int i = 0; i < spec.m; ++i)
        for (int j = 0; j < spec.m; ++j)
          CHECK(to_string((*back.rebase)[i][j]) == to_string((*spec.rebase)[i][j]));
  }
}

TEST_CASE("validation") {
  SUBCASE("base corpus models validate cleanly") {
    for (const char* file : {"free-sqrt.gsf", "relativistic-particle.gsf",
                             "relative-oscillator.gsf", "double-root.gsf",
                             "conformal-double.gsf"}) {
      CAPTURE(file);
      ModelSpec spec = parse_model(slurp(file));
      auto pts = sample_points(spec, 100, 42);
      auto rep = validate_model(spec, pts);
      CHECK(rep.rank_w_ok);
      CHECK(rep.rank_r_ok);
      CHECK(rep.max_constraint_residual <= 1e-10);
      CHECK(rep.max_hc_residual <= 1e-10);
      CHECK(rep.passed);
    }
  }

  SUBCASE("wrong constraint constant is caught with the exact residual") {
    ModelSpec spec = parse_model(slurp("mutants/free-sqrt-badG.gsf"));
    auto pts = sample_points(spec, 20, 42);
    auto rep = validate_model(spec, pts);
    CHECK_FALSE(rep.passed);
    CHECK(rep.max_constraint_residual == doctest::Approx(0.05).epsilon(1e-12));
  }

  SUBCASE("broken symmetry fails the Hamiltonian compatibility check") {
    ModelSpec spec = parse_model(slurp("mutants/free-sqrt-brokenL.gsf"));
    auto pts = sample_points(spec, 20, 42);
    auto rep = validate_model(spec, pts);
    CHECK_FALSE(rep.passed);
    CHECK(rep.max_hc_residual > 1e-3);
  }
}

TEST_CASE("numeric rank is stable under row scaling") {
  for (double f : {0.5, 0.77, 1.0, 1.3, 2.0}) {
    Mat m(2, 2);
    m(0, 0) = -0.25 * f;
    m(0, 1) = 0.25 * f;
    m(1, 0) = 0.25;
    m(1, 1) = -0.25;
    CHECK(numeric_rank(m) == 1);
  }
  Mat z(3, 3);
  CHECK(numeric_rank(z) == 0);
  Mat id(3, 3);
  for (int i = 0; i < 3; ++i) id(i, i) = 1.0;
  CHECK(numeric_rank(id) == 3);
}
