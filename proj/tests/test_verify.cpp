#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gsf/verify.hpp"

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

TEST_CASE("single-point identity residuals") {
  verify::Verifier ver(load("free-sqrt.gsf"));
  auto pts = sample_points(ver.model(), 5, 7);

  SUBCASE("kernel-contraction identity") {
    for (const auto& pt : pts) CHECK(ver.identity_residual("1.25", pt) <= 1e-12);
  }
  SUBCASE("pullback of the constraints") {
    for (const auto& pt : pts) CHECK(ver.identity_residual("2.8", pt) <= 1e-12);
  }
  SUBCASE("unknown identity id") {
    try {
      ver.identity_residual("9.99", pts[0]);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code == ErrorCode::Usage);
    }
  }
}

TEST_CASE("reference-point residuals on the hidden-closed model") {
  // alpha vanishes here, so 1.23 degenerates; 1.24 is where E works against W
  verify::Verifier ver(load("double-root-rebased-p.gsf"));
  SamplePoint ref;
  ref.q = {0, 0, 0, 0};
  ref.v = {1, 1, 4, 1};
  ref.a = {0.3, -0.7, 1.1, 0.2};
  CHECK(ver.identity_residual("1.23", ref) <= 1e-9);
  CHECK(ver.identity_residual("1.24", ref) <= 1e-9);
}

TEST_CASE("mutant identity residuals") {
  verify::Verifier ver(load("mutants/free-sqrt-badG.gsf"));
  auto pts = sample_points(ver.model(), 5, 7);
  for (const auto& pt : pts)
    CHECK(ver.identity_residual("2.8", pt) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("run_suite on the corpus") {
  SUBCASE("root model: every check passes, magnitudes vanish") {
    verify::Verifier ver(load("free-sqrt.gsf"));
    verify::SuiteOptions opts;
    auto rep = ver.run_suite(opts);
    CHECK(rep.passed);
    CHECK(rep.checks.size() == verify::supported_identities().size());
    for (const auto& c : rep.checks) {
      CAPTURE(c.id);
      CHECK(c.passed);
    }
    CHECK(rep.max_T == 0.0);
    CHECK(rep.max_E == 0.0);
    CHECK(rep.max_D == 0.0);
    CHECK(rep.max_M == 0.0);
  }

  SUBCASE("rebased model carries a nonzero T") {
    verify::Verifier ver(load("double-root-rebased-q.gsf"));
    verify::SuiteOptions opts;
    auto rep = ver.run_suite(opts);
    CHECK(rep.passed);
    CHECK(rep.max_T > 0.1);
    CHECK(rep.max_E == 0.0);
    CHECK(rep.max_D == 0.0);
    CHECK(rep.max_M == 0.0);
  }

  SUBCASE("triple rebase: third- and fourth-order checks are exercised and pass") {
    verify::Verifier ver(load("triple-root-rebased.gsf"));
    verify::SuiteOptions opts;
    auto rep = ver.run_suite(opts);
    CHECK(rep.passed);
    for (const char* id : {"1.30", "1.35", "1.37", "1.381", "1.382", "1.45", "2.54=2.55"}) {
      const auto* c = rep.find(id);
      REQUIRE(c != nullptr);
      CHECK_FALSE(c->vacuous);
      CHECK(c->passed);
    }
    CHECK(rep.max_D > 1e-3);
    CHECK(rep.max_M > 1e-3);
  }

  SUBCASE("vacuous checks are flagged, not counted") {
    verify::Verifier ver(load("free-sqrt.gsf"));
    verify::SuiteOptions opts;
    auto rep = ver.run_suite(opts);
    // third-order relations are vacuous with a single constraint
    for (const char* id : {"1.381", "1.382", "1.45", "1.37"}) {
      const auto* c = rep.find(id);
      REQUIRE(c != nullptr);
      CHECK(c->vacuous);
      CHECK(c->passed);
    }
    // the kernel contraction is a genuine check even at m = 1
    CHECK_FALSE(rep.find("1.25")->vacuous);
  }
}

TEST_CASE("negative controls fail loudly") {
  SUBCASE("wrong constraint constant") {
    verify::Verifier ver(load("mutants/free-sqrt-badG.gsf"));
    verify::SuiteOptions opts;
    auto rep = ver.run_suite(opts);
    CHECK_FALSE(rep.passed);
    const auto* c = rep.find("2.8");
    REQUIRE(c != nullptr);
    CHECK_FALSE(c->passed);
    CHECK(c->max_residual == doctest::Approx(0.05).epsilon(1e-12));
  }
  SUBCASE("broken gauge symmetry") {
    verify::Verifier ver(load("mutants/free-sqrt-brokenL.gsf"));
    verify::SuiteOptions opts;
    auto rep = ver.run_suite(opts);
    CHECK_FALSE(rep.passed);
    const auto* c = rep.find("2.20");
    REQUIRE(c != nullptr);
    CHECK_FALSE(c->passed);
    CHECK(c->max_residual > 1e-3);
  }
  SUBCASE("perturbed structure function") {
    verify::Verifier ver(load("mutants/double-root-rebased-q-badC.gsf"));
    verify::SuiteOptions opts;
    auto rep = ver.run_suite(opts);
    CHECK_FALSE(rep.passed);
    const auto* c = rep.find("2.24");
    REQUIRE(c != nullptr);
    CHECK_FALSE(c->passed);
    CHECK(c->max_residual > 1e-3);
  }
}

TEST_CASE("ambiguity shifts leave every verdict and residual in place") {
  for (const char* file : {"double-root-rebased-p.gsf", "triple-root-rebased.gsf"}) {
    CAPTURE(file);
    verify::Verifier ver(load(file));
    const int m = ver.model().m;
    verify::SuiteOptions base;
    auto rep0 = ver.run_suite(base);

    verify::SuiteOptions shifted = base;
    verify::SuiteShift sh;
    sh.e = IndexedExpr({m, m, m, m});
    sh.d = IndexedExpr({m, m, m, m, m});
    sh.e.at({0, 1, 0, 1}) = Expression::one();
    sh.e.at({1, 0, 0, 1}) = -Expression::one();
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        for (int c = 0; c < m; ++c)
          for (int r = 0; r < m; ++r)
            for (int d = 0; d < m; ++d)
              sh.d.at({a, b, c, r, d}) =
                  Expression::constant(Rational(1 + a + b + c + r + d, 7));
    shifted.shift = sh;
    auto rep1 = ver.run_suite(shifted);

    REQUIRE(rep0.checks.size() == rep1.checks.size());
    for (size_t i = 0; i < rep0.checks.size(); ++i) {
      CAPTURE(rep0.checks[i].id);
      // a vacuous check may become exercised (nonzero terms) under the
      // shift; the verdict and the residual are what must not move
      CHECK(rep0.checks[i].passed == rep1.checks[i].passed);
      CHECK(std::abs(rep0.checks[i].max_residual - rep1.checks[i].max_residual) <= 1e-9);
    }
    CHECK(rep1.passed);

    // shifted tensors genuinely differ entry-wise
    structure::StructureTensors out =
        structure::ambiguity_shift(ver.workspace().tensors, sh.e, sh.d);
    auto pts = sample_points(ver.model(), 1, 11);
    Evaluator ev;
    ev.begin_point();
    bind_point(ev, ver.model(), pts[0]);
    NumericTensor e0 = NumericTensor::evaluate(ver.workspace().tensors.E, ev);
    NumericTensor e1 = NumericTensor::evaluate(out.E, ev);
    double dE = 0.0;
    for (size_t i = 0; i < e0.size(); ++i)
      dE = std::max(dE, std::abs(e0.flat_at(i) - e1.flat_at(i)));
    CHECK(dE > 1e-3);
    NumericTensor d0 = NumericTensor::evaluate(ver.workspace().tensors.D, ev);
    NumericTensor d1 = NumericTensor::evaluate(out.D, ev);
    double dD = 0.0;
    for (size_t i = 0; i < d0.size(); ++i)
      dD = std::max(dD, std::abs(d0.flat_at(i) - d1.flat_at(i)));
    CHECK(dD > 1e-3);
  }
}

TEST_CASE("a determinant-bearing rebase exercises the pulled Jacobi combination") {
  // with a non-unimodular basis change the structure functions become
  // rational functions, so the second-order combination cannot collapse at
  // the tree level and its cancellation is genuinely numeric
  static const char* kModel = R"(model triple-det
dim 6
gauge 3
coords q1 q2 q3 q4 q5 q6
domain v1 - 1/4 > 0
domain v2 - 1/4 > 0
domain v3 - 1/4 > 0
domain v4 - 1/4 > 0
domain v5 - 1/4 > 0
domain v6 - 1/4 > 0
lagrangian sqrt(v1*v2) + sqrt(v3*v4) + sqrt(v5*v6)
constraint G1 p1*p2 - 1/4
constraint G2 p3*p4 - 1/4
constraint G3 p5*p6 - 1/4
hamiltonian 0
rebase 1 2 q5*p3*(p5 + q3)
rebase 2 1 (1/4)*p1
)";
  verify::Verifier ver(parse_model(kModel));
  verify::SuiteOptions opts;
  auto rep = ver.run_suite(opts);
  CHECK(rep.passed);
  const auto* c29 = rep.find("2.29");
  REQUIRE(c29 != nullptr);
  CHECK_FALSE(c29->vacuous);
  CHECK(c29->max_residual <= 1e-8);
  CHECK(rep.max_T > 1e-3);
  CHECK(rep.max_E > 1e-3);
  CHECK(rep.max_D > 1e-3);
  CHECK(rep.max_M > 1e-3);
}

TEST_CASE("report is machine-readable and byte-stable") {
  verify::Verifier ver(load("double-root-rebased-q.gsf"));
  verify::SuiteOptions opts;
  opts.count = 40;
  auto rep1 = ver.run_suite(opts);
  auto rep2 = ver.run_suite(opts);
  std::string j1 = rep1.to_json();
  std::string j2 = rep2.to_json();
  CHECK(j1 == j2);

  // a fresh verifier over the same parsed model reproduces the bytes
  verify::Verifier ver2(load("double-root-rebased-q.gsf"));
  auto rep3 = ver2.run_suite(opts);
  CHECK(rep3.to_json() == j1);

  auto parsed = nlohmann::json::parse(j1);
  CHECK(parsed["model"] == "double-root-rebased-q");
  CHECK(parsed["seed"] == 42);
  CHECK(parsed["points"] == 40);
  CHECK(parsed["tolerance"].is_number());
  CHECK(parsed["checks"].is_array());
  CHECK(parsed["checks"].size() == verify::supported_identities().size());
  for (const auto& c : parsed["checks"]) {
    CHECK(c.contains("id"));
    CHECK(c.contains("max_residual"));
    CHECK(c.contains("passed"));
    CHECK(c.contains("vacuous"));
  }
  CHECK(parsed["tensor_magnitudes"].contains("T"));
  CHECK(parsed["tensor_magnitudes"].contains("E"));
  CHECK(parsed["tensor_magnitudes"].contains("D"));
  CHECK(parsed["tensor_magnitudes"].contains("M"));
  CHECK(parsed["passed"].is_boolean());
}

TEST_CASE("fd oracle") {
  SUBCASE("agrees with the symbolic derivatives on every corpus model") {
    for (const char* file : {"free-sqrt.gsf", "relativistic-particle.gsf",
                             "relative-oscillator.gsf", "conformal-double-rebased-p.gsf",
                             "triple-root-rebased.gsf"}) {
      CAPTURE(file);
      verify::Verifier ver(load(file));
      auto results = ver.fd_oracle(42, 20);
      for (const auto& c : results) {
        CAPTURE(c.id);
        CHECK(c.passed);
      }
    }
  }

  SUBCASE("a corrupted entry is flagged in exactly its family") {
    verify::Verifier ver(load("free-sqrt.gsf"));
    verify::Verifier::Corruption corrupt;
    corrupt.family = "W";
    corrupt.index = 1;  // entry (0, 1)
    corrupt.delta = 1e-3;
    auto results = ver.fd_oracle(42, 20, corrupt);
    bool saw_w = false;
    for (const auto& c : results) {
      CAPTURE(c.id);
      if (c.id == "W") {
        CHECK_FALSE(c.passed);
        CHECK(c.max_residual > 1e-4);
        saw_w = true;
      } else {
        CHECK(c.passed);
      }
    }
    CHECK(saw_w);
  }
}
