// gsf: check gauge-structure models, compute their structure tensors, run
// the finite-difference oracle, and manage the bundled corpus.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsf/hamilton.hpp"
#include "gsf/lagrange.hpp"
#include "gsf/legendre.hpp"
#include "gsf/model.hpp"
#include "gsf/structure.hpp"
#include "gsf/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct CorpusEntry {
  const char* file;
  bool mutant;
  const char* expected;  // tensor magnitudes at the reference points
};
// Bundled models; mutants are expected to fail at least one named check.
const CorpusEntry kCorpus[] = {
    {"free-sqrt.gsf", false, "T=E=D=M=0"},
    {"relativistic-particle.gsf", false, "T=E=D=M=0"},
    {"relative-oscillator.gsf", false, "T=E=D=M=0"},
    {"double-root.gsf", false, "T=E=D=M=0"},
    {"double-root-rebased-q.gsf", false, "|T|=1/2 at the unit point, E=D=M=0"},
    {"double-root-rebased-p.gsf", false, "T=0, |E|=3/32 at q=0 v=(1,1,4,1), D=M=0"},
    {"conformal-double.gsf", false, "T=E=D=M=0"},
    {"conformal-double-rebased-p.gsf", false, "T,E nonzero, D=M=0"},
    {"triple-root-rebased.gsf", false,
     "|T|=3/8, |E|=3/8, |D|=1/16, |M|=1/48 at the all-ones point"},
    {"mutants/free-sqrt-badG.gsf", true, "fails 2.8 at exactly 0.05"},
    {"mutants/free-sqrt-brokenL.gsf", true, "fails 2.20"},
    {"mutants/double-root-rebased-q-badC.gsf", true, "fails the off-surface closure 2.24"},
};

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw gsf::Error(gsf::ErrorCode::Usage, "cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct CheckOutcome {
  gsf::ValidationReport validation;
  gsf::verify::SuiteReport suite;
  std::vector<gsf::verify::CheckResult> oracle;
  bool passed = false;
};

CheckOutcome run_check(const gsf::ModelSpec& parsed, int samples, uint64_t seed, double tol) {
  CheckOutcome out;
  gsf::verify::Verifier verifier(parsed);
  auto points = gsf::sample_points(verifier.model(), samples, seed);
  out.validation = gsf::validate_model(verifier.model(), points, 1e-10);
  gsf::verify::SuiteOptions opts;
  opts.seed = seed;
  opts.count = samples;
  opts.tol = tol;
  out.suite = verifier.run_suite(opts);
  out.oracle = verifier.fd_oracle(seed, std::min(samples, 20));
  bool oracle_ok = true;
  for (const auto& c : out.oracle) oracle_ok = oracle_ok && c.passed;
  out.passed = out.validation.passed && out.suite.passed && oracle_ok;
  return out;
}

void print_check_text(const CheckOutcome& out, std::ostream& os) {
  const auto& v = out.validation;
  os << "model: " << out.suite.model << "\n";
  os << "validation: rankW " << (v.rank_w_ok ? "ok" : "FAIL") << ", rankR "
     << (v.rank_r_ok ? "ok" : "FAIL") << ", |FL*G| " << v.max_constraint_residual << ", |FL*Hc-E| "
     << v.max_hc_residual << (v.passed ? " [pass]" : " [FAIL]") << "\n";
  os << "identity checks (tol " << out.suite.tolerance << "):\n";
  for (const auto& c : out.suite.checks) {
    os << "  " << c.id << "  max_residual " << c.max_residual << "  "
       << (c.vacuous ? "vacuous" : (c.passed ? "pass" : "FAIL")) << "\n";
  }
  os << "fd oracle:\n";
  for (const auto& c : out.oracle)
    os << "  " << c.id << "  " << c.max_residual << "  " << (c.passed ? "pass" : "FAIL") << "\n";
  os << "tensor magnitudes: |T| " << out.suite.max_T << "  |E| " << out.suite.max_E << "  |D| "
     << out.suite.max_D << "  |M| " << out.suite.max_M << "\n";
  os << (out.passed ? "PASSED" : "FAILED") << "\n";
}

std::string check_json(const CheckOutcome& out) {
  // suite JSON is the canonical report schema; validation and oracle ride on top
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(out.suite.to_json());
  nlohmann::ordered_json vj;
  vj["rank_w_ok"] = out.validation.rank_w_ok;
  vj["rank_r_ok"] = out.validation.rank_r_ok;
  vj["max_constraint_residual"] = out.validation.max_constraint_residual;
  vj["max_hc_residual"] = out.validation.max_hc_residual;
  vj["passed"] = out.validation.passed;
  j["validation"] = vj;
  nlohmann::ordered_json oj = nlohmann::ordered_json::array();
  for (const auto& c : out.oracle) {
    nlohmann::ordered_json cj;
    cj["id"] = c.id;
    cj["max_residual"] = c.max_residual;
    cj["passed"] = c.passed;
    oj.push_back(cj);
  }
  j["fd_oracle"] = oj;
  j["passed"] = out.passed;
  return j.dump(2) + "\n";
}

int cmd_check(const std::string& path, int samples, uint64_t seed, double tol,
              const std::string& format, const std::string& report_path) {
  gsf::ModelSpec parsed = gsf::parse_model(read_file(path));
  CheckOutcome out = run_check(parsed, samples, seed, tol);
  std::string json = check_json(out);
  if (!report_path.empty()) {
    std::ofstream rf(report_path);
    if (!rf) throw gsf::Error(gsf::ErrorCode::Usage, "cannot write report to '" + report_path + "'");
    rf << json;
  }
  if (format == "json")
    std::cout << json;
  else
    print_check_text(out, std::cout);
  return out.passed ? kExitOk : kExitCheckFailed;
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (...) {
      throw gsf::Error(gsf::ErrorCode::Usage, "bad --point component '" + tok + "'");
    }
    while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
    if (used != tok.size())
      throw gsf::Error(gsf::ErrorCode::Usage, "bad --point component '" + tok + "'");
    vals.push_back(v);
  }
  return vals;
}

int cmd_compute(const std::string& path, const std::string& tensor, const std::string& point_text,
                const std::string& format) {
  gsf::ModelSpec parsed = gsf::parse_model(read_file(path));
  gsf::verify::Verifier verifier(parsed);
  const gsf::ModelSpec& spec = verifier.model();
  const auto& ws = verifier.workspace();
  const int n = spec.n;

  const gsf::IndexedExpr* t = nullptr;
  bool needs_accel = false;
  bool phase_space = false;
  gsf::IndexedExpr cten;  // materialized structure functions for --tensor C
  if (tensor == "W") {
    t = &ws.W;
  } else if (tensor == "R") {
    t = &ws.tensors.R;
  } else if (tensor == "T") {
    t = &ws.tensors.T;
  } else if (tensor == "E") {
    t = &ws.tensors.E;
  } else if (tensor == "D") {
    t = &ws.tensors.D;
  } else if (tensor == "M") {
    t = &ws.tensors.M;
  } else if (tensor == "A") {
    t = &ws.tensors.A;
    needs_accel = true;
  } else if (tensor == "B") {
    t = &ws.tensors.Bten;
    needs_accel = true;
  } else if (tensor == "C") {
    cten = gsf::IndexedExpr({spec.m, spec.m, spec.m});
    for (int mu = 0; mu < spec.m; ++mu)
      for (int nu = 0; nu < spec.m; ++nu)
        for (int g = 0; g < spec.m; ++g) cten.at({mu, nu, g}) = spec.c(mu, nu, g);
    t = &cten;
    phase_space = true;
  } else {
    throw gsf::Error(gsf::ErrorCode::Usage, "unknown tensor '" + tensor + "'");
  }

  auto index_str = [&](size_t flat) {
    const auto& shape = t->shape();
    std::vector<int> idx(shape.size());
    for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(flat % shape[d]) + 1;
      flat /= shape[d];
    }
    std::string s;
    for (int v : idx) s += "[" + std::to_string(v) + "]";
    return s;
  };

  if (point_text.empty()) {
    // symbolic print
    if (format == "json") {
      nlohmann::ordered_json j;
      j["model"] = spec.name;
      j["tensor"] = tensor;
      nlohmann::ordered_json entries = nlohmann::ordered_json::object();
      for (size_t f = 0; f < t->size(); ++f)
        if (!t->flat_at(f).is_zero()) entries[index_str(f)] = gsf::to_string(t->flat_at(f));
      j["entries"] = entries;
      std::cout << j.dump(2) << "\n";
    } else {
      int nonzero = 0;
      for (size_t f = 0; f < t->size(); ++f) {
        if (t->flat_at(f).is_zero()) continue;
        std::cout << tensor << index_str(f) << " = " << gsf::to_string(t->flat_at(f)) << "\n";
        ++nonzero;
      }
      if (nonzero == 0) std::cout << tensor << " = 0 (all entries)\n";
    }
    return kExitOk;
  }

  std::vector<double> vals = parse_point(point_text);
  gsf::SamplePoint pt;
  pt.q.assign(n, 0.0);
  pt.v.assign(n, 0.0);
  pt.a.assign(n, 0.0);
  if (static_cast<int>(vals.size()) == 3 * n) {
    for (int i = 0; i < n; ++i) {
      pt.q[i] = vals[i];
      pt.v[i] = vals[n + i];
      pt.a[i] = vals[2 * n + i];
    }
  } else if (static_cast<int>(vals.size()) == 2 * n) {
    for (int i = 0; i < n; ++i) {
      pt.q[i] = vals[i];
      pt.v[i] = vals[n + i];
    }
    if (needs_accel)
      std::cerr << "warning: tensor " << tensor
                << " involves accelerations; missing a-block defaults to zeros\n";
  } else {
    throw gsf::Error(gsf::ErrorCode::Usage,
                     "--point needs " + std::to_string(2 * n) + " or " + std::to_string(3 * n) +
                         " comma-separated values, got " + std::to_string(vals.size()));
  }
  {
    gsf::Bindings b;
    for (int i = 0; i < n; ++i) {
      b.set(spec.q[i], pt.q[i]);
      b.set(spec.v[i], pt.v[i]);
    }
    for (const auto& pred : spec.domain)
      if (!(gsf::evaluate(pred, b) > 0.0))
        throw gsf::Error(gsf::ErrorCode::Usage, "point outside the model domain");
  }

  gsf::Evaluator ev;
  ev.begin_point();
  gsf::bind_point(ev, spec, pt);
  if (phase_space) {
    // structure functions live on phase space; evaluate at pulled momenta
    for (int i = 0; i < n; ++i) ev.bind(spec.p[i], ev.eval(ws.pm.assignments.at(spec.p[i])));
  }

  if (format == "json") {
    nlohmann::ordered_json j;
    j["model"] = spec.name;
    j["tensor"] = tensor;
    j["shape"] = t->shape();
    nlohmann::ordered_json flat = nlohmann::ordered_json::array();
    for (size_t f = 0; f < t->size(); ++f) flat.push_back(ev.eval(t->flat_at(f)));
    j["values"] = flat;
    std::cout << j.dump(2) << "\n";
  } else {
    int nonzero = 0;
    for (size_t f = 0; f < t->size(); ++f) {
      double v = ev.eval(t->flat_at(f));
      if (v == 0.0) continue;
      std::cout << tensor << index_str(f) << " = " << v << "\n";
      ++nonzero;
    }
    if (nonzero == 0)
      std::cout << tensor << " = 0 (all entries)\n";
    else
      std::cout << "(all other entries 0)\n";
  }
  return kExitOk;
}

int cmd_oracle(const std::string& path, int samples, uint64_t seed) {
  gsf::ModelSpec parsed = gsf::parse_model(read_file(path));
  gsf::verify::Verifier verifier(parsed);
  auto results = verifier.fd_oracle(seed, samples);
  bool ok = true;
  for (const auto& c : results) {
    std::cout << c.id << "  max_residual " << c.max_residual << "  "
              << (c.passed ? "pass" : "FAIL") << "\n";
    ok = ok && c.passed;
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_corpus(const std::string& dir, bool verify_all, int samples, uint64_t seed, double tol) {
  namespace fs = std::filesystem;
  bool all_ok = true;
  std::cout << "bundled corpus (" << dir << "):\n";
  for (const auto& entry : kCorpus) {
    fs::path p = fs::path(dir) / entry.file;
    if (!fs::exists(p)) {
      std::cout << "  " << entry.file << "  MISSING\n";
      all_ok = false;
      continue;
    }
    gsf::ModelSpec parsed = gsf::parse_model(read_file(p.string()));
    std::cout << "  " << entry.file << "  n=" << parsed.n << " m=" << parsed.m
              << (entry.mutant ? "  [mutant]" : "") << "  expected: " << entry.expected;
    if (!verify_all) {
      std::cout << "\n";
      continue;
    }
    bool passed = false;
    std::string note;
    try {
      CheckOutcome out = run_check(parsed, samples, seed, tol);
      passed = out.passed;
      std::ostringstream mag;
      mag << "  |T|=" << out.suite.max_T << " |E|=" << out.suite.max_E
          << " |D|=" << out.suite.max_D << " |M|=" << out.suite.max_M;
      note = mag.str();
    } catch (const gsf::Error& e) {
      passed = false;
      note = std::string("  error: ") + e.what();
    }
    if (entry.mutant) {
      std::cout << (passed ? "  UNEXPECTED-PASS" : "  fails-as-expected") << note << "\n";
      if (passed) all_ok = false;
    } else {
      std::cout << (passed ? "  pass" : "  FAIL") << note << "\n";
      if (!passed) all_ok = false;
    }
  }
  return all_ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gauge-structure tensors of degenerate Lagrangians: compute and verify"};
  app.require_subcommand(1);

  std::string model_path, tensor, point_text, format = "text", report_path, corpus_dir = "corpus";
  int samples = 100;
  uint64_t seed = 42;
  double tol = 1e-8;
  bool verify_all = false;

  auto* check = app.add_subcommand("check", "validate a model and run the identity suite");
  check->add_option("model", model_path, "model file")->required();
  check->add_option("--samples", samples, "sample point count");
  check->add_option("--seed", seed, "sampler seed");
  check->add_option("--tol", tol, "identity tolerance");
  check->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  check->add_option("--report", report_path, "write the JSON report to this path");

  auto* compute = app.add_subcommand("compute", "print a structure tensor");
  compute->add_option("model", model_path, "model file")->required();
  compute->add_option("--tensor", tensor, "one of W,R,T,E,D,M,A,B,C")->required();
  compute->add_option("--point", point_text, "comma-separated q,v[,a] values");
  compute->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

  auto* oracle = app.add_subcommand("oracle", "compare symbolic derivatives with finite differences");
  oracle->add_option("model", model_path, "model file")->required();
  oracle->add_option("--samples", samples, "sample point count");
  oracle->add_option("--seed", seed, "sampler seed");

  auto* corpus = app.add_subcommand("corpus", "list or verify the bundled models");
  corpus->add_flag("--verify-all", verify_all, "run the full check on every bundled model");
  corpus->add_option("--corpus-dir", corpus_dir, "corpus directory");
  corpus->add_option("--samples", samples, "sample point count");
  corpus->add_option("--seed", seed, "sampler seed");
  corpus->add_option("--tol", tol, "identity tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand(check)) return cmd_check(model_path, samples, seed, tol, format, report_path);
    if (app.got_subcommand(compute)) return cmd_compute(model_path, tensor, point_text, format);
    if (app.got_subcommand(oracle)) return cmd_oracle(model_path, samples, seed);
    if (app.got_subcommand(corpus)) return cmd_corpus(corpus_dir, verify_all, samples, seed, tol);
  } catch (const gsf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
