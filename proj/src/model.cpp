#include "gsf/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "gsf/numeric.hpp"

namespace gsf {

Expression ModelSpec::c(int mu, int nu, int gamma) const {
  if (mu == nu) return Expression::zero();
  if (mu < nu) {
    int idx = mu * m - mu * (mu + 1) / 2 + (nu - mu - 1);
    return stored_c[idx][gamma];
  }
  return -c(nu, mu, gamma);
}

void ModelSpec::set_c(int mu, int nu, int gamma, const Expression& e) {
  int idx = mu * m - mu * (mu + 1) / 2 + (nu - mu - 1);
  stored_c[idx][gamma] = e;
}

namespace {

// Derived-family naming: coordinate "q1" yields v1/a1/p1; any other
// coordinate name keeps its full spelling (x -> vx, ax, px).
std::string family_name(char prefix, const std::string& coord) {
  if (coord.size() >= 2 && coord[0] == 'q' &&
      std::all_of(coord.begin() + 1, coord.end(),
                  [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return std::string(1, prefix) + coord.substr(1);
  return std::string(1, prefix) + coord;
}

struct Line {
  int no;
  std::string head;
  std::string rest;
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

int parse_index(const std::string& tok, int lo, int hi, const char* what, int line_no) {
  for (char c : tok)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw Error(ErrorCode::Parse, std::string("expected ") + what + " index, got '" + tok + "'",
                  line_no, 1);
  int v = std::atoi(tok.c_str());
  if (v < lo || v > hi)
    throw Error(ErrorCode::ArityMismatch,
                std::string(what) + " index " + tok + " out of range [" + std::to_string(lo) +
                    ", " + std::to_string(hi) + "]",
                line_no, 1);
  return v;
}

}  // namespace

ModelSpec parse_model(const std::string& text) {
  std::vector<Line> lines;
  {
    std::istringstream is(text);
    std::string raw;
    int no = 0;
    while (std::getline(is, raw)) {
      ++no;
      auto hash = raw.find('#');
      if (hash != std::string::npos) raw = raw.substr(0, hash);
      std::string t = trim(raw);
      if (t.empty()) continue;
      auto sp = t.find_first_of(" \t");
      std::string head = sp == std::string::npos ? t : t.substr(0, sp);
      std::string rest = sp == std::string::npos ? "" : trim(t.substr(sp));
      lines.push_back({no, head, rest});
    }
  }

  ModelSpec spec;
  bool have_name = false, have_dim = false, have_gauge = false, have_coords = false,
       have_lagrangian = false, have_hamiltonian = false;

  for (const auto& ln : lines) {
    if (ln.head == "model") {
      if (ln.rest.empty()) throw Error(ErrorCode::Parse, "model name missing", ln.no, 1);
      spec.name = split_ws(ln.rest)[0];
      have_name = true;
    } else if (ln.head == "dim") {
      spec.n = std::atoi(ln.rest.c_str());
      if (spec.n < 1) throw Error(ErrorCode::Parse, "dim must be a positive integer", ln.no, 1);
      have_dim = true;
    } else if (ln.head == "gauge") {
      spec.m = std::atoi(ln.rest.c_str());
      if (spec.m < 1) throw Error(ErrorCode::Parse, "gauge must be a positive integer", ln.no, 1);
      have_gauge = true;
    }
  }
  if (!have_name) throw Error(ErrorCode::MissingSection, "missing section: model");
  if (!have_dim) throw Error(ErrorCode::MissingSection, "missing section: dim");
  if (!have_gauge) throw Error(ErrorCode::MissingSection, "missing section: gauge");
  if (!(spec.m >= 1 && spec.m < spec.n))
    throw Error(ErrorCode::ArityMismatch,
                "constraint count must satisfy 1 <= m < n (got m=" + std::to_string(spec.m) +
                    ", n=" + std::to_string(spec.n) + ")");

  std::map<std::string, Expression> table;
  auto resolve = [&table](const std::string& name) -> std::optional<Expression> {
    auto it = table.find(name);
    if (it == table.end()) return std::nullopt;
    return it->second;
  };

  for (const auto& ln : lines) {
    if (ln.head != "coords") continue;
    if (have_coords) throw Error(ErrorCode::DuplicateName, "duplicate coords section", ln.no, 1);
    auto names = split_ws(ln.rest);
    if (static_cast<int>(names.size()) != spec.n)
      throw Error(ErrorCode::ArityMismatch,
                  "coords expects " + std::to_string(spec.n) + " identifiers, got " +
                      std::to_string(names.size()),
                  ln.no, 1);
    std::set<std::string> seen;
    for (int i = 0; i < spec.n; ++i) {
      const std::string& c = names[i];
      if (!seen.insert(c).second)
        throw Error(ErrorCode::DuplicateName, "duplicate coordinate '" + c + "'", ln.no, 1);
      Symbol sq = Symbol::make(c, SymbolKind::Coordinate, i);
      Symbol sv = Symbol::make(family_name('v', c), SymbolKind::Velocity, i);
      Symbol sa = Symbol::make(family_name('a', c), SymbolKind::Acceleration, i);
      Symbol sp = Symbol::make(family_name('p', c), SymbolKind::Momentum, i);
      spec.q.push_back(sq);
      spec.v.push_back(sv);
      spec.a.push_back(sa);
      spec.p.push_back(sp);
      table.emplace(c, Expression::symbol(sq));
      table.emplace(sv.name(), Expression::symbol(sv));
      table.emplace(sa.name(), Expression::symbol(sa));
      table.emplace(sp.name(), Expression::symbol(sp));
    }
    have_coords = true;
  }
  if (!have_coords) throw Error(ErrorCode::MissingSection, "missing section: coords");

  spec.stored_c.assign(static_cast<size_t>(spec.m) * (spec.m - 1) / 2,
                       std::vector<Expression>(spec.m, Expression::zero()));

  auto check_uses = [&](const Expression& e, bool allow_v, bool allow_p, const char* what,
                        int line_no) {
    std::vector<Symbol> syms;
    collect_symbols(e, syms);
    for (auto& s : syms) {
      if ((s.kind() == SymbolKind::Velocity && !allow_v) ||
          (s.kind() == SymbolKind::Momentum && !allow_p) ||
          s.kind() == SymbolKind::Acceleration)
        throw Error(ErrorCode::UnknownSymbol,
                    std::string(what) + " may not mention symbol '" + s.name() + "'", line_no, 1);
    }
  };

  std::set<std::string> cnames;
  std::set<std::pair<int, int>> structure_seen;
  std::vector<std::vector<Expression>> lam;
  bool lam_seen = false;

  for (const auto& ln : lines) {
    if (ln.head == "model" || ln.head == "dim" || ln.head == "gauge" || ln.head == "coords")
      continue;
    if (ln.head == "domain") {
      auto gt = ln.rest.rfind('>');
      if (gt == std::string::npos || trim(ln.rest.substr(gt + 1)) != "0")
        throw Error(ErrorCode::Parse, "domain line must end with '> 0'", ln.no, 1);
      Expression e = parse_expression(trim(ln.rest.substr(0, gt)), ln.no, resolve);
      check_uses(e, true, false, "domain predicate", ln.no);
      spec.domain.push_back(e);
    } else if (ln.head == "lagrangian") {
      if (have_lagrangian)
        throw Error(ErrorCode::DuplicateName, "duplicate lagrangian section", ln.no, 1);
      Expression e = parse_expression(ln.rest, ln.no, resolve);
      check_uses(e, true, false, "lagrangian", ln.no);
      spec.L = e;
      have_lagrangian = true;
    } else if (ln.head == "constraint") {
      auto sp = ln.rest.find_first_of(" \t");
      if (sp == std::string::npos)
        throw Error(ErrorCode::Parse, "constraint expects a name and an expression", ln.no, 1);
      std::string cname = ln.rest.substr(0, sp);
      if (!cnames.insert(cname).second)
        throw Error(ErrorCode::DuplicateName, "duplicate constraint name '" + cname + "'", ln.no,
                    1);
      Expression e = parse_expression(trim(ln.rest.substr(sp)), ln.no, resolve);
      check_uses(e, false, true, "constraint", ln.no);
      if (!mentions_kind(e, SymbolKind::Momentum))
        throw Error(ErrorCode::UnknownSymbol,
                    "constraint '" + cname + "' must depend on at least one momentum", ln.no, 1);
      spec.g_names.push_back(cname);
      spec.G.push_back(e);
    } else if (ln.head == "structure") {
      std::istringstream is(ln.rest);
      std::string ta, tb, tc;
      if (!(is >> ta >> tb >> tc))
        throw Error(ErrorCode::Parse, "structure expects: structure <a> <b> <c> <expr>", ln.no, 1);
      std::string exprText;
      std::getline(is, exprText);
      exprText = trim(exprText);
      if (exprText.empty())
        throw Error(ErrorCode::Parse, "structure expects: structure <a> <b> <c> <expr>", ln.no, 1);
      int a = parse_index(ta, 1, spec.m, "structure", ln.no);
      int b = parse_index(tb, 1, spec.m, "structure", ln.no);
      int g = parse_index(tc, 1, spec.m, "structure", ln.no);
      Expression e = parse_expression(exprText, ln.no, resolve);
      check_uses(e, false, true, "structure function", ln.no);
      if (a == b && !e.is_zero())
        throw Error(ErrorCode::StructureSymmetry,
                    "structure functions antisymmetric: diagonal must vanish", ln.no, 1);
      if (a > b)
        throw Error(ErrorCode::StructureSymmetry,
                    "structure functions antisymmetric: supply only entries with first index < "
                    "second",
                    ln.no, 1);
      if (!structure_seen.insert({a * spec.m + b, g}).second)
        throw Error(ErrorCode::DuplicateName, "duplicate structure entry", ln.no, 1);
      if (a != b) spec.set_c(a - 1, b - 1, g - 1, e);
    } else if (ln.head == "hamiltonian") {
      if (have_hamiltonian)
        throw Error(ErrorCode::DuplicateName, "duplicate hamiltonian section", ln.no, 1);
      Expression e = parse_expression(ln.rest, ln.no, resolve);
      check_uses(e, false, true, "hamiltonian", ln.no);
      spec.Hc = e;
      have_hamiltonian = true;
    } else if (ln.head == "rebase") {
      std::istringstream is(ln.rest);
      std::string ta, tb;
      if (!(is >> ta >> tb))
        throw Error(ErrorCode::Parse, "rebase expects: rebase <a> <b> <expr>", ln.no, 1);
      std::string exprText;
      std::getline(is, exprText);
      exprText = trim(exprText);
      if (exprText.empty())
        throw Error(ErrorCode::Parse, "rebase expects: rebase <a> <b> <expr>", ln.no, 1);
      int a = parse_index(ta, 1, spec.m, "rebase", ln.no);
      int b = parse_index(tb, 1, spec.m, "rebase", ln.no);
      Expression e = parse_expression(exprText, ln.no, resolve);
      check_uses(e, false, true, "rebase entry", ln.no);
      if (!lam_seen) {
        lam.assign(spec.m, std::vector<Expression>(spec.m, Expression::zero()));
        for (int i = 0; i < spec.m; ++i) lam[i][i] = Expression::one();
        lam_seen = true;
      }
      lam[a - 1][b - 1] = e;
    } else {
      throw Error(ErrorCode::Parse, "unknown section '" + ln.head + "'", ln.no, 1);
    }
  }

  if (!have_lagrangian) throw Error(ErrorCode::MissingSection, "missing section: lagrangian");
  if (!have_hamiltonian) throw Error(ErrorCode::MissingSection, "missing section: hamiltonian");
  if (static_cast<int>(spec.G.size()) != spec.m)
    throw Error(ErrorCode::ArityMismatch, "expected exactly " + std::to_string(spec.m) +
                                              " constraint lines, got " +
                                              std::to_string(spec.G.size()));
  if (lam_seen) spec.rebase = std::move(lam);
  return spec;
}

std::string render(const ModelSpec& spec) {
  std::ostringstream os;
  os << "model " << spec.name << "\n";
  os << "dim " << spec.n << "\n";
  os << "gauge " << spec.m << "\n";
  os << "coords";
  for (const auto& s : spec.q) os << " " << s.name();
  os << "\n";
  for (const auto& d : spec.domain) os << "domain " << to_string(d) << " > 0\n";
  os << "lagrangian " << to_string(spec.L) << "\n";
  for (int mu = 0; mu < spec.m; ++mu)
    os << "constraint " << spec.g_names[mu] << " " << to_string(spec.G[mu]) << "\n";
  for (int mu = 0; mu < spec.m; ++mu)
    for (int nu = mu + 1; nu < spec.m; ++nu)
      for (int g = 0; g < spec.m; ++g)
        if (!spec.c(mu, nu, g).is_zero())
          os << "structure " << mu + 1 << " " << nu + 1 << " " << g + 1 << " "
             << to_string(spec.c(mu, nu, g)) << "\n";
  os << "hamiltonian " << to_string(spec.Hc) << "\n";
  if (spec.rebase) {
    for (int i = 0; i < spec.m; ++i)
      for (int j = 0; j < spec.m; ++j) {
        const Expression& e = (*spec.rebase)[i][j];
        bool isDiag = i == j;
        if ((isDiag && e.is_one()) || (!isDiag && e.is_zero())) continue;
        os << "rebase " << i + 1 << " " << j + 1 << " " << to_string(e) << "\n";
      }
  }
  return os.str();
}

namespace {
// Deterministic uniforms: identical streams on every platform.
struct Uniform {
  std::mt19937_64 rng;
  explicit Uniform(uint64_t seed) : rng(seed) {}
  double next() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
  double box(double lo, double hi) { return lo + (hi - lo) * next(); }
};
}  // namespace

std::vector<SamplePoint> sample_points(const ModelSpec& spec, int count, uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::Usage, "sample count must be >= 1");
  Uniform u(seed);
  Bindings b;
  std::vector<SamplePoint> out;
  out.reserve(count);
  int consecutive_rejects = 0;
  while (static_cast<int>(out.size()) < count) {
    SamplePoint pt;
    pt.q.resize(spec.n);
    pt.v.resize(spec.n);
    pt.a.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) pt.q[i] = u.box(-2.0, 2.0);
    for (int i = 0; i < spec.n; ++i) pt.v[i] = u.box(-2.0, 2.0);
    for (int i = 0; i < spec.n; ++i) pt.a[i] = u.box(-2.0, 2.0);
    b.clear();
    for (int i = 0; i < spec.n; ++i) {
      b.set(spec.q[i], pt.q[i]);
      b.set(spec.v[i], pt.v[i]);
    }
    bool ok = true;
    for (const auto& pred : spec.domain) {
      double val;
      try {
        val = evaluate(pred, b);
      } catch (const Error&) {
        ok = false;
        break;
      }
      if (!(val > 0.0)) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      if (++consecutive_rejects >= 10000)
        throw Error(ErrorCode::DomainTooSmall,
                    "domain-too-small: 10000 consecutive rejections sampling model '" + spec.name +
                        "'");
      continue;
    }
    consecutive_rejects = 0;
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<PhasePoint> sample_phase_points(const ModelSpec& spec, int count, uint64_t seed) {
  // q must respect the domain, so reuse the sampler for the q block and a
  // decorrelated stream for p.
  auto base = sample_points(spec, count, seed);
  Uniform u(seed ^ 0x5bf0a8b1u);
  std::vector<PhasePoint> out;
  out.reserve(count);
  for (const auto& sp : base) {
    PhasePoint pp;
    pp.q = sp.q;
    pp.p.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) pp.p[i] = u.box(-2.0, 2.0);
    out.push_back(std::move(pp));
  }
  return out;
}

void bind_point(Bindings& b, const ModelSpec& spec, const SamplePoint& pt) {
  for (int i = 0; i < spec.n; ++i) {
    b.set(spec.q[i], pt.q[i]);
    b.set(spec.v[i], pt.v[i]);
    b.set(spec.a[i], pt.a[i]);
  }
}

void bind_point(Evaluator& ev, const ModelSpec& spec, const SamplePoint& pt) {
  for (int i = 0; i < spec.n; ++i) {
    ev.bind(spec.q[i], pt.q[i]);
    ev.bind(spec.v[i], pt.v[i]);
    ev.bind(spec.a[i], pt.a[i]);
  }
}

ValidationReport validate_model(const ModelSpec& spec, const std::vector<SamplePoint>& points,
                                double tol) {
  if (points.empty()) throw Error(ErrorCode::Usage, "validate_model requires points");
  ValidationReport rep;
  rep.points = static_cast<int>(points.size());
  rep.tolerance = tol;

  const int n = spec.n, m = spec.m;
  // Symbolic pieces once.
  std::vector<std::vector<Expression>> W(n, std::vector<Expression>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) W[i][j] = differentiate(differentiate(spec.L, spec.v[i]), spec.v[j]);
  std::map<Symbol, Expression> mom;
  std::vector<Expression> momv(n);
  for (int i = 0; i < n; ++i) {
    momv[i] = differentiate(spec.L, spec.v[i]);
    mom.emplace(spec.p[i], momv[i]);
  }
  std::vector<Expression> Gpull(m);
  for (int mu = 0; mu < m; ++mu) Gpull[mu] = substitute(spec.G[mu], mom);
  std::vector<std::vector<Expression>> R(m, std::vector<Expression>(n));
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i) R[mu][i] = substitute(differentiate(spec.G[mu], spec.p[i]), mom);
  Expression hc_pull = substitute(spec.Hc, mom);
  std::vector<Expression> vdL(n);
  for (int i = 0; i < n; ++i) vdL[i] = Expression::symbol(spec.v[i]) * momv[i];
  Expression energy = Expression::sum(vdL) - spec.L;

  Evaluator ev;
  for (const auto& pt : points) {
    ev.begin_point();
    bind_point(ev, spec, pt);
    Mat Wn(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Wn(i, j) = ev.eval(W[i][j]);
    int rw = numeric_rank(Wn);
    if (rw != n - m) {
      rep.rank_w_ok = false;
      rep.worst_rank_w = rw;
    }
    Mat Rn(m, n);
    for (int mu = 0; mu < m; ++mu)
      for (int i = 0; i < n; ++i) Rn(mu, i) = ev.eval(R[mu][i]);
    int rr = numeric_rank(Rn);
    if (rr != m) {
      rep.rank_r_ok = false;
      rep.worst_rank_r = rr;
    }
    for (int mu = 0; mu < m; ++mu)
      rep.max_constraint_residual =
          std::max(rep.max_constraint_residual, std::abs(ev.eval(Gpull[mu])));
    rep.max_hc_residual =
        std::max(rep.max_hc_residual, std::abs(ev.eval(hc_pull) - ev.eval(energy)));
  }
  rep.passed = rep.rank_w_ok && rep.rank_r_ok && rep.max_constraint_residual <= tol &&
               rep.max_hc_residual <= tol;
  return rep;
}

}  // namespace gsf
