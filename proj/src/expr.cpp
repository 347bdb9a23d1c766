#include "gsf/expr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace gsf {

// ---------------------------------------------------------------------------
// Rational

namespace {
long long check_ll(__int128 v, const char* what) {
  if (v > INT64_MAX || v < INT64_MIN)
    throw Error(ErrorCode::RationalOverflow, std::string("rational overflow in ") + what);
  return static_cast<long long>(v);
}
__int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}
}  // namespace

Rational Rational::normalized(__int128 n, __int128 d) {
  if (d == 0) throw Error(ErrorCode::RationalOverflow, "zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  __int128 g = gcd128(n, d);
  if (g > 1) {
    n /= g;
    d /= g;
  }
  Rational r;
  r.num = check_ll(n, "normalize");
  r.den = check_ll(d, "normalize");
  return r;
}

Rational::Rational(long long n, long long d) { *this = normalized(n, d); }

Rational Rational::operator+(const Rational& o) const {
  return normalized(static_cast<__int128>(num) * o.den + static_cast<__int128>(o.num) * den,
                    static_cast<__int128>(den) * o.den);
}
Rational Rational::operator-(const Rational& o) const { return *this + Rational(-o.num, o.den); }
Rational Rational::operator*(const Rational& o) const {
  return normalized(static_cast<__int128>(num) * o.num, static_cast<__int128>(den) * o.den);
}
Rational Rational::operator/(const Rational& o) const {
  if (o.num == 0) throw Error(ErrorCode::RationalOverflow, "rational division by zero");
  return normalized(static_cast<__int128>(num) * o.den, static_cast<__int128>(den) * o.num);
}

Rational Rational::ipow(long long k) const {
  if (k == 0) return Rational(1);
  if (num == 0) {
    if (k < 0) throw Error(ErrorCode::DomainError, "0 raised to a negative power");
    return Rational(0);
  }
  Rational base = k < 0 ? Rational(den, num) : *this;
  long long e = k < 0 ? -k : k;
  Rational acc(1);
  while (e > 0) {
    if (e & 1) acc = acc * base;
    base = e > 1 ? base * base : base;
    e >>= 1;
  }
  return acc;
}

std::string Rational::str() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

// ---------------------------------------------------------------------------
// Symbol registry

namespace {
struct SymbolInfo {
  std::string name;
  SymbolKind kind;
  int index;
};
struct SymbolRegistry {
  std::mutex mu;
  std::vector<SymbolInfo> infos;  // id-1 indexed; id 0 reserved
};
SymbolRegistry& registry() {
  static SymbolRegistry r;
  return r;
}
}  // namespace

Symbol Symbol::make(const std::string& name, SymbolKind kind, int index) {
  auto& r = registry();
  std::lock_guard<std::mutex> lk(r.mu);
  r.infos.push_back({name, kind, index});
  return Symbol(static_cast<uint32_t>(r.infos.size()));
}

Symbol symbol_from_id(uint32_t id) { return Symbol(id); }

const std::string& Symbol::name() const {
  auto& r = registry();
  std::lock_guard<std::mutex> lk(r.mu);
  return r.infos.at(id_ - 1).name;
}
SymbolKind Symbol::kind() const {
  auto& r = registry();
  std::lock_guard<std::mutex> lk(r.mu);
  return r.infos.at(id_ - 1).kind;
}
int Symbol::index() const {
  auto& r = registry();
  std::lock_guard<std::mutex> lk(r.mu);
  return r.infos.at(id_ - 1).index;
}

// ---------------------------------------------------------------------------
// Nodes and interning

struct Node {
  NodeKind kind;
  uint32_t uid;
  uint64_t shash;  // registration-independent structural hash
  Rational value;  // Constant payload, or Power exponent
  uint32_t symbol = 0;
  FuncKind func = FuncKind::Sin;
  std::vector<Expression> kids;
};

namespace {

uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

struct InternKey {
  NodeKind kind;
  long long num, den;
  uint32_t symbol;
  FuncKind func;
  std::vector<uint32_t> kids;
  bool operator==(const InternKey& o) const {
    return kind == o.kind && num == o.num && den == o.den && symbol == o.symbol &&
           func == o.func && kids == o.kids;
  }
};
struct InternKeyHash {
  size_t operator()(const InternKey& k) const {
    uint64_t h = mix(0, static_cast<uint64_t>(k.kind));
    h = mix(h, static_cast<uint64_t>(k.num));
    h = mix(h, static_cast<uint64_t>(k.den));
    h = mix(h, k.symbol);
    h = mix(h, static_cast<uint64_t>(k.func));
    for (uint32_t u : k.kids) h = mix(h, u);
    return static_cast<size_t>(h);
  }
};

struct InternTable {
  std::mutex mu;
  std::unordered_map<InternKey, std::shared_ptr<const Node>, InternKeyHash> map;
  uint32_t next_uid = 1;
};
InternTable& interns() {
  static InternTable t;
  return t;
}

uint32_t g_uid_count_hint = 0;  // updated under interns().mu; read for sizing only

std::shared_ptr<const Node> intern(NodeKind kind, Rational value, uint32_t symbol, FuncKind func,
                                   std::vector<Expression> kids) {
  InternKey key;
  key.kind = kind;
  key.num = value.num;
  key.den = value.den;
  key.symbol = symbol;
  key.func = func;
  key.kids.reserve(kids.size());
  for (const auto& k : kids) key.kids.push_back(k.uid());
  auto& t = interns();
  std::lock_guard<std::mutex> lk(t.mu);
  auto it = t.map.find(key);
  if (it != t.map.end()) return it->second;
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->uid = t.next_uid++;
  n->value = value;
  n->symbol = symbol;
  n->func = func;
  n->kids = std::move(kids);
  uint64_t h = mix(0x53484153u, static_cast<uint64_t>(kind));
  h = mix(h, static_cast<uint64_t>(value.num));
  h = mix(h, static_cast<uint64_t>(value.den));
  if (symbol != 0) h = mix(h, std::hash<std::string>()(symbol_from_id(symbol).name()));
  h = mix(h, static_cast<uint64_t>(func));
  for (const auto& k : n->kids) h = mix(h, k.raw()->shash);
  n->shash = h;
  t.map.emplace(std::move(key), n);
  g_uid_count_hint = t.next_uid;
  return n;
}

std::shared_ptr<const Node> intern_const(const Rational& r) {
  return intern(NodeKind::Constant, r, 0, FuncKind::Sin, {});
}

// Canonical child order: constants first, then by structural hash so that
// structurally equal trees sort identically regardless of when their symbols
// were registered; uid breaks the (astronomically unlikely) hash ties.
bool uid_less(const Expression& a, const Expression& b) {
  bool ca = a.kind() == NodeKind::Constant;
  bool cb = b.kind() == NodeKind::Constant;
  if (ca != cb) return ca;
  if (ca && cb) {
    __int128 lhs = static_cast<__int128>(a.value().num) * b.value().den;
    __int128 rhs = static_cast<__int128>(b.value().num) * a.value().den;
    if (lhs != rhs) return lhs < rhs;
    return a.uid() < b.uid();
  }
  if (a.raw()->shash != b.raw()->shash) return a.raw()->shash < b.raw()->shash;
  return a.uid() < b.uid();
}

std::pair<Rational, Expression> split_coeff(const Expression& term);

// Sum children order by the coefficient-stripped rest, so a sum and its
// termwise negation sort identically and the canonical-sign rule below is
// stable under negation.
bool term_less(const Expression& a, const Expression& b) {
  bool ca = a.kind() == NodeKind::Constant;
  bool cb = b.kind() == NodeKind::Constant;
  if (ca != cb) return ca;
  if (ca && cb) return uid_less(a, b);
  auto [coeffA, restA] = split_coeff(a);
  auto [coeffB, restB] = split_coeff(b);
  if (restA.raw()->shash != restB.raw()->shash) return restA.raw()->shash < restB.raw()->shash;
  if (restA.uid() != restB.uid()) return restA.uid() < restB.uid();
  __int128 lhs = static_cast<__int128>(coeffA.num) * coeffB.den;
  __int128 rhs = static_cast<__int128>(coeffB.num) * coeffA.den;
  return lhs < rhs;
}

// Splits a normalized term into (rational coefficient, non-constant rest).
// rest == one() when the term is purely constant.
std::pair<Rational, Expression> split_coeff(const Expression& term) {
  if (term.kind() == NodeKind::Constant) return {term.value(), Expression::one()};
  if (term.kind() == NodeKind::Product) {
    Rational c(1);
    std::vector<Expression> rest;
    rest.reserve(term.kids().size());
    for (const auto& k : term.kids()) {
      if (k.kind() == NodeKind::Constant)
        c = c * k.value();
      else
        rest.push_back(k);
    }
    if (rest.empty()) return {c, Expression::one()};
    if (rest.size() == 1) return {c, rest[0]};
    // children are already canonical and sorted; re-intern directly
    return {c, Expression::product(std::move(rest))};
  }
  return {Rational(1), term};
}

// Integer k-th root if exact, otherwise nullopt.
std::optional<long long> exact_root(long long v, long long k) {
  if (v < 0) return std::nullopt;
  if (v == 0 || v == 1) return v;
  long long r = static_cast<long long>(std::llround(std::pow(static_cast<double>(v), 1.0 / static_cast<double>(k))));
  for (long long c = std::max(1LL, r - 2); c <= r + 2; ++c) {
    __int128 acc = 1;
    for (long long i = 0; i < k; ++i) {
      acc *= c;
      if (acc > INT64_MAX) break;
    }
    if (acc == v) return c;
  }
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------
// Expression basics

Expression::Expression() : node_(intern_const(Rational(0))) {}

Expression Expression::zero() { return Expression(intern_const(Rational(0))); }
Expression Expression::one() { return Expression(intern_const(Rational(1))); }

Expression Expression::constant(const Rational& r) { return Expression(intern_const(r)); }

Expression Expression::symbol(Symbol s) {
  if (s.id() == 0) throw Error(ErrorCode::UnknownSymbol, "null symbol");
  return Expression(intern(NodeKind::SymbolRef, Rational(0), s.id(), FuncKind::Sin, {}));
}

NodeKind Expression::kind() const { return node_->kind; }
uint32_t Expression::uid() const { return node_->uid; }
const Rational& Expression::value() const { return node_->value; }
Symbol Expression::sym() const { return symbol_from_id(node_->symbol); }
FuncKind Expression::func_kind() const { return node_->func; }
const std::vector<Expression>& Expression::kids() const { return node_->kids; }
bool Expression::is_zero() const { return node_->kind == NodeKind::Constant && node_->value.is_zero(); }
bool Expression::is_one() const { return node_->kind == NodeKind::Constant && node_->value.is_one(); }

Expression Expression::sum(std::vector<Expression> terms) {
  // flatten + fold constants
  std::vector<Expression> flat;
  flat.reserve(terms.size());
  Rational cst(0);
  for (auto& t : terms) {
    if (t.kind() == NodeKind::Sum) {
      for (const auto& k : t.kids()) {
        if (k.kind() == NodeKind::Constant)
          cst = cst + k.value();
        else
          flat.push_back(k);
      }
    } else if (t.kind() == NodeKind::Constant) {
      cst = cst + t.value();
    } else {
      flat.push_back(std::move(t));
    }
  }
  // collect like terms by their non-constant part
  std::vector<std::pair<Expression, Rational>> groups;  // (rest, coeff), insertion order
  std::unordered_map<uint32_t, size_t> index;
  for (const auto& t : flat) {
    auto [c, rest] = split_coeff(t);
    if (rest.is_one()) {
      cst = cst + c;
      continue;
    }
    auto it = index.find(rest.uid());
    if (it == index.end()) {
      index.emplace(rest.uid(), groups.size());
      groups.emplace_back(rest, c);
    } else {
      groups[it->second].second = groups[it->second].second + c;
    }
  }
  std::vector<Expression> out;
  out.reserve(groups.size() + 1);
  for (auto& [rest, c] : groups) {
    if (c.is_zero()) continue;
    if (c.is_one())
      out.push_back(rest);
    else
      out.push_back(Expression::product({Expression::constant(c), rest}));
  }
  if (!cst.is_zero()) out.push_back(Expression::constant(cst));
  if (out.empty()) return zero();
  if (out.size() == 1) return out[0];
  std::sort(out.begin(), out.end(), term_less);
  // canonical sign: the first non-constant term carries a positive
  // coefficient, so a sum and its negation share one interned node up to an
  // explicit -1 factor (this is what lets negated pairs cancel structurally)
  for (const auto& t : out) {
    if (t.kind() == NodeKind::Constant) continue;
    if (split_coeff(t).first.is_negative()) {
      std::vector<Expression> neg;
      neg.reserve(out.size());
      for (const auto& x : out) neg.push_back(Expression::product({constant(-1), x}));
      return Expression::product({constant(-1), Expression::sum(std::move(neg))});
    }
    break;
  }
  return Expression(intern(NodeKind::Sum, Rational(0), 0, FuncKind::Sin, std::move(out)));
}

Expression Expression::product(std::vector<Expression> factors) {
  std::vector<Expression> work = std::move(factors);
  Rational cst(1);
  // (base uid -> position) exponent collection
  std::vector<std::pair<Expression, Rational>> groups;  // (base, exponent)
  std::unordered_map<uint32_t, size_t> index;
  auto add_factor = [&](const Expression& base, const Rational& exp) {
    auto it = index.find(base.uid());
    if (it == index.end()) {
      index.emplace(base.uid(), groups.size());
      groups.emplace_back(base, exp);
    } else {
      groups[it->second].second = groups[it->second].second + exp;
    }
  };
  for (size_t i = 0; i < work.size(); ++i) {
    Expression f = work[i];
    if (f.kind() == NodeKind::Product) {
      for (const auto& k : f.kids()) work.push_back(k);
      continue;
    }
    if (f.kind() == NodeKind::Constant) {
      if (f.value().is_zero()) return zero();
      cst = cst * f.value();
      continue;
    }
    if (f.kind() == NodeKind::Power) {
      add_factor(f.kids()[0], f.value());
      continue;
    }
    add_factor(f, Rational(1));
  }
  // rebuild factors; exponent arithmetic may fold back into constants/products
  std::vector<Expression> out;
  std::vector<std::pair<Expression, Rational>> fractional;  // power factors with non-integer exp
  bool reexpand = false;
  for (auto& [base, exp] : groups) {
    if (exp.is_zero()) continue;
    Expression built = exp.is_one() ? base : Expression::power(base, exp);
    if (built.kind() == NodeKind::Constant) {
      if (built.value().is_zero()) return zero();
      cst = cst * built.value();
      continue;
    }
    if (built.kind() == NodeKind::Product) {
      // power() distributed over a product; flatten again in one more pass
      out.push_back(built);
      reexpand = true;
      continue;
    }
    if (built.kind() == NodeKind::Power && !built.value().is_integer())
      fractional.emplace_back(built.kids()[0], built.value());
    else
      out.push_back(built);
  }
  // merge fractional powers sharing an exponent: a^f * b^f -> (a*b)^f.
  // Both sides need nonnegative bases wherever the original evaluates, so the
  // rewrite cannot turn a valid evaluation into a domain error.
  std::sort(fractional.begin(), fractional.end(),
            [](const auto& a, const auto& b) {
              if (a.second.num != b.second.num) return a.second.num < b.second.num;
              if (a.second.den != b.second.den) return a.second.den < b.second.den;
              return a.first.uid() < b.first.uid();
            });
  for (size_t i = 0; i < fractional.size();) {
    size_t j = i;
    std::vector<Expression> bases;
    while (j < fractional.size() && fractional[j].second == fractional[i].second) {
      bases.push_back(fractional[j].first);
      ++j;
    }
    Expression built;
    if (bases.size() == 1) {
      built = Expression::power(bases[0], fractional[i].second);
    } else {
      built = Expression::power(Expression::product(std::move(bases)), fractional[i].second);
    }
    if (built.kind() == NodeKind::Constant) {
      if (built.value().is_zero()) return zero();
      cst = cst * built.value();
    } else {
      out.push_back(built);
      if (built.kind() == NodeKind::Product) reexpand = true;
    }
    i = j;
  }
  if (reexpand) {
    if (!cst.is_one()) out.push_back(Expression::constant(cst));
    return Expression::product(std::move(out));
  }
  if (out.empty()) return Expression::constant(cst);
  if (!cst.is_one()) out.push_back(Expression::constant(cst));
  if (out.size() == 1) return out[0];
  std::sort(out.begin(), out.end(), uid_less);
  return Expression(intern(NodeKind::Product, Rational(0), 0, FuncKind::Sin, std::move(out)));
}

Expression Expression::power(const Expression& base, const Rational& e) {
  if (e.is_zero()) return one();
  if (e.is_one()) return base;
  if (base.kind() == NodeKind::Constant) {
    const Rational& b = base.value();
    if (e.is_integer()) return constant(b.ipow(e.num));
    if (b.is_zero()) {
      if (e.num > 0) return zero();
      throw Error(ErrorCode::DomainError, "0 raised to a negative fractional power");
    }
    if (!b.is_negative()) {
      auto rn = exact_root(b.num, e.den);
      auto rd = exact_root(b.den, e.den);
      if (rn && rd) return constant(Rational(*rn, *rd).ipow(e.num));
    }
    // inexact or negative-base fractional power: keep the node
  }
  if (base.kind() == NodeKind::Power) {
    const Rational& inner = base.value();
    // (x^a)^b == x^(ab) when b is an integer, or when a is non-integer (then
    // x must be nonnegative wherever the inner power evaluates).
    if (e.is_integer() || !inner.is_integer()) return power(base.kids()[0], inner * e);
  }
  if (base.kind() == NodeKind::Product && e.is_integer()) {
    std::vector<Expression> parts;
    parts.reserve(base.kids().size());
    for (const auto& k : base.kids()) parts.push_back(power(k, e));
    return product(std::move(parts));
  }
  return Expression(intern(NodeKind::Power, e, 0, FuncKind::Sin, {base}));
}

Expression Expression::func(FuncKind f, const Expression& arg) {
  if (arg.kind() == NodeKind::Constant) {
    const Rational& v = arg.value();
    if (v.is_zero()) {
      switch (f) {
        case FuncKind::Sin: return zero();
        case FuncKind::Cos: return one();
        case FuncKind::Exp: return one();
        case FuncKind::Ln: throw Error(ErrorCode::DomainError, "ln(0)");
      }
    }
    if (v.is_one() && f == FuncKind::Ln) return zero();
  }
  return Expression(intern(NodeKind::Func, Rational(0), 0, f, {arg}));
}

Expression pow(const Expression& base, const Rational& e) { return Expression::power(base, e); }
Expression sqrt(const Expression& e) { return Expression::power(e, Rational(1, 2)); }
Expression sin(const Expression& e) { return Expression::func(FuncKind::Sin, e); }
Expression cos(const Expression& e) { return Expression::func(FuncKind::Cos, e); }
Expression exp(const Expression& e) { return Expression::func(FuncKind::Exp, e); }
Expression ln(const Expression& e) { return Expression::func(FuncKind::Ln, e); }

// ---------------------------------------------------------------------------
// Bindings

void Bindings::set(Symbol s, double v) {
  uint32_t id = s.id();
  if (vals_.size() <= id) {
    vals_.resize(id + 1, 0.0);
    isset_.resize(id + 1, 0);
  }
  vals_[id] = v;
  isset_[id] = 1;
}
std::optional<double> Bindings::get(Symbol s) const {
  uint32_t id = s.id();
  if (id < isset_.size() && isset_[id]) return vals_[id];
  return std::nullopt;
}
void Bindings::clear() {
  vals_.clear();
  isset_.clear();
}

// ---------------------------------------------------------------------------
// differentiate, with a process-wide memo over (node, symbol)

namespace {
struct DiffMemo {
  std::mutex mu;
  std::unordered_map<uint64_t, Expression> map;
};
DiffMemo& diff_memo() {
  static DiffMemo m;
  return m;
}
}  // namespace

Expression differentiate(const Expression& e, Symbol s) {
  uint64_t key = (static_cast<uint64_t>(e.uid()) << 32) | s.id();
  {
    auto& m = diff_memo();
    std::lock_guard<std::mutex> lk(m.mu);
    auto it = m.map.find(key);
    if (it != m.map.end()) return it->second;
  }
  Expression result;
  switch (e.kind()) {
    case NodeKind::Constant:
      result = Expression::zero();
      break;
    case NodeKind::SymbolRef:
      result = e.sym() == s ? Expression::one() : Expression::zero();
      break;
    case NodeKind::Sum: {
      std::vector<Expression> parts;
      for (const auto& k : e.kids()) {
        Expression d = differentiate(k, s);
        if (!d.is_zero()) parts.push_back(d);
      }
      result = Expression::sum(std::move(parts));
      break;
    }
    case NodeKind::Product: {
      std::vector<Expression> parts;
      const auto& kids = e.kids();
      for (size_t i = 0; i < kids.size(); ++i) {
        Expression d = differentiate(kids[i], s);
        if (d.is_zero()) continue;
        std::vector<Expression> term;
        term.reserve(kids.size());
        for (size_t j = 0; j < kids.size(); ++j) term.push_back(j == i ? d : kids[j]);
        parts.push_back(Expression::product(std::move(term)));
      }
      result = Expression::sum(std::move(parts));
      break;
    }
    case NodeKind::Power: {
      const Expression& b = e.kids()[0];
      Expression db = differentiate(b, s);
      if (db.is_zero()) {
        result = Expression::zero();
      } else {
        const Rational& r = e.value();
        result = Expression::product(
            {Expression::constant(r), Expression::power(b, r - Rational(1)), db});
      }
      break;
    }
    case NodeKind::Func: {
      const Expression& u = e.kids()[0];
      Expression du = differentiate(u, s);
      if (du.is_zero()) {
        result = Expression::zero();
      } else {
        Expression outer;
        switch (e.func_kind()) {
          case FuncKind::Sin: outer = cos(u); break;
          case FuncKind::Cos: outer = -sin(u); break;
          case FuncKind::Exp: outer = exp(u); break;
          case FuncKind::Ln: outer = Expression::power(u, Rational(-1)); break;
        }
        result = outer * du;
      }
      break;
    }
  }
  auto& m = diff_memo();
  std::lock_guard<std::mutex> lk(m.mu);
  m.map.emplace(key, result);
  return result;
}

// ---------------------------------------------------------------------------
// substitute (simultaneous)

namespace {
Expression substitute_impl(const Expression& e, const std::map<Symbol, Expression>& assignments,
                           std::unordered_map<uint32_t, Expression>& memo) {
  auto it = memo.find(e.uid());
  if (it != memo.end()) return it->second;
  Expression result;
  switch (e.kind()) {
    case NodeKind::Constant:
      result = e;
      break;
    case NodeKind::SymbolRef: {
      auto a = assignments.find(e.sym());
      result = a == assignments.end() ? e : a->second;
      break;
    }
    case NodeKind::Sum:
    case NodeKind::Product: {
      std::vector<Expression> parts;
      parts.reserve(e.kids().size());
      bool changed = false;
      for (const auto& k : e.kids()) {
        Expression sk = substitute_impl(k, assignments, memo);
        changed = changed || !sk.same(k);
        parts.push_back(sk);
      }
      if (!changed)
        result = e;
      else
        result = e.kind() == NodeKind::Sum ? Expression::sum(std::move(parts))
                                           : Expression::product(std::move(parts));
      break;
    }
    case NodeKind::Power: {
      Expression b = substitute_impl(e.kids()[0], assignments, memo);
      result = b.same(e.kids()[0]) ? e : Expression::power(b, e.value());
      break;
    }
    case NodeKind::Func: {
      Expression u = substitute_impl(e.kids()[0], assignments, memo);
      result = u.same(e.kids()[0]) ? e : Expression::func(e.func_kind(), u);
      break;
    }
  }
  memo.emplace(e.uid(), result);
  return result;
}
}  // namespace

Expression substitute(const Expression& e, const std::map<Symbol, Expression>& assignments) {
  std::unordered_map<uint32_t, Expression> memo;
  return substitute_impl(e, assignments, memo);
}

// ---------------------------------------------------------------------------
// evaluate

namespace {
double eval_power(double b, const Rational& r, const Expression& where) {
  if (r.is_integer()) {
    long long k = r.num;
    if (b == 0.0 && k < 0)
      throw Error(ErrorCode::DomainError, "division by zero in " + to_string(where));
    double base = k < 0 ? 1.0 / b : b;
    long long e = k < 0 ? -k : k;
    double acc = 1.0;
    while (e > 0) {
      if (e & 1) acc *= base;
      base = e > 1 ? base * base : base;
      e >>= 1;
    }
    return acc;
  }
  if (r.den == 2) {
    if (b < 0.0)
      throw Error(ErrorCode::DomainError, "square root of negative value in " + to_string(where));
    if (b == 0.0 && r.num < 0)
      throw Error(ErrorCode::DomainError, "division by zero in " + to_string(where));
    double s = std::sqrt(b);
    return eval_power(s, Rational(r.num), where);
  }
  if (b < 0.0)
    throw Error(ErrorCode::DomainError, "fractional power of negative value in " + to_string(where));
  if (b == 0.0 && r.num < 0)
    throw Error(ErrorCode::DomainError, "division by zero in " + to_string(where));
  return std::pow(b, r.to_double());
}

// Neumaier-compensated summation: the result is correctly rounded to within
// a couple of ulps independent of the children's canonical order, which keeps
// substitution/normalization from perturbing evaluated values.
struct CompSum {
  double s = 0.0, c = 0.0;
  void add(double v) {
    double t = s + v;
    if (std::abs(s) >= std::abs(v))
      c += (s - t) + v;
    else
      c += (v - t) + s;
    s = t;
  }
  double get() const { return s + c; }
};

double eval_rec(const Expression& e, const Bindings& b) {
  switch (e.kind()) {
    case NodeKind::Constant:
      return e.value().to_double();
    case NodeKind::SymbolRef: {
      auto v = b.get(e.sym());
      if (!v) throw Error(ErrorCode::UnboundSymbol, "unbound symbol " + e.sym().name());
      return *v;
    }
    case NodeKind::Sum: {
      CompSum acc;
      for (const auto& k : e.kids()) acc.add(eval_rec(k, b));
      return acc.get();
    }
    case NodeKind::Product: {
      double acc = 1.0;
      for (const auto& k : e.kids()) acc *= eval_rec(k, b);
      return acc;
    }
    case NodeKind::Power:
      return eval_power(eval_rec(e.kids()[0], b), e.value(), e);
    case NodeKind::Func: {
      double u = eval_rec(e.kids()[0], b);
      switch (e.func_kind()) {
        case FuncKind::Sin: return std::sin(u);
        case FuncKind::Cos: return std::cos(u);
        case FuncKind::Exp: return std::exp(u);
        case FuncKind::Ln:
          if (u <= 0.0)
            throw Error(ErrorCode::DomainError, "ln of non-positive value in " + to_string(e));
          return std::log(u);
      }
    }
  }
  return 0.0;
}
}  // namespace

double evaluate(const Expression& e, const Bindings& b) {
  double v = eval_rec(e, b);
  if (!std::isfinite(v))
    throw Error(ErrorCode::DomainError, "non-finite result evaluating " + to_string(e));
  return v;
}

// ---------------------------------------------------------------------------
// simplify: constructors already normalize, so simplifying is a bottom-up
// rebuild. Idempotent because canonical trees rebuild to themselves.

namespace {
Expression simplify_impl(const Expression& e, std::unordered_map<uint32_t, Expression>& memo) {
  auto it = memo.find(e.uid());
  if (it != memo.end()) return it->second;
  Expression result;
  switch (e.kind()) {
    case NodeKind::Constant:
    case NodeKind::SymbolRef:
      result = e;
      break;
    case NodeKind::Sum:
    case NodeKind::Product: {
      std::vector<Expression> parts;
      parts.reserve(e.kids().size());
      for (const auto& k : e.kids()) parts.push_back(simplify_impl(k, memo));
      result = e.kind() == NodeKind::Sum ? Expression::sum(std::move(parts))
                                         : Expression::product(std::move(parts));
      break;
    }
    case NodeKind::Power:
      result = Expression::power(simplify_impl(e.kids()[0], memo), e.value());
      break;
    case NodeKind::Func:
      result = Expression::func(e.func_kind(), simplify_impl(e.kids()[0], memo));
      break;
  }
  memo.emplace(e.uid(), result);
  return result;
}
}  // namespace

Expression simplify(const Expression& e) {
  std::unordered_map<uint32_t, Expression> memo;
  return simplify_impl(e, memo);
}

// ---------------------------------------------------------------------------
// symbol scans

namespace {
void collect_impl(const Expression& e, std::vector<uint8_t>& seen, std::vector<Symbol>& out,
                  std::vector<uint8_t>& visited) {
  if (e.uid() < visited.size() && visited[e.uid()]) return;
  if (e.uid() >= visited.size()) visited.resize(e.uid() + 1, 0);
  visited[e.uid()] = 1;
  if (e.kind() == NodeKind::SymbolRef) {
    uint32_t id = e.sym().id();
    if (id >= seen.size()) seen.resize(id + 1, 0);
    if (!seen[id]) {
      seen[id] = 1;
      out.push_back(e.sym());
    }
    return;
  }
  for (const auto& k : e.kids()) collect_impl(k, seen, out, visited);
}
}  // namespace

void collect_symbols(const Expression& e, std::vector<Symbol>& out) {
  std::vector<uint8_t> seen, visited;
  collect_impl(e, seen, out, visited);
}

bool mentions(const Expression& e, Symbol s) {
  std::vector<Symbol> syms;
  collect_symbols(e, syms);
  for (auto& x : syms)
    if (x == s) return true;
  return false;
}

bool mentions_kind(const Expression& e, SymbolKind k) {
  std::vector<Symbol> syms;
  collect_symbols(e, syms);
  for (auto& x : syms)
    if (x.kind() == k) return true;
  return false;
}

Expression total_time_derivative(const Expression& e, const JetFamilies& fam) {
  if (mentions_kind(e, SymbolKind::Acceleration))
    throw Error(ErrorCode::OrderOverflow,
                "total time derivative of an expression that already contains accelerations");
  std::vector<Symbol> syms;
  collect_symbols(e, syms);
  std::vector<Expression> parts;
  for (size_t k = 0; k < fam.coords.size(); ++k) {
    bool hasQ = false, hasV = false;
    for (auto& s : syms) {
      if (s == fam.coords[k]) hasQ = true;
      if (s == fam.velocities[k]) hasV = true;
    }
    if (hasQ)
      parts.push_back(differentiate(e, fam.coords[k]) * Expression::symbol(fam.velocities[k]));
    if (hasV)
      parts.push_back(differentiate(e, fam.velocities[k]) * Expression::symbol(fam.accelerations[k]));
  }
  return Expression::sum(std::move(parts));
}

// ---------------------------------------------------------------------------
// printing

namespace {
enum Prec { PrecSum = 0, PrecProd = 1, PrecUnary = 2, PrecPow = 3, PrecAtom = 4 };

void print_rec(const Expression& e, std::string& out, int parentPrec);

void print_wrapped(const Expression& e, std::string& out, int parentPrec, int myPrec) {
  if (myPrec < parentPrec) {
    out += '(';
    print_rec(e, out, PrecSum);
    out += ')';
  } else {
    print_rec(e, out, parentPrec);
  }
}

void print_rec(const Expression& e, std::string& out, int parentPrec) {
  switch (e.kind()) {
    case NodeKind::Constant: {
      const Rational& r = e.value();
      bool neg = r.is_negative();
      bool frac = !r.is_integer();
      int myPrec = neg ? PrecUnary : (frac ? PrecProd : PrecAtom);
      if (myPrec < parentPrec) {
        out += '(' + r.str() + ')';
      } else {
        out += r.str();
      }
      return;
    }
    case NodeKind::SymbolRef:
      out += e.sym().name();
      return;
    case NodeKind::Sum: {
      bool wrap = PrecSum < parentPrec;
      if (wrap) out += '(';
      bool first = true;
      for (const auto& k : e.kids()) {
        auto [c, rest] = split_coeff(k);
        if (!first) out += c.is_negative() ? " - " : " + ";
        if (first && c.is_negative()) out += '-';
        Rational ca = c.is_negative() ? -c : c;
        if (rest.is_one()) {
          out += ca.str();
        } else if (ca.is_one()) {
          print_rec(rest, out, first && !wrap ? parentPrec : PrecSum + 1);
        } else {
          out += ca.str();
          out += '*';
          print_rec(rest, out, PrecProd + 1);
        }
        first = false;
      }
      if (wrap) out += ')';
      return;
    }
    case NodeKind::Product: {
      bool wrap = PrecProd < parentPrec;
      if (wrap) out += '(';
      bool first = true;
      for (const auto& k : e.kids()) {
        if (!first) out += '*';
        print_rec(k, out, PrecProd + 1);
        first = false;
      }
      if (wrap) out += ')';
      return;
    }
    case NodeKind::Power: {
      const Rational& r = e.value();
      if (r == Rational(1, 2)) {
        out += "sqrt(";
        print_rec(e.kids()[0], out, PrecSum);
        out += ')';
        return;
      }
      bool wrap = PrecPow < parentPrec;
      if (wrap) out += '(';
      print_wrapped(e.kids()[0], out, PrecAtom, e.kids()[0].kind() == NodeKind::SymbolRef ||
                                                        e.kids()[0].kind() == NodeKind::Func
                                                    ? PrecAtom
                                                    : PrecSum);
      out += '^';
      out += r.str();
      if (wrap) out += ')';
      return;
    }
    case NodeKind::Func: {
      switch (e.func_kind()) {
        case FuncKind::Sin: out += "sin("; break;
        case FuncKind::Cos: out += "cos("; break;
        case FuncKind::Exp: out += "exp("; break;
        case FuncKind::Ln: out += "ln("; break;
      }
      print_rec(e.kids()[0], out, PrecSum);
      out += ')';
      return;
    }
  }
}
}  // namespace

std::string to_string(const Expression& e) {
  std::string out;
  print_rec(e, out, PrecSum);
  return out;
}

// ---------------------------------------------------------------------------
// expression parser

namespace {
struct Tok {
  enum Type { Num, Ident, Op, End } type;
  std::string text;
  Rational value;  // Num
  int col;
};

struct Lexer {
  const std::string& s;
  int line;
  size_t pos = 0;
  explicit Lexer(const std::string& str, int line) : s(str), line(line) {}

  [[noreturn]] void fail(const std::string& msg, int col) {
    throw Error(ErrorCode::Parse, msg, line, col);
  }

  Tok next() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    int col = static_cast<int>(pos) + 1;
    if (pos >= s.size()) return {Tok::End, "", Rational(0), col};
    char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos + 1 < s.size() &&
                                                        std::isdigit(static_cast<unsigned char>(s[pos + 1])))) {
      size_t start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      Rational v(0);
      if (pos < s.size() && s[pos] == '.') {
        ++pos;
        size_t fracStart = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        std::string whole = s.substr(start, fracStart - 1 - start);
        std::string frac = s.substr(fracStart, pos - fracStart);
        if (whole.empty()) whole = "0";
        try {
          __int128 num = 0;
          for (char ch : whole + frac) num = num * 10 + (ch - '0');
          __int128 den = 1;
          for (size_t i = 0; i < frac.size(); ++i) den *= 10;
          v = Rational::normalized(num, den);
        } catch (const Error&) {
          fail("numeric literal out of range", col);
        }
      } else {
        std::string whole = s.substr(start, pos - start);
        try {
          __int128 num = 0;
          for (char ch : whole) num = num * 10 + (ch - '0');
          v = Rational::normalized(num, 1);
        } catch (const Error&) {
          fail("numeric literal out of range", col);
        }
      }
      return {Tok::Num, s.substr(start, pos - start), v, col};
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      return {Tok::Ident, s.substr(start, pos - start), Rational(0), col};
    }
    if (std::string("+-*/^()").find(c) != std::string::npos) {
      ++pos;
      return {Tok::Op, std::string(1, c), Rational(0), col};
    }
    fail(std::string("unexpected character '") + c + "'", col);
  }
};

struct Parser {
  Lexer lex;
  Tok cur;
  const std::function<std::optional<Expression>(const std::string&)>& resolve;

  Parser(const std::string& text, int line,
         const std::function<std::optional<Expression>(const std::string&)>& resolve)
      : lex(text, line), resolve(resolve) {
    cur = lex.next();
  }

  void advance() { cur = lex.next(); }
  bool is_op(const char* o) const { return cur.type == Tok::Op && cur.text == o; }
  [[noreturn]] void fail(const std::string& msg) { lex.fail(msg, cur.col); }

  Expression parse() {
    Expression e = expr();
    if (cur.type != Tok::End) fail("trailing input after expression");
    return e;
  }

  Expression expr() {
    Expression acc = term();
    while (is_op("+") || is_op("-")) {
      bool plus = cur.text == "+";
      advance();
      Expression rhs = term();
      acc = plus ? acc + rhs : acc - rhs;
    }
    return acc;
  }

  Expression term() {
    Expression acc = unary();
    while (is_op("*") || is_op("/")) {
      bool mul = cur.text == "*";
      advance();
      Expression rhs = unary();
      acc = mul ? acc * rhs : acc / rhs;
    }
    return acc;
  }

  Expression unary() {
    if (is_op("-")) {
      advance();
      return -unary();
    }
    return powexpr();
  }

  Expression powexpr() {
    Expression base = atom();
    if (is_op("^")) {
      advance();
      Rational e = rational_literal();
      return Expression::power(base, e);
    }
    return base;
  }

  Rational rational_literal() {
    bool neg = false;
    if (is_op("-")) {
      neg = true;
      advance();
    }
    if (cur.type != Tok::Num || !cur.value.is_integer())
      fail("expected integer or rational exponent after '^'");
    long long num = cur.value.num;
    advance();
    long long den = 1;
    if (is_op("/")) {
      advance();
      if (cur.type != Tok::Num || !cur.value.is_integer()) fail("expected denominator after '/'");
      den = cur.value.num;
      advance();
    }
    Rational r(num, den);
    return neg ? -r : r;
  }

  Expression atom() {
    if (cur.type == Tok::Num) {
      Expression e = Expression::constant(cur.value);
      advance();
      return e;
    }
    if (is_op("(")) {
      advance();
      Expression e = expr();
      if (!is_op(")")) fail("expected ')'");
      advance();
      return e;
    }
    if (cur.type == Tok::Ident) {
      std::string name = cur.text;
      int col = cur.col;
      advance();
      if (is_op("(")) {
        FuncKind f;
        bool isSqrt = false;
        if (name == "sqrt")
          isSqrt = true;
        else if (name == "sin")
          f = FuncKind::Sin;
        else if (name == "cos")
          f = FuncKind::Cos;
        else if (name == "exp")
          f = FuncKind::Exp;
        else if (name == "ln")
          f = FuncKind::Ln;
        else
          lex.fail("unknown function '" + name + "'", col);
        advance();
        Expression arg = expr();
        if (!is_op(")")) fail("expected ')'");
        advance();
        return isSqrt ? sqrt(arg) : Expression::func(f, arg);
      }
      auto r = resolve(name);
      if (!r) throw Error(ErrorCode::UnknownSymbol, "unknown symbol '" + name + "'", lex.line, col);
      return *r;
    }
    fail("expected expression");
  }
};
}  // namespace

Expression parse_expression(const std::string& text, int line,
                            const std::function<std::optional<Expression>(const std::string&)>& resolve) {
  Parser p(text, line, resolve);
  return p.parse();
}

// ---------------------------------------------------------------------------
// bulk evaluator

void Evaluator::begin_point() {
  ++epoch_;
  if (epoch_ == 0) {  // stamp wrap: reset
    std::fill(stamp_.begin(), stamp_.end(), 0);
    std::fill(bindStamp_.begin(), bindStamp_.end(), 0);
    epoch_ = 1;
  }
}

void Evaluator::bind(Symbol s, double v) {
  uint32_t id = s.id();
  if (bind_.size() <= id) {
    bind_.resize(id + 1, 0.0);
    bindStamp_.resize(id + 1, 0);
  }
  bind_[id] = v;
  bindStamp_[id] = epoch_;
}

double Evaluator::eval_node(const Node* n) {
  if (val_.size() <= n->uid) {
    val_.resize(n->uid + 1, 0.0);
    stamp_.resize(n->uid + 1, 0);
  }
  if (stamp_[n->uid] == epoch_) return val_[n->uid];
  double v = 0.0;
  switch (n->kind) {
    case NodeKind::Constant:
      v = n->value.to_double();
      break;
    case NodeKind::SymbolRef: {
      if (n->symbol >= bindStamp_.size() || bindStamp_[n->symbol] != epoch_)
        throw Error(ErrorCode::UnboundSymbol,
                    "unbound symbol " + symbol_from_id(n->symbol).name());
      v = bind_[n->symbol];
      break;
    }
    case NodeKind::Sum: {
      CompSum acc;
      for (const auto& k : n->kids) acc.add(eval_node(k.raw()));
      v = acc.get();
      break;
    }
    case NodeKind::Product: {
      v = 1.0;
      for (const auto& k : n->kids) v *= eval_node(k.raw());
      break;
    }
    case NodeKind::Power:
      v = eval_power(eval_node(n->kids[0].raw()), n->value, n->kids[0]);
      break;
    case NodeKind::Func: {
      double u = eval_node(n->kids[0].raw());
      switch (n->func) {
        case FuncKind::Sin: v = std::sin(u); break;
        case FuncKind::Cos: v = std::cos(u); break;
        case FuncKind::Exp: v = std::exp(u); break;
        case FuncKind::Ln:
          if (u <= 0.0)
            throw Error(ErrorCode::DomainError, "ln of non-positive value");
          v = std::log(u);
          break;
      }
      break;
    }
  }
  if (!std::isfinite(v)) throw Error(ErrorCode::DomainError, "non-finite value during evaluation");
  val_[n->uid] = v;
  stamp_[n->uid] = epoch_;
  return v;
}

double Evaluator::eval(const Expression& e) { return eval_node(e.raw()); }

}  // namespace gsf
