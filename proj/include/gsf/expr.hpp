#ifndef GSF_EXPR_HPP
#define GSF_EXPR_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsf {

// ---------------------------------------------------------------------------
// Errors

enum class ErrorCode {
  UnsupportedNode,
  OrderOverflow,
  UnboundSymbol,
  DomainError,
  RationalOverflow,
  Parse,
  MissingSection,
  ArityMismatch,
  UnknownSymbol,
  DuplicateName,
  StructureSymmetry,
  DomainTooSmall,
  GeneratorRank,
  SingularRebase,
  Usage,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, int line = -1, int col = -1)
      : std::runtime_error(std::move(message)), code(code), line(line), col(col) {}
  ErrorCode code;
  int line;
  int col;
};

// ---------------------------------------------------------------------------
// Exact rationals. Numerator carries the sign, denominator is positive,
// gcd-reduced. Arithmetic goes through 128-bit intermediates and throws
// RationalOverflow instead of wrapping.

struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n) : num(n), den(1) {}
  Rational(long long n, long long d);

  static Rational normalized(__int128 n, __int128 d);

  bool is_zero() const { return num == 0; }
  bool is_one() const { return num == 1 && den == 1; }
  bool is_integer() const { return den == 1; }
  bool is_negative() const { return num < 0; }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  Rational operator-() const { return Rational(-num, den); }
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator!=(const Rational& o) const { return !(*this == o); }

  // Exact q^k for integer k; throws on overflow, 0^negative.
  Rational ipow(long long k) const;
  std::string str() const;
};

// ---------------------------------------------------------------------------
// Symbols. Registered once in a process-wide table; an Expression stores only
// the 32-bit id, so symbol identity is cheap and exact.

enum class SymbolKind { Coordinate, Velocity, Acceleration, Momentum, Parameter };

class Symbol {
 public:
  Symbol() : id_(0) {}
  static Symbol make(const std::string& name, SymbolKind kind, int index = -1);

  uint32_t id() const { return id_; }
  const std::string& name() const;
  SymbolKind kind() const;
  int index() const;  // position within its coordinate family, -1 otherwise

  bool operator==(const Symbol& o) const { return id_ == o.id_; }
  bool operator!=(const Symbol& o) const { return id_ != o.id_; }
  bool operator<(const Symbol& o) const { return id_ < o.id_; }

 private:
  explicit Symbol(uint32_t id) : id_(id) {}
  uint32_t id_;
  friend class Expression;
  friend Symbol symbol_from_id(uint32_t);
};

Symbol symbol_from_id(uint32_t id);

// ---------------------------------------------------------------------------
// Expressions. Immutable DAG nodes, hash-consed: structurally equal trees are
// the same node, so pointer equality is structural equality. Construction
// normalizes: constants fold, sums collect like terms, products collect
// powers of a common base and absorb zeros.

enum class NodeKind { Constant, SymbolRef, Sum, Product, Power, Func };
enum class FuncKind { Sin, Cos, Exp, Ln };

struct Node;

class Expression {
 public:
  Expression();  // zero

  static Expression constant(const Rational& r);
  static Expression constant(long long n) { return constant(Rational(n)); }
  static Expression symbol(Symbol s);
  static Expression sum(std::vector<Expression> terms);
  static Expression product(std::vector<Expression> factors);
  static Expression power(const Expression& base, const Rational& exp);
  static Expression func(FuncKind f, const Expression& arg);
  static Expression zero();
  static Expression one();

  NodeKind kind() const;
  uint32_t uid() const;
  const Rational& value() const;       // Constant payload or Power exponent
  Symbol sym() const;                  // SymbolRef payload
  FuncKind func_kind() const;          // Func payload
  const std::vector<Expression>& kids() const;

  bool is_zero() const;
  bool is_one() const;
  bool same(const Expression& o) const { return node_.get() == o.node_.get(); }

  const Node* raw() const { return node_.get(); }

 private:
  explicit Expression(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

inline Expression operator+(const Expression& a, const Expression& b) {
  return Expression::sum({a, b});
}
inline Expression operator-(const Expression& a, const Expression& b) {
  return Expression::sum({a, Expression::product({Expression::constant(-1), b})});
}
inline Expression operator*(const Expression& a, const Expression& b) {
  return Expression::product({a, b});
}
inline Expression operator/(const Expression& a, const Expression& b) {
  return Expression::product({a, Expression::power(b, Rational(-1))});
}
inline Expression operator-(const Expression& a) {
  return Expression::product({Expression::constant(-1), a});
}

Expression pow(const Expression& base, const Rational& exp);
Expression sqrt(const Expression& e);
Expression sin(const Expression& e);
Expression cos(const Expression& e);
Expression exp(const Expression& e);
Expression ln(const Expression& e);

// ---------------------------------------------------------------------------
// Bindings map symbols to finite doubles. Every free symbol of an evaluated
// expression must be bound; there is no default value.

class Bindings {
 public:
  void set(Symbol s, double v);
  std::optional<double> get(Symbol s) const;
  void clear();

 private:
  std::vector<double> vals_;
  std::vector<uint8_t> isset_;
};

// Core operations ------------------------------------------------------------

Expression differentiate(const Expression& e, Symbol s);
Expression substitute(const Expression& e, const std::map<Symbol, Expression>& assignments);
double evaluate(const Expression& e, const Bindings& b);
Expression simplify(const Expression& e);

// Velocity/acceleration families for the total time derivative.
struct JetFamilies {
  std::vector<Symbol> coords;
  std::vector<Symbol> velocities;
  std::vector<Symbol> accelerations;
};

// d/dt along a trajectory: q -> v, v -> a. Throws OrderOverflow if e already
// mentions an acceleration symbol.
Expression total_time_derivative(const Expression& e, const JetFamilies& fam);

void collect_symbols(const Expression& e, std::vector<Symbol>& out);
bool mentions(const Expression& e, Symbol s);
bool mentions_kind(const Expression& e, SymbolKind k);

std::string to_string(const Expression& e);

// Recursive-descent parser for the expression grammar:
//   expr := term (('+'|'-') term)*
//   term := unary (('*'|'/') unary)*
//   unary := '-' unary | pow
//   pow := atom ('^' rational)?
//   atom := number | ident | '(' expr ')' | fn '(' expr ')'
// fn in {sqrt, sin, cos, exp, ln}. Rational literals like 3/2 are allowed as
// exponents; number literals may be integers or decimals (parsed exactly).
// `resolve` maps identifiers to expressions; returning nullopt rejects the
// identifier. Errors carry 1-based line/column, with `line` as given.
Expression parse_expression(const std::string& text, int line,
                            const std::function<std::optional<Expression>(const std::string&)>& resolve);

// ---------------------------------------------------------------------------
// Bulk evaluator: memoizes node values per point so shared subtrees across a
// tensor family are evaluated once. begin_point() invalidates the caches.

class Evaluator {
 public:
  void begin_point();
  void bind(Symbol s, double v);
  double eval(const Expression& e);

 private:
  double eval_node(const Node* n);
  std::vector<double> val_;
  std::vector<uint32_t> stamp_;
  std::vector<double> bind_;
  std::vector<uint32_t> bindStamp_;
  uint32_t epoch_ = 0;
};

}  // namespace gsf

#endif
