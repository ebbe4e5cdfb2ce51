#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sli {

namespace detail {
struct Node;
}

/// Immutable symbolic scalar function of coordinates x1..xn.
///
/// Nodes are shared between expressions, so copying is cheap and concurrent
/// evaluation is safe. Arithmetic folds constants (0*e, 1*e, e+0, ...) but no
/// further simplification is attempted.
class Expression {
 public:
  Expression();
  Expression(double value);  // NOLINT(google-explicit-constructor)

  static Expression variable(int index);

  /// Reference tree-walking evaluation. Throws Error(Evaluation) on a zero
  /// denominator or a non-finite result.
  double eval(std::span<const double> point) const;
  double operator()(std::span<const double> point) const { return eval(point); }

  /// Exact partial derivative with respect to coordinate `index` (0-based).
  Expression diff(int index) const;

  bool is_constant() const;
  bool is_zero() const;
  double constant_value() const;

  /// One past the highest coordinate index referenced, 0 for constants.
  int arity() const;
  std::size_t node_count() const;

  /// Fully parenthesised infix text; parse(str()) evaluates identically.
  std::string str() const;
  std::string str(std::span<const std::string> names) const;

  const std::shared_ptr<const detail::Node>& node() const { return node_; }

  explicit Expression(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<const detail::Node> node_;
};

Expression& operator+=(Expression& a, const Expression& b);
Expression& operator-=(Expression& a, const Expression& b);
Expression& operator*=(Expression& a, const Expression& b);

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);
Expression pow(const Expression& base, int exponent);
Expression exp(const Expression& a);
Expression sin(const Expression& a);
Expression cos(const Expression& a);
/// bump(u) = exp(-1/(1-u^2)) for |u| < 1, exactly 0 otherwise.
Expression bump(const Expression& a);
/// inside(u, e) = e for |u| < 1, exactly 0 otherwise; `e` is not evaluated
/// outside. Used for flat extensions by zero such as exp(-l/(1-x^2)).
Expression inside(const Expression& guard, const Expression& body);

/// Replace variable i by replacements[i].
Expression substitute(const Expression& e, std::span<const Expression> replacements);

/// Names accepted by the parser, mapped to coordinate indices.
class VariableSet {
 public:
  VariableSet() = default;
  explicit VariableSet(std::map<std::string, int> names, int arity)
      : names_(std::move(names)), arity_(arity) {}

  /// x1..xn, plus the aliases x, y, z when n <= 3.
  static VariableSet coordinates(int n);
  /// The single variable t.
  static VariableSet time();

  const std::map<std::string, int>& names() const { return names_; }
  int arity() const { return arity_; }
  /// Canonical printing names (x1..xn, or t).
  std::vector<std::string> print_names() const;

 private:
  std::map<std::string, int> names_;
  int arity_ = 0;
};

/// Grammar: infix + - * / with standard precedence (all left associative),
/// integer powers `e^k` / `e^(-k)`, unary minus, numbers, `pi`, variables and
/// calls exp, sin, cos, bump (one argument) and inside (two arguments).
Expression parse(std::string_view source, const VariableSet& variables);
Expression parse(std::string_view source, int n);

/// A batch of expressions flattened into a common-subexpression-free
/// instruction tape for fast repeated evaluation.
class Program {
 public:
  Program() = default;
  explicit Program(std::span<const Expression> outputs);

  std::size_t size() const { return outputs_.size(); }
  std::size_t instruction_count() const { return code_.size(); }
  int arity() const { return arity_; }

  /// Evaluates all outputs; `work` is scratch storage owned by the caller so
  /// that one Program can be shared between threads. Throws Error(Evaluation)
  /// if any output is not finite.
  void eval(std::span<const double> point, std::span<double> out, std::vector<double>& work) const;
  std::vector<double> operator()(std::span<const double> point) const;

 private:
  struct Instr {
    std::uint8_t op;
    std::int32_t a;
    std::int32_t b;
    double value;
  };
  std::vector<Instr> code_;
  std::vector<std::int32_t> outputs_;
  int arity_ = 0;
};

}  // namespace sli
