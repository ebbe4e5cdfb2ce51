#include "sli/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "sli/error.hpp"

namespace sli {

namespace detail {

enum class Op : std::uint8_t { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Sin, Cos, Bump, Inside };

struct Node {
  Op op;
  double value = 0.0;  // constant value
  int index = 0;       // variable index or integer exponent
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

}  // namespace detail

using detail::Node;
using detail::Op;
using NodePtr = std::shared_ptr<const Node>;

namespace {

NodePtr make_const(double v) { return std::make_shared<Node>(Node{Op::Const, v, 0, nullptr, nullptr}); }

Expression wrap(NodePtr n) { return Expression(std::move(n)); }

Expression make(Op op, const Expression& a, const Expression& b = Expression(), int index = 0) {
  const bool binary = op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div || op == Op::Inside;
  return wrap(std::make_shared<Node>(Node{op, 0.0, index, a.node(), binary ? b.node() : nullptr}));
}

bool is_const(const Expression& e, double v) { return e.is_constant() && e.constant_value() == v; }

double bump_value(double u) {
  if (!(std::abs(u) < 1.0)) return 0.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

double int_pow(double base, int k) {
  if (k < 0) return 1.0 / int_pow(base, -k);
  double result = 1.0;
  while (k > 0) {
    if (k & 1) result *= base;
    base *= base;
    k >>= 1;
  }
  return result;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  if (v < 0) return "(" + s + ")";
  return s;
}

}  // namespace

Expression::Expression() : node_(make_const(0.0)) {}
Expression::Expression(double value) : node_(make_const(value)) {}

Expression Expression::variable(int index) {
  if (index < 0) throw Error(ErrorKind::Index, "negative variable index");
  return Expression(std::make_shared<Node>(Node{Op::Var, 0.0, index, nullptr, nullptr}));
}

bool Expression::is_constant() const { return node_->op == Op::Const; }
bool Expression::is_zero() const { return node_->op == Op::Const && node_->value == 0.0; }
double Expression::constant_value() const {
  if (!is_constant()) throw Error(ErrorKind::Evaluation, "expression is not constant");
  return node_->value;
}

// Smart constructors fold constants and neutral elements.

Expression operator+(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) return a.constant_value() + b.constant_value();
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return make(Op::Add, a, b);
}

Expression operator-(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) return a.constant_value() - b.constant_value();
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  return make(Op::Sub, a, b);
}

Expression operator*(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) return a.constant_value() * b.constant_value();
  if (a.is_zero() || b.is_zero()) return 0.0;
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (is_const(a, -1.0)) return -b;
  if (is_const(b, -1.0)) return -a;
  return make(Op::Mul, a, b);
}

Expression operator/(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
    return a.constant_value() / b.constant_value();
  if (a.is_zero() && !b.is_zero()) return 0.0;
  if (is_const(b, 1.0)) return a;
  return make(Op::Div, a, b);
}

Expression operator-(const Expression& a) {
  if (a.is_constant()) return -a.constant_value();
  if (a.node()->op == Op::Neg) return wrap(a.node()->a);
  return make(Op::Neg, a);
}

Expression pow(const Expression& base, int exponent) {
  if (exponent == 0) return 1.0;
  if (exponent == 1) return base;
  if (base.is_constant() && (base.constant_value() != 0.0 || exponent > 0))
    return int_pow(base.constant_value(), exponent);
  return make(Op::Pow, base, Expression(), exponent);
}

Expression exp(const Expression& a) {
  if (a.is_constant()) return std::exp(a.constant_value());
  return make(Op::Exp, a);
}

Expression sin(const Expression& a) {
  if (a.is_constant()) return std::sin(a.constant_value());
  return make(Op::Sin, a);
}

Expression cos(const Expression& a) {
  if (a.is_constant()) return std::cos(a.constant_value());
  return make(Op::Cos, a);
}

Expression bump(const Expression& a) {
  if (a.is_constant()) return bump_value(a.constant_value());
  return make(Op::Bump, a);
}

Expression inside(const Expression& guard, const Expression& body) {
  if (body.is_zero()) return 0.0;
  if (guard.is_constant()) return std::abs(guard.constant_value()) < 1.0 ? body : Expression(0.0);
  return make(Op::Inside, guard, body);
}

Expression& operator+=(Expression& a, const Expression& b) { return a = a + b; }
Expression& operator-=(Expression& a, const Expression& b) { return a = a - b; }
Expression& operator*=(Expression& a, const Expression& b) { return a = a * b; }

namespace {

double eval_node(const Node& n, std::span<const double> x) {
  switch (n.op) {
    case Op::Const:
      return n.value;
    case Op::Var:
      if (static_cast<std::size_t>(n.index) >= x.size())
        throw Error(ErrorKind::Index, "variable x" + std::to_string(n.index + 1) + " outside point dimension");
      return x[n.index];
    case Op::Add:
      return eval_node(*n.a, x) + eval_node(*n.b, x);
    case Op::Sub:
      return eval_node(*n.a, x) - eval_node(*n.b, x);
    case Op::Mul:
      return eval_node(*n.a, x) * eval_node(*n.b, x);
    case Op::Div: {
      const double num = eval_node(*n.a, x);
      const double den = eval_node(*n.b, x);
      if (den == 0.0) throw Error(ErrorKind::Evaluation, "division by zero");
      return num / den;
    }
    case Op::Pow: {
      const double base = eval_node(*n.a, x);
      if (base == 0.0 && n.index < 0) throw Error(ErrorKind::Evaluation, "division by zero in negative power");
      return int_pow(base, n.index);
    }
    case Op::Neg:
      return -eval_node(*n.a, x);
    case Op::Exp:
      return std::exp(eval_node(*n.a, x));
    case Op::Sin:
      return std::sin(eval_node(*n.a, x));
    case Op::Cos:
      return std::cos(eval_node(*n.a, x));
    case Op::Bump:
      return bump_value(eval_node(*n.a, x));
    case Op::Inside: {
      const double u = eval_node(*n.a, x);
      if (!(std::abs(u) < 1.0)) return 0.0;
      return eval_node(*n.b, x);
    }
  }
  return 0.0;
}

}  // namespace

double Expression::eval(std::span<const double> point) const {
  const double v = eval_node(*node_, point);
  if (!std::isfinite(v)) throw Error(ErrorKind::Evaluation, "non-finite value");
  return v;
}

Expression Expression::diff(int index) const {
  if (index < 0) throw Error(ErrorKind::Index, "negative coordinate index");
  std::unordered_map<const Node*, Expression> memo;
  auto rec = [&](auto&& self, const NodePtr& p) -> Expression {
    if (auto it = memo.find(p.get()); it != memo.end()) return it->second;
    const Node& n = *p;
    Expression a = n.a ? wrap(n.a) : Expression();
    Expression b = n.b ? wrap(n.b) : Expression();
    Expression d;
    switch (n.op) {
      case Op::Const:
        d = 0.0;
        break;
      case Op::Var:
        d = n.index == index ? 1.0 : 0.0;
        break;
      case Op::Add:
        d = self(self, n.a) + self(self, n.b);
        break;
      case Op::Sub:
        d = self(self, n.a) - self(self, n.b);
        break;
      case Op::Mul:
        d = self(self, n.a) * b + a * self(self, n.b);
        break;
      case Op::Div: {
        const Expression da = self(self, n.a);
        const Expression db = self(self, n.b);
        d = da / b - a * db / pow(b, 2);
        break;
      }
      case Op::Pow:
        d = Expression(static_cast<double>(n.index)) * pow(a, n.index - 1) * self(self, n.a);
        break;
      case Op::Neg:
        d = -self(self, n.a);
        break;
      case Op::Exp:
        d = wrap(p) * self(self, n.a);
        break;
      case Op::Sin:
        d = cos(a) * self(self, n.a);
        break;
      case Op::Cos:
        d = -sin(a) * self(self, n.a);
        break;
      case Op::Bump: {
        // bump'(u) = bump(u) * (-2u) / (1-u^2)^2, flat outside (-1,1).
        const Expression da = self(self, n.a);
        if (da.is_zero()) {
          d = 0.0;
        } else {
          const Expression factor = Expression(-2.0) * a / pow(Expression(1.0) - pow(a, 2), 2);
          d = inside(a, wrap(p) * factor) * da;
        }
        break;
      }
      case Op::Inside:
        d = inside(a, self(self, n.b));
        break;
    }
    memo.emplace(p.get(), d);
    return d;
  };
  return rec(rec, node_);
}

int Expression::arity() const {
  int arity = 0;
  std::unordered_map<const Node*, bool> seen;
  auto rec = [&](auto&& self, const Node* n) -> void {
    if (!n || seen.count(n)) return;
    seen[n] = true;
    if (n->op == Op::Var) arity = std::max(arity, n->index + 1);
    self(self, n->a.get());
    self(self, n->b.get());
  };
  rec(rec, node_.get());
  return arity;
}

std::size_t Expression::node_count() const {
  std::unordered_map<const Node*, bool> seen;
  auto rec = [&](auto&& self, const Node* n) -> void {
    if (!n || seen.count(n)) return;
    seen[n] = true;
    self(self, n->a.get());
    self(self, n->b.get());
  };
  rec(rec, node_.get());
  return seen.size();
}

namespace {

void print_node(const Node& n, std::span<const std::string> names, std::ostringstream& os) {
  switch (n.op) {
    case Op::Const:
      os << format_number(n.value);
      return;
    case Op::Var:
      if (static_cast<std::size_t>(n.index) < names.size())
        os << names[n.index];
      else
        os << 'x' << (n.index + 1);
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const char sym = n.op == Op::Add ? '+' : n.op == Op::Sub ? '-' : n.op == Op::Mul ? '*' : '/';
      os << '(';
      print_node(*n.a, names, os);
      os << ' ' << sym << ' ';
      print_node(*n.b, names, os);
      os << ')';
      return;
    }
    case Op::Pow:
      os << '(';
      print_node(*n.a, names, os);
      os << ")^";
      if (n.index < 0)
        os << "(" << n.index << ")";
      else
        os << n.index;
      return;
    case Op::Neg:
      os << "(-";
      print_node(*n.a, names, os);
      os << ')';
      return;
    case Op::Exp:
    case Op::Sin:
    case Op::Cos:
    case Op::Bump:
      os << (n.op == Op::Exp ? "exp(" : n.op == Op::Sin ? "sin(" : n.op == Op::Cos ? "cos(" : "bump(");
      print_node(*n.a, names, os);
      os << ')';
      return;
    case Op::Inside:
      os << "inside(";
      print_node(*n.a, names, os);
      os << ", ";
      print_node(*n.b, names, os);
      os << ')';
      return;
  }
}

}  // namespace

std::string Expression::str() const { return str({}); }

std::string Expression::str(std::span<const std::string> names) const {
  std::ostringstream os;
  print_node(*node_, names, os);
  return os.str();
}

Expression substitute(const Expression& e, std::span<const Expression> replacements) {
  std::unordered_map<const Node*, Expression> memo;
  auto rec = [&](auto&& self, const NodePtr& p) -> Expression {
    if (auto it = memo.find(p.get()); it != memo.end()) return it->second;
    const Node& n = *p;
    Expression r;
    switch (n.op) {
      case Op::Const:
        r = wrap(p);
        break;
      case Op::Var:
        if (static_cast<std::size_t>(n.index) >= replacements.size())
          throw Error(ErrorKind::Index, "no replacement for x" + std::to_string(n.index + 1));
        r = replacements[n.index];
        break;
      case Op::Add:
        r = self(self, n.a) + self(self, n.b);
        break;
      case Op::Sub:
        r = self(self, n.a) - self(self, n.b);
        break;
      case Op::Mul:
        r = self(self, n.a) * self(self, n.b);
        break;
      case Op::Div:
        r = self(self, n.a) / self(self, n.b);
        break;
      case Op::Pow:
        r = pow(self(self, n.a), n.index);
        break;
      case Op::Neg:
        r = -self(self, n.a);
        break;
      case Op::Exp:
        r = exp(self(self, n.a));
        break;
      case Op::Sin:
        r = sin(self(self, n.a));
        break;
      case Op::Cos:
        r = cos(self(self, n.a));
        break;
      case Op::Bump:
        r = bump(self(self, n.a));
        break;
      case Op::Inside:
        r = inside(self(self, n.a), self(self, n.b));
        break;
    }
    memo.emplace(p.get(), r);
    return r;
  };
  return rec(rec, e.node());
}

// ---------------------------------------------------------------------------
// Variables and parser

VariableSet VariableSet::coordinates(int n) {
  std::map<std::string, int> names;
  for (int i = 0; i < n; ++i) names["x" + std::to_string(i + 1)] = i;
  if (n <= 3) {
    const char* aliases[] = {"x", "y", "z"};
    for (int i = 0; i < n; ++i) names[aliases[i]] = i;
  }
  return VariableSet(std::move(names), n);
}

VariableSet VariableSet::time() { return VariableSet({{"t", 0}}, 1); }

std::vector<std::string> VariableSet::print_names() const {
  std::vector<std::string> out(arity_);
  for (int i = 0; i < arity_; ++i) out[i] = "x" + std::to_string(i + 1);
  if (names_.count("t") && arity_ == 1 && !names_.count("x1")) out[0] = "t";
  return out;
}

namespace {

class Parser {
 public:
  Parser(std::string_view src, const VariableSet& vars) : src_(src), vars_(vars) {}

  Expression run() {
    Expression e = expression();
    skip_space();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expression expression() {
    Expression lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = lhs + term();
      else if (accept('-'))
        lhs = lhs - term();
      else
        return lhs;
    }
  }

  Expression term() {
    Expression lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = lhs * unary();
      else if (accept('/'))
        lhs = lhs / unary();
      else
        return lhs;
    }
  }

  Expression unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expression power() {
    Expression base = primary();
    while (accept('^')) base = pow(base, exponent());
    return base;
  }

  int exponent() {
    skip_space();
    const bool paren = accept('(');
    skip_space();
    const std::size_t start = pos_;
    int sign = 1;
    if (accept('-'))
      sign = -1;
    else
      accept('+');
    skip_space();
    const std::size_t digits = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ == digits) {
      pos_ = start;
      fail("non-integer exponent");
    }
    if (pos_ < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E')) {
      pos_ = start;
      fail("non-integer exponent");
    }
    int value = 0;
    std::from_chars(src_.data() + digits, src_.data() + pos_, value);
    if (paren) expect(')');
    return sign * value;
  }

  Expression primary() {
    skip_space();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = expression();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expression number() {
    const std::size_t start = pos_;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), value);
    if (ec != std::errc()) fail("malformed number");
    pos_ = static_cast<std::size_t>(ptr - src_.data());
    if (pos_ == start) fail("malformed number");
    return value;
  }

  Expression identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == '(') {
      ++pos_;
      std::vector<Expression> args;
      args.push_back(expression());
      while (accept(',')) args.push_back(expression());
      expect(')');
      auto arity = [&](std::size_t k) {
        if (args.size() != k) {
          pos_ = start;
          fail(name + " expects " + std::to_string(k) + " argument(s)");
        }
      };
      if (name == "exp") return arity(1), exp(args[0]);
      if (name == "sin") return arity(1), sin(args[0]);
      if (name == "cos") return arity(1), cos(args[0]);
      if (name == "bump") return arity(1), bump(args[0]);
      if (name == "inside") return arity(2), inside(args[0], args[1]);
      pos_ = start;
      fail("unknown function '" + name + "'");
    }
    if (name == "pi") return std::numbers::pi;
    if (auto it = vars_.names().find(name); it != vars_.names().end()) return Expression::variable(it->second);
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  std::string_view src_;
  const VariableSet& vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse(std::string_view source, const VariableSet& variables) { return Parser(source, variables).run(); }

Expression parse(std::string_view source, int n) { return parse(source, VariableSet::coordinates(n)); }

// ---------------------------------------------------------------------------
// Program

namespace {

struct InstrKey {
  std::uint8_t op;
  std::int32_t a;
  std::int32_t b;
  std::uint64_t bits;
  bool operator==(const InstrKey&) const = default;
};

struct InstrKeyHash {
  std::size_t operator()(const InstrKey& k) const {
    std::size_t h = k.op;
    h = h * 1000003u ^ static_cast<std::size_t>(k.a);
    h = h * 1000003u ^ static_cast<std::size_t>(k.b);
    h = h * 1000003u ^ static_cast<std::size_t>(k.bits);
    return h;
  }
};

}  // namespace

Program::Program(std::span<const Expression> outputs) {
  std::unordered_map<const Node*, std::int32_t> slot_of;
  std::unordered_map<InstrKey, std::int32_t, InstrKeyHash> dedupe;
  auto emit = [&](Op op, std::int32_t a, std::int32_t b, double value) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof bits);
    // Commutative operands are ordered so that a+b and b+a share a slot.
    if ((op == Op::Add || op == Op::Mul) && a > b) std::swap(a, b);
    const InstrKey key{static_cast<std::uint8_t>(op), a, b, bits};
    if (auto it = dedupe.find(key); it != dedupe.end()) return it->second;
    const auto slot = static_cast<std::int32_t>(code_.size());
    code_.push_back(Instr{static_cast<std::uint8_t>(op), a, b, value});
    dedupe.emplace(key, slot);
    return slot;
  };
  auto rec = [&](auto&& self, const Node* n) -> std::int32_t {
    if (auto it = slot_of.find(n); it != slot_of.end()) return it->second;
    std::int32_t slot = 0;
    switch (n->op) {
      case Op::Const:
        slot = emit(Op::Const, 0, 0, n->value);
        break;
      case Op::Var:
        arity_ = std::max(arity_, n->index + 1);
        slot = emit(Op::Var, n->index, 0, 0.0);
        break;
      case Op::Pow:
        slot = emit(Op::Pow, self(self, n->a.get()), 0, static_cast<double>(n->index));
        break;
      case Op::Neg:
      case Op::Exp:
      case Op::Sin:
      case Op::Cos:
      case Op::Bump:
        slot = emit(n->op, self(self, n->a.get()), 0, 0.0);
        break;
      default: {
        const std::int32_t a = self(self, n->a.get());
        const std::int32_t b = self(self, n->b.get());
        slot = emit(n->op, a, b, 0.0);
      }
    }
    slot_of.emplace(n, slot);
    return slot;
  };
  outputs_.reserve(outputs.size());
  for (const auto& e : outputs) outputs_.push_back(rec(rec, e.node().get()));
}

void Program::eval(std::span<const double> x, std::span<double> out, std::vector<double>& work) const {
  if (static_cast<int>(x.size()) < arity_) throw Error(ErrorKind::Index, "point dimension below program arity");
  work.resize(code_.size());
  double* s = work.data();
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    switch (static_cast<Op>(in.op)) {
      case Op::Const:
        s[i] = in.value;
        break;
      case Op::Var:
        s[i] = x[in.a];
        break;
      case Op::Add:
        s[i] = s[in.a] + s[in.b];
        break;
      case Op::Sub:
        s[i] = s[in.a] - s[in.b];
        break;
      case Op::Mul:
        s[i] = s[in.a] * s[in.b];
        break;
      case Op::Div:
        s[i] = s[in.a] / s[in.b];
        break;
      case Op::Pow:
        s[i] = int_pow(s[in.a], static_cast<int>(in.value));
        break;
      case Op::Neg:
        s[i] = -s[in.a];
        break;
      case Op::Exp:
        s[i] = std::exp(s[in.a]);
        break;
      case Op::Sin:
        s[i] = std::sin(s[in.a]);
        break;
      case Op::Cos:
        s[i] = std::cos(s[in.a]);
        break;
      case Op::Bump:
        s[i] = bump_value(s[in.a]);
        break;
      case Op::Inside:
        s[i] = std::abs(s[in.a]) < 1.0 ? s[in.b] : 0.0;
        break;
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) {
    const double v = s[outputs_[k]];
    if (!std::isfinite(v)) throw Error(ErrorKind::Evaluation, "non-finite value in output " + std::to_string(k));
    out[k] = v;
  }
}

std::vector<double> Program::operator()(std::span<const double> point) const {
  std::vector<double> out(outputs_.size());
  std::vector<double> work;
  eval(point, out, work);
  return out;
}

}  // namespace sli
