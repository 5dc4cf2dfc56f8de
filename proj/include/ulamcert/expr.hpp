#pragma once

// Coefficient-expression DSL: parsing, evaluation, printing and symbolic
// differentiation of scalar functions of the variables x, y, z, u.
//
// Grammar (whitespace insignificant, ASCII only):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | variable | function '(' expr (',' expr)* ')' | '(' expr ')'

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "ulamcert/error.hpp"

namespace ulamcert::expr {

enum class Function { sqrt, exp, log, sin, cos, tan, tanh, abs, pow };
enum class BinaryOp { add, sub, mul, div, pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  struct Constant {
    double value;
  };
  struct Variable {
    std::size_t index;
  };
  struct Negate {
    NodePtr operand;
  };
  struct Binary {
    BinaryOp op;
    NodePtr lhs;
    NodePtr rhs;
  };
  struct Call {
    Function fn;
    std::vector<NodePtr> args;
  };

  std::variant<Constant, Variable, Negate, Binary, Call> data;
};

using EvalPoint = std::map<std::string, double, std::less<>>;

inline constexpr std::array<std::string_view, 4> kPermittedVariables = {"x", "y", "z", "u"};

namespace detail {

struct FunctionInfo {
  std::string_view name;
  Function fn;
  std::size_t arity;
};

inline constexpr std::array<FunctionInfo, 9> kFunctions = {{
    {"sqrt", Function::sqrt, 1},
    {"exp", Function::exp, 1},
    {"log", Function::log, 1},
    {"sin", Function::sin, 1},
    {"cos", Function::cos, 1},
    {"tan", Function::tan, 1},
    {"tanh", Function::tanh, 1},
    {"abs", Function::abs, 1},
    {"pow", Function::pow, 2},
}};

[[nodiscard]] inline std::string_view function_name(Function fn) {
  for (const auto& info : kFunctions) {
    if (info.fn == fn) return info.name;
  }
  return "?";
}

[[nodiscard]] inline bool is_integer(double v) {
  return std::isfinite(v) && std::nearbyint(v) == v && std::abs(v) < 9007199254740992.0;
}

}  // namespace detail

/// Real power with the DSL's rule: integer exponents are sign-preserving
/// integer powers, non-integer exponents require a positive base and are
/// computed as exp(n*log(base)). Returns false on a domain violation.
[[nodiscard]] inline bool real_power(double base, double exponent, double& out) {
  if (detail::is_integer(exponent)) {
    if (base == 0.0 && exponent < 0.0) return false;
    out = std::pow(base, exponent);
    return true;
  }
  if (!(base > 0.0)) return false;
  out = std::exp(exponent * std::log(base));
  return true;
}

// ---------------------------------------------------------------------------
// Node construction. The make_* builders fold constants; they never rewrite
// non-constant structure except for the identities 0+a, a*1, a^1, --a and
// multiplication by a literal zero.

[[nodiscard]] inline NodePtr make_constant(double v) {
  return std::make_shared<const Node>(Node{Node::Constant{v}});
}
[[nodiscard]] inline NodePtr make_variable(std::size_t index) {
  return std::make_shared<const Node>(Node{Node::Variable{index}});
}

namespace detail {

[[nodiscard]] inline const double* constant_value(const NodePtr& n) {
  if (const auto* c = std::get_if<Node::Constant>(&n->data)) return &c->value;
  return nullptr;
}

[[nodiscard]] inline bool is_constant_equal(const NodePtr& n, double v) {
  const double* c = constant_value(n);
  return c != nullptr && *c == v;
}

}  // namespace detail

[[nodiscard]] inline NodePtr make_negate(NodePtr operand, bool fold = true) {
  if (fold) {
    if (const double* c = detail::constant_value(operand)) return make_constant(-*c);
    if (const auto* n = std::get_if<Node::Negate>(&operand->data)) return n->operand;
  }
  return std::make_shared<const Node>(Node{Node::Negate{std::move(operand)}});
}

[[nodiscard]] inline NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs, bool fold = true) {
  if (fold) {
    const double* lc = detail::constant_value(lhs);
    const double* rc = detail::constant_value(rhs);
    if (lc && rc) {
      double v = 0.0;
      bool ok = true;
      switch (op) {
        case BinaryOp::add: v = *lc + *rc; break;
        case BinaryOp::sub: v = *lc - *rc; break;
        case BinaryOp::mul: v = *lc * *rc; break;
        case BinaryOp::div:
          ok = *rc != 0.0;
          if (ok) v = *lc / *rc;
          break;
        case BinaryOp::pow: ok = real_power(*lc, *rc, v); break;
      }
      if (ok && std::isfinite(v)) return make_constant(v);
    }
    switch (op) {
      case BinaryOp::add:
        if (detail::is_constant_equal(lhs, 0.0)) return rhs;
        if (detail::is_constant_equal(rhs, 0.0)) return lhs;
        break;
      case BinaryOp::sub:
        if (detail::is_constant_equal(rhs, 0.0)) return lhs;
        if (detail::is_constant_equal(lhs, 0.0)) return make_negate(std::move(rhs));
        break;
      case BinaryOp::mul:
        if (detail::is_constant_equal(lhs, 0.0) || detail::is_constant_equal(rhs, 0.0)) {
          return make_constant(0.0);
        }
        if (detail::is_constant_equal(lhs, 1.0)) return rhs;
        if (detail::is_constant_equal(rhs, 1.0)) return lhs;
        break;
      case BinaryOp::div:
        if (detail::is_constant_equal(rhs, 1.0)) return lhs;
        if (detail::is_constant_equal(lhs, 0.0) && !detail::is_constant_equal(rhs, 0.0)) {
          return make_constant(0.0);
        }
        break;
      case BinaryOp::pow:
        if (detail::is_constant_equal(rhs, 1.0)) return lhs;
        if (detail::is_constant_equal(rhs, 0.0)) return make_constant(1.0);
        break;
    }
  }
  return std::make_shared<const Node>(Node{Node::Binary{op, std::move(lhs), std::move(rhs)}});
}

[[nodiscard]] inline NodePtr make_call(Function fn, std::vector<NodePtr> args) {
  return std::make_shared<const Node>(Node{Node::Call{fn, std::move(args)}});
}
[[nodiscard]] inline NodePtr make_call(Function fn, NodePtr arg) {
  std::vector<NodePtr> args;
  args.push_back(std::move(arg));
  return make_call(fn, std::move(args));
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

// Precedence levels: 1 additive, 2 multiplicative, 3 unary minus, 4 power,
// 5 atom. Negative literals print like a unary minus.
[[nodiscard]] inline int precedence(const Node& n) {
  return std::visit(
      [](const auto& d) -> int {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Node::Constant>) {
          return (d.value < 0.0 || std::signbit(d.value)) ? 3 : 5;
        } else if constexpr (std::is_same_v<T, Node::Variable>) {
          return 5;
        } else if constexpr (std::is_same_v<T, Node::Negate>) {
          return 3;
        } else if constexpr (std::is_same_v<T, Node::Binary>) {
          switch (d.op) {
            case BinaryOp::add:
            case BinaryOp::sub: return 1;
            case BinaryOp::mul:
            case BinaryOp::div: return 2;
            case BinaryOp::pow: return 4;
          }
          return 0;
        } else {
          return 5;
        }
      },
      n.data);
}

inline void print_node(const Node& n, std::span<const std::string> vars, std::string& out);

inline void print_child(const Node& child, int min_prec, std::span<const std::string> vars,
                        std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print_node(child, vars, out);
    out += ')';
  } else {
    print_node(child, vars, out);
  }
}

inline void print_node(const Node& n, std::span<const std::string> vars, std::string& out) {
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Node::Constant>) {
          out += format_number(d.value);
        } else if constexpr (std::is_same_v<T, Node::Variable>) {
          out += d.index < vars.size() ? vars[d.index] : std::string("?");
        } else if constexpr (std::is_same_v<T, Node::Negate>) {
          out += '-';
          print_child(*d.operand, 3, vars, out);
        } else if constexpr (std::is_same_v<T, Node::Binary>) {
          const int p = precedence(n);
          if (d.op == BinaryOp::pow) {
            print_child(*d.lhs, 5, vars, out);
            out += '^';
            print_child(*d.rhs, 3, vars, out);
            return;
          }
          print_child(*d.lhs, p, vars, out);
          switch (d.op) {
            case BinaryOp::add: out += '+'; break;
            case BinaryOp::sub: out += '-'; break;
            case BinaryOp::mul: out += '*'; break;
            case BinaryOp::div: out += '/'; break;
            case BinaryOp::pow: break;
          }
          // Right operands always need strictly higher precedence so that the
          // printed text re-parses to the same evaluation order.
          print_child(*d.rhs, p + 1, vars, out);
        } else {
          out += function_name(d.fn);
          out += '(';
          for (std::size_t i = 0; i < d.args.size(); ++i) {
            if (i > 0) out += ',';
            print_node(*d.args[i], vars, out);
          }
          out += ')';
        }
      },
      n.data);
}

}  // namespace detail

[[nodiscard]] inline std::string print(const Node& n, std::span<const std::string> vars) {
  std::string out;
  detail::print_node(n, vars, out);
  return out;
}

// ---------------------------------------------------------------------------
// Compiled form: a postfix program evaluated on a small stack.

namespace detail {

enum class OpCode : std::uint8_t {
  push_const,
  push_var,
  neg,
  add,
  sub,
  mul,
  div,
  pow,
  sqrt,
  exp,
  log,
  sin,
  cos,
  tan,
  tanh,
  abs,
};

struct Instruction {
  OpCode op;
  std::size_t index = 0;
  double value = 0.0;
  const Node* origin = nullptr;
};

struct Program {
  std::vector<Instruction> code;
  std::size_t max_depth = 0;
};

inline void compile_node(const Node& n, Program& prog, std::size_t& depth) {
  auto emit = [&](OpCode op, std::size_t pops, std::size_t pushes) {
    prog.code.push_back(Instruction{op, 0, 0.0, &n});
    depth = depth - pops + pushes;
    prog.max_depth = std::max(prog.max_depth, depth);
  };
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Node::Constant>) {
          prog.code.push_back(Instruction{OpCode::push_const, 0, d.value, &n});
          prog.max_depth = std::max(prog.max_depth, ++depth);
        } else if constexpr (std::is_same_v<T, Node::Variable>) {
          prog.code.push_back(Instruction{OpCode::push_var, d.index, 0.0, &n});
          prog.max_depth = std::max(prog.max_depth, ++depth);
        } else if constexpr (std::is_same_v<T, Node::Negate>) {
          compile_node(*d.operand, prog, depth);
          emit(OpCode::neg, 1, 1);
        } else if constexpr (std::is_same_v<T, Node::Binary>) {
          compile_node(*d.lhs, prog, depth);
          compile_node(*d.rhs, prog, depth);
          OpCode op = OpCode::add;
          switch (d.op) {
            case BinaryOp::add: op = OpCode::add; break;
            case BinaryOp::sub: op = OpCode::sub; break;
            case BinaryOp::mul: op = OpCode::mul; break;
            case BinaryOp::div: op = OpCode::div; break;
            case BinaryOp::pow: op = OpCode::pow; break;
          }
          emit(op, 2, 1);
        } else {
          for (const auto& a : d.args) compile_node(*a, prog, depth);
          OpCode op = OpCode::sqrt;
          switch (d.fn) {
            case Function::sqrt: op = OpCode::sqrt; break;
            case Function::exp: op = OpCode::exp; break;
            case Function::log: op = OpCode::log; break;
            case Function::sin: op = OpCode::sin; break;
            case Function::cos: op = OpCode::cos; break;
            case Function::tan: op = OpCode::tan; break;
            case Function::tanh: op = OpCode::tanh; break;
            case Function::abs: op = OpCode::abs; break;
            case Function::pow: op = OpCode::pow; break;
          }
          emit(op, d.args.size(), 1);
        }
      },
      n.data);
}

[[nodiscard]] inline std::shared_ptr<const Program> compile(const Node& root) {
  auto prog = std::make_shared<Program>();
  std::size_t depth = 0;
  compile_node(root, *prog, depth);
  return prog;
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// An immutable parsed scalar function. Copies share the tree and the
/// compiled program, so an Expression is cheap to pass by value and safe to
/// evaluate concurrently.
class Expression {
 public:
  Expression() : Expression(make_constant(0.0), {}) {}

  Expression(NodePtr root, std::vector<std::string> variables)
      : root_(std::move(root)), vars_(std::move(variables)), program_(detail::compile(*root_)) {}

  [[nodiscard]] const Node& root() const noexcept { return *root_; }
  [[nodiscard]] const NodePtr& root_ptr() const noexcept { return root_; }
  [[nodiscard]] const std::vector<std::string>& variables() const noexcept { return vars_; }

  [[nodiscard]] bool is_constant() const noexcept {
    return std::holds_alternative<Node::Constant>(root_->data);
  }

  [[nodiscard]] std::string str() const { return print(*root_, vars_); }

  [[nodiscard]] std::optional<std::size_t> variable_index(std::string_view name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) return i;
    }
    return std::nullopt;
  }

  /// True when the tree references the variable `name`.
  [[nodiscard]] bool uses(std::string_view name) const {
    const auto idx = variable_index(name);
    if (!idx) return false;
    return std::any_of(program_->code.begin(), program_->code.end(), [&](const auto& ins) {
      return ins.op == detail::OpCode::push_var && ins.index == *idx;
    });
  }

  /// Positional evaluation; values[i] binds variables()[i].
  [[nodiscard]] double operator()(std::span<const double> values) const {
    if (values.size() < vars_.size()) {
      throw Error(ErrorKind::invalid_argument,
                  "evaluation point binds " + std::to_string(values.size()) + " of " +
                      std::to_string(vars_.size()) + " variables");
    }
    if (program_->max_depth <= 32) {
      std::array<double, 32> stack;
      return run(values, stack.data());
    }
    std::vector<double> stack(program_->max_depth);
    return run(values, stack.data());
  }

  [[nodiscard]] double operator()(std::initializer_list<double> values) const {
    return (*this)(std::span<const double>(values.begin(), values.size()));
  }

  /// Same function over a different variable list; every referenced variable
  /// must appear in `variables`.
  [[nodiscard]] Expression rebind(std::vector<std::string> variables) const {
    std::vector<std::size_t> remap(vars_.size(), static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      for (std::size_t j = 0; j < variables.size(); ++j) {
        if (vars_[i] == variables[j]) remap[i] = j;
      }
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (remap[i] == static_cast<std::size_t>(-1) && uses(vars_[i])) {
        throw Error(ErrorKind::unknown_identifier,
                    "variable '" + vars_[i] + "' is not permitted here (expression '" + str() + "')");
      }
    }
    return Expression(rebind_node(root_, remap), std::move(variables));
  }

 private:
  static NodePtr rebind_node(const NodePtr& n, const std::vector<std::size_t>& remap) {
    return std::visit(
        [&](const auto& d) -> NodePtr {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Node::Constant>) {
            return n;
          } else if constexpr (std::is_same_v<T, Node::Variable>) {
            return make_variable(remap[d.index]);
          } else if constexpr (std::is_same_v<T, Node::Negate>) {
            return make_negate(rebind_node(d.operand, remap), false);
          } else if constexpr (std::is_same_v<T, Node::Binary>) {
            return make_binary(d.op, rebind_node(d.lhs, remap), rebind_node(d.rhs, remap), false);
          } else {
            std::vector<NodePtr> args;
            for (const auto& a : d.args) args.push_back(rebind_node(a, remap));
            return make_call(d.fn, std::move(args));
          }
        },
        n->data);
  }

  [[noreturn]] void domain_error(const detail::Instruction& ins, const char* what) const {
    throw Error(ErrorKind::domain,
                std::string(what) + " in '" + print(*ins.origin, vars_) + "'");
  }

  double run(std::span<const double> values, double* stack) const {
    std::size_t sp = 0;
    for (const auto& ins : program_->code) {
      using detail::OpCode;
      switch (ins.op) {
        case OpCode::push_const: stack[sp++] = ins.value; continue;
        case OpCode::push_var: stack[sp++] = values[ins.index]; continue;
        case OpCode::neg: stack[sp - 1] = -stack[sp - 1]; continue;
        default: break;
      }
      if (ins.op == OpCode::add || ins.op == OpCode::sub || ins.op == OpCode::mul ||
          ins.op == OpCode::div || ins.op == OpCode::pow) {
        const double b = stack[--sp];
        const double a = stack[sp - 1];
        double r = 0.0;
        switch (ins.op) {
          case OpCode::add: r = a + b; break;
          case OpCode::sub: r = a - b; break;
          case OpCode::mul: r = a * b; break;
          case OpCode::div:
            if (b == 0.0) domain_error(ins, "division by zero");
            r = a / b;
            break;
          case OpCode::pow:
            if (!real_power(a, b, r)) domain_error(ins, "power of non-positive base");
            break;
          default: break;
        }
        if (!std::isfinite(r)) domain_error(ins, "non-finite result");
        stack[sp - 1] = r;
        continue;
      }
      const double a = stack[sp - 1];
      double r = 0.0;
      switch (ins.op) {
        case OpCode::sqrt:
          if (a < 0.0) domain_error(ins, "square root of negative argument");
          r = std::sqrt(a);
          break;
        case OpCode::exp: r = std::exp(a); break;
        case OpCode::log:
          if (!(a > 0.0)) domain_error(ins, "logarithm of non-positive argument");
          r = std::log(a);
          break;
        case OpCode::sin: r = std::sin(a); break;
        case OpCode::cos: r = std::cos(a); break;
        case OpCode::tan: r = std::tan(a); break;
        case OpCode::tanh: r = std::tanh(a); break;
        case OpCode::abs: r = std::abs(a); break;
        default: break;
      }
      if (!std::isfinite(r)) domain_error(ins, "non-finite result");
      stack[sp - 1] = r;
    }
    return stack[0];
  }

  NodePtr root_;
  std::vector<std::string> vars_;
  std::shared_ptr<const detail::Program> program_;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars) : text_(text), vars_(vars) {}

  NodePtr parse() {
    for (std::size_t i = 0; i < text_.size(); ++i) {
      if (static_cast<unsigned char>(text_[i]) > 0x7f) {
        throw Error(ErrorKind::syntax, "non-ASCII character at offset " + std::to_string(i), i);
      }
    }
    skip_ws();
    if (pos_ >= text_.size()) throw Error(ErrorKind::syntax, "empty expression", pos_);
    NodePtr n = parse_expr();
    skip_ws();
    if (pos_ < text_.size()) fail("unexpected character");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::string msg = what + " at offset " + std::to_string(pos_);
    if (pos_ < text_.size()) {
      msg += " ('";
      msg += text_[pos_];
      msg += "')";
    } else {
      msg += " (end of input)";
    }
    throw Error(ErrorKind::syntax, msg, pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(BinaryOp::add, std::move(lhs), parse_term(), false);
      } else if (accept('-')) {
        lhs = make_binary(BinaryOp::sub, std::move(lhs), parse_term(), false);
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(BinaryOp::mul, std::move(lhs), parse_unary(), false);
      } else if (accept('/')) {
        lhs = make_binary(BinaryOp::div, std::move(lhs), parse_unary(), false);
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_negate(parse_unary(), false);
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept('^')) return make_binary(BinaryOp::pow, std::move(base), parse_unary(), false);
    return base;
  }

  static bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && is_digit(text_[p])) {
        pos_ = p;
        while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      }
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_ || !std::isfinite(v)) {
      pos_ = start;
      fail("malformed number");
    }
    return make_constant(v);
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected operand");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (is_digit(c) || c == '.') return parse_number();
    if (!is_ident_start(c)) fail("expected operand");

    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);

    const FunctionInfo* fn = nullptr;
    for (const auto& info : kFunctions) {
      if (info.name == name) fn = &info;
    }
    skip_ws();
    const bool call = pos_ < text_.size() && text_[pos_] == '(';
    if (fn != nullptr) {
      if (!call) {
        throw Error(ErrorKind::arity_mismatch,
                    "function '" + std::string(name) + "' used without arguments at offset " +
                        std::to_string(start),
                    start);
      }
      ++pos_;
      std::vector<NodePtr> args;
      skip_ws();
      if (!(pos_ < text_.size() && text_[pos_] == ')')) {
        args.push_back(parse_expr());
        while (accept(',')) args.push_back(parse_expr());
      }
      if (!accept(')')) fail("expected ')' or ','");
      if (args.size() != fn->arity) {
        throw Error(ErrorKind::arity_mismatch,
                    "function '" + std::string(name) + "' expects " + std::to_string(fn->arity) +
                        " argument(s), got " + std::to_string(args.size()) + " at offset " +
                        std::to_string(start),
                    start);
      }
      if (fn->fn == Function::pow) {
        return make_binary(BinaryOp::pow, std::move(args[0]), std::move(args[1]), false);
      }
      return make_call(fn->fn, std::move(args));
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) {
        if (call) {
          throw Error(ErrorKind::unknown_identifier,
                      "'" + std::string(name) + "' is a variable, not a function", start);
        }
        return make_variable(i);
      }
    }
    throw Error(ErrorKind::unknown_identifier,
                "unknown identifier '" + std::string(name) + "' at offset " + std::to_string(start),
                start);
  }

  std::string_view text_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses `text` over the ordered variable list `allowed_vars` (a subset of
/// x, y, z, u). pow(a,b) is parsed as a^b.
[[nodiscard]] inline Expression parse(std::string_view text, std::vector<std::string> allowed_vars) {
  for (std::size_t i = 0; i < allowed_vars.size(); ++i) {
    const auto& v = allowed_vars[i];
    if (std::find(kPermittedVariables.begin(), kPermittedVariables.end(), v) ==
        kPermittedVariables.end()) {
      throw Error(ErrorKind::invalid_argument, "variable name '" + v + "' is not one of x, y, z, u");
    }
    if (std::find(allowed_vars.begin(), allowed_vars.begin() + static_cast<std::ptrdiff_t>(i), v) !=
        allowed_vars.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw Error(ErrorKind::invalid_argument, "variable '" + v + "' listed twice");
    }
  }
  NodePtr root = detail::Parser(text, allowed_vars).parse();
  return Expression(std::move(root), std::move(allowed_vars));
}

[[nodiscard]] inline double eval(const Expression& e, const EvalPoint& point) {
  std::vector<double> values(e.variables().size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto it = point.find(e.variables()[i]);
    if (it == point.end()) {
      throw Error(ErrorKind::invalid_argument,
                  "evaluation point does not bind variable '" + e.variables()[i] + "'");
    }
    values[i] = it->second;
  }
  return e(values);
}

[[nodiscard]] inline std::string print(const Expression& e) { return e.str(); }

// ---------------------------------------------------------------------------
// Symbolic differentiation

namespace detail {

inline NodePtr derive(const NodePtr& n, std::size_t var) {
  using B = BinaryOp;
  return std::visit(
      [&](const auto& d) -> NodePtr {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Node::Constant>) {
          return make_constant(0.0);
        } else if constexpr (std::is_same_v<T, Node::Variable>) {
          return make_constant(d.index == var ? 1.0 : 0.0);
        } else if constexpr (std::is_same_v<T, Node::Negate>) {
          return make_negate(derive(d.operand, var));
        } else if constexpr (std::is_same_v<T, Node::Binary>) {
          const NodePtr& a = d.lhs;
          const NodePtr& b = d.rhs;
          switch (d.op) {
            case B::add: return make_binary(B::add, derive(a, var), derive(b, var));
            case B::sub: return make_binary(B::sub, derive(a, var), derive(b, var));
            case B::mul:
              return make_binary(B::add, make_binary(B::mul, derive(a, var), b),
                                 make_binary(B::mul, a, derive(b, var)));
            case B::div:
              return make_binary(
                  B::div,
                  make_binary(B::sub, make_binary(B::mul, derive(a, var), b),
                              make_binary(B::mul, a, derive(b, var))),
                  make_binary(B::pow, b, make_constant(2.0)));
            case B::pow: {
              if (const double* c = constant_value(b)) {
                // c * a^(c-1) * a'
                return make_binary(
                    B::mul,
                    make_binary(B::mul, make_constant(*c),
                                make_binary(B::pow, a, make_constant(*c - 1.0))),
                    derive(a, var));
              }
              // a^b * (b' log a + b a'/a)
              return make_binary(
                  B::mul, n,
                  make_binary(B::add,
                              make_binary(B::mul, derive(b, var), make_call(Function::log, a)),
                              make_binary(B::div, make_binary(B::mul, b, derive(a, var)), a)));
            }
          }
          return make_constant(0.0);
        } else {
          const NodePtr& a = d.args.front();
          const NodePtr da = derive(a, var);
          switch (d.fn) {
            case Function::sqrt:
              return make_binary(B::div, da,
                                 make_binary(B::mul, make_constant(2.0), make_call(Function::sqrt, a)));
            case Function::exp: return make_binary(B::mul, n, da);
            case Function::log: return make_binary(B::div, da, a);
            case Function::sin: return make_binary(B::mul, make_call(Function::cos, a), da);
            case Function::cos:
              return make_negate(make_binary(B::mul, make_call(Function::sin, a), da));
            case Function::tan:
              return make_binary(
                  B::div, da, make_binary(B::pow, make_call(Function::cos, a), make_constant(2.0)));
            case Function::tanh:
              return make_binary(
                  B::mul,
                  make_binary(B::sub, make_constant(1.0),
                              make_binary(B::pow, n, make_constant(2.0))),
                  da);
            case Function::abs:
              // sign(a) written as a/abs(a): undefined (domain error) at a = 0.
              return make_binary(B::mul, make_binary(B::div, a, n), da);
            case Function::pow: return make_constant(0.0);  // parsed as BinaryOp::pow
          }
          return make_constant(0.0);
        }
      },
      n->data);
}

}  // namespace detail

/// Symbolic partial derivative with respect to `var`, over the same variable
/// list as `e`.
[[nodiscard]] inline Expression differentiate(const Expression& e, std::string_view var) {
  const auto idx = e.variable_index(var);
  if (!idx) {
    throw Error(ErrorKind::invalid_argument,
                "cannot differentiate with respect to '" + std::string(var) +
                    "': not a variable of '" + e.str() + "'");
  }
  return Expression(detail::derive(e.root_ptr(), *idx), e.variables());
}

/// Product and power combinators used to assemble derived expressions
/// (for example q(x) * z^n) from parsed pieces with a common variable list.
namespace detail {
inline void require_same_variables(const Expression& a, const Expression& b) {
  if (a.variables() != b.variables()) {
    throw Error(ErrorKind::invalid_argument,
                "cannot combine '" + a.str() + "' and '" + b.str() + "': variable lists differ");
  }
}
}  // namespace detail

[[nodiscard]] inline Expression multiply(const Expression& a, const Expression& b) {
  detail::require_same_variables(a, b);
  return Expression(make_binary(BinaryOp::mul, a.root_ptr(), b.root_ptr()), a.variables());
}
[[nodiscard]] inline Expression divide(const Expression& a, const Expression& b) {
  detail::require_same_variables(a, b);
  return Expression(make_binary(BinaryOp::div, a.root_ptr(), b.root_ptr()), a.variables());
}
[[nodiscard]] inline Expression add(const Expression& a, const Expression& b) {
  detail::require_same_variables(a, b);
  return Expression(make_binary(BinaryOp::add, a.root_ptr(), b.root_ptr()), a.variables());
}

}  // namespace ulamcert::expr
