#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nesylab::logic {

// Enumeration over 2^N worlds gets expensive fast; refuse past this point.
inline constexpr std::size_t kMaxEnumVars = 20;

enum class NodeKind : std::uint8_t {
  ConstTrue,
  ConstFalse,
  Var,
  Not,
  And,
  Or,
  Implies,
  Iff,
};

struct Node {
  NodeKind kind;
  int lhs = -1;  // unary ops use lhs only
  int rhs = -1;
  int var = -1;  // index into Formula::variables() for Var nodes
};

class FormulaBuilder;

namespace detail {
class Parser;
}

// Propositional formula over named Boolean variables. Nodes live in a flat
// arena; variables() fixes the canonical variable order (first occurrence
// when parsed, caller-supplied when built).
class Formula {
 public:
  Formula() = default;

  const std::vector<std::string>& variables() const { return variables_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  int root() const { return root_; }
  bool empty() const { return root_ < 0; }

 private:
  friend class FormulaBuilder;
  friend class detail::Parser;

  std::vector<Node> nodes_;
  std::vector<std::string> variables_;
  int root_ = -1;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : std::runtime_error("syntax error at offset " + std::to_string(offset) +
                           ": " + msg),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

namespace detail {

inline bool eval_node(const std::vector<Node>& nodes, int idx,
                      const std::vector<std::uint8_t>& values) {
  const Node& n = nodes[static_cast<std::size_t>(idx)];
  switch (n.kind) {
    case NodeKind::ConstTrue:
      return true;
    case NodeKind::ConstFalse:
      return false;
    case NodeKind::Var:
      return values[static_cast<std::size_t>(n.var)] != 0;
    case NodeKind::Not:
      return !eval_node(nodes, n.lhs, values);
    case NodeKind::And:
      return eval_node(nodes, n.lhs, values) && eval_node(nodes, n.rhs, values);
    case NodeKind::Or:
      return eval_node(nodes, n.lhs, values) || eval_node(nodes, n.rhs, values);
    case NodeKind::Implies:
      return !eval_node(nodes, n.lhs, values) || eval_node(nodes, n.rhs, values);
    case NodeKind::Iff:
      return eval_node(nodes, n.lhs, values) == eval_node(nodes, n.rhs, values);
  }
  return false;
}

enum class Tok : std::uint8_t {
  Ident,
  True,
  False,
  Not,
  And,
  Or,
  Implies,
  Iff,
  LParen,
  RParen,
  End,
};

struct Token {
  Tok kind;
  std::size_t offset;
  std::string text;
};

inline bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

inline std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '!') {
      out.push_back({Tok::Not, i, "!"});
      ++i;
    } else if (c == '&') {
      out.push_back({Tok::And, i, "&"});
      ++i;
    } else if (c == '|') {
      out.push_back({Tok::Or, i, "|"});
      ++i;
    } else if (c == '(') {
      out.push_back({Tok::LParen, i, "("});
      ++i;
    } else if (c == ')') {
      out.push_back({Tok::RParen, i, ")"});
      ++i;
    } else if (c == '-') {
      if (i + 1 < text.size() && text[i + 1] == '>') {
        out.push_back({Tok::Implies, i, "->"});
        i += 2;
      } else {
        throw ParseError("expected '->'", i);
      }
    } else if (c == '<') {
      if (i + 2 < text.size() && text[i + 1] == '-' && text[i + 2] == '>') {
        out.push_back({Tok::Iff, i, "<->"});
        i += 3;
      } else {
        throw ParseError("expected '<->'", i);
      }
    } else if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && ident_char(text[j])) ++j;
      std::string word(text.substr(i, j - i));
      if (word == "true") {
        out.push_back({Tok::True, i, std::move(word)});
      } else if (word == "false") {
        out.push_back({Tok::False, i, std::move(word)});
      } else {
        out.push_back({Tok::Ident, i, std::move(word)});
      }
      i = j;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
  }
  out.push_back({Tok::End, text.size(), ""});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(lex(text)) {}

  Formula run() {
    if (peek().kind == Tok::End) {
      throw ParseError("empty formula", peek().offset);
    }
    const int root = parse_iff();
    if (peek().kind != Tok::End) {
      throw ParseError("unexpected trailing input", peek().offset);
    }
    f_.root_ = root;
    return std::move(f_);
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_++]; }

  int add(Node n) {
    f_.nodes_.push_back(n);
    return static_cast<int>(f_.nodes_.size()) - 1;
  }

  int parse_iff() {
    int lhs = parse_implies();
    while (peek().kind == Tok::Iff) {
      take();
      const int rhs = parse_implies();
      lhs = add({NodeKind::Iff, lhs, rhs, -1});
    }
    return lhs;
  }

  // right-associative
  int parse_implies() {
    const int lhs = parse_or();
    if (peek().kind == Tok::Implies) {
      take();
      const int rhs = parse_implies();
      return add({NodeKind::Implies, lhs, rhs, -1});
    }
    return lhs;
  }

  int parse_or() {
    int lhs = parse_and();
    while (peek().kind == Tok::Or) {
      take();
      const int rhs = parse_and();
      lhs = add({NodeKind::Or, lhs, rhs, -1});
    }
    return lhs;
  }

  int parse_and() {
    int lhs = parse_unary();
    while (peek().kind == Tok::And) {
      take();
      const int rhs = parse_unary();
      lhs = add({NodeKind::And, lhs, rhs, -1});
    }
    return lhs;
  }

  int parse_unary() {
    if (peek().kind == Tok::Not) {
      take();
      const int child = parse_unary();
      return add({NodeKind::Not, child, -1, -1});
    }
    return parse_atom();
  }

  int parse_atom() {
    const Token t = take();
    switch (t.kind) {
      case Tok::True:
        return add({NodeKind::ConstTrue, -1, -1, -1});
      case Tok::False:
        return add({NodeKind::ConstFalse, -1, -1, -1});
      case Tok::Ident: {
        auto it = var_index_.find(t.text);
        int v;
        if (it == var_index_.end()) {
          v = static_cast<int>(f_.variables_.size());
          f_.variables_.push_back(t.text);
          var_index_.emplace(t.text, v);
        } else {
          v = it->second;
        }
        return add({NodeKind::Var, -1, -1, v});
      }
      case Tok::LParen: {
        const int inner = parse_iff();
        if (peek().kind != Tok::RParen) {
          throw ParseError("expected ')'", peek().offset);
        }
        take();
        return inner;
      }
      case Tok::End:
        throw ParseError("unexpected end of input", t.offset);
      default:
        throw ParseError("unexpected token '" + t.text + "'", t.offset);
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  Formula f_;
  std::unordered_map<std::string, int> var_index_;
};

}  // namespace detail

inline Formula parse(std::string_view text) { return detail::Parser(text).run(); }

// Programmatic construction with an explicit variable order. Every method
// returns a node handle to feed into later calls; build() seals the formula.
class FormulaBuilder {
 public:
  explicit FormulaBuilder(std::vector<std::string> variables) {
    for (std::size_t i = 0; i < variables.size(); ++i) {
      for (std::size_t j = i + 1; j < variables.size(); ++j) {
        if (variables[i] == variables[j]) {
          throw std::invalid_argument("duplicate variable name: " + variables[i]);
        }
      }
    }
    f_.variables_ = std::move(variables);
  }

  int var(std::size_t i) {
    if (i >= f_.variables_.size()) {
      throw std::out_of_range("variable index out of range");
    }
    return add({NodeKind::Var, -1, -1, static_cast<int>(i)});
  }

  int var(std::string_view name) {
    for (std::size_t i = 0; i < f_.variables_.size(); ++i) {
      if (f_.variables_[i] == name) return var(i);
    }
    throw std::invalid_argument("unknown variable: " + std::string(name));
  }

  int constant(bool value) {
    return add({value ? NodeKind::ConstTrue : NodeKind::ConstFalse, -1, -1, -1});
  }

  int not_(int a) { return add({NodeKind::Not, check(a), -1, -1}); }
  int and_(int a, int b) { return add({NodeKind::And, check(a), check(b), -1}); }
  int or_(int a, int b) { return add({NodeKind::Or, check(a), check(b), -1}); }
  int implies(int a, int b) { return add({NodeKind::Implies, check(a), check(b), -1}); }
  int iff(int a, int b) { return add({NodeKind::Iff, check(a), check(b), -1}); }

  Formula build(int root) {
    check(root);
    Formula out = f_;
    out.root_ = root;
    return out;
  }

 private:
  int add(Node n) {
    f_.nodes_.push_back(n);
    return static_cast<int>(f_.nodes_.size()) - 1;
  }

  int check(int idx) const {
    if (idx < 0 || idx >= static_cast<int>(f_.nodes_.size())) {
      throw std::out_of_range("node handle out of range");
    }
    return idx;
  }

  Formula f_;
};

// A total truth assignment. assignment[i] is the value of variable i in the
// formula's canonical order; index encodes the same assignment with
// variable 0 as the most significant bit.
struct World {
  std::uint64_t index = 0;
  std::vector<std::uint8_t> assignment;
};

inline World world_from_index(std::size_t n_vars, std::uint64_t index) {
  if (n_vars > kMaxEnumVars) {
    throw std::invalid_argument("too many variables (limit " +
                                std::to_string(kMaxEnumVars) + ")");
  }
  if (index >> n_vars != 0) {
    throw std::out_of_range("world index out of range");
  }
  World w;
  w.index = index;
  w.assignment.resize(n_vars);
  for (std::size_t i = 0; i < n_vars; ++i) {
    w.assignment[i] =
        static_cast<std::uint8_t>((index >> (n_vars - 1 - i)) & 1ULL);
  }
  return w;
}

inline bool evaluate(const Formula& f, const World& w) {
  if (f.empty()) {
    throw std::logic_error("evaluate called on an empty formula");
  }
  if (w.assignment.size() != f.variables().size()) {
    throw std::invalid_argument(
        "assignment length " + std::to_string(w.assignment.size()) +
        " does not match variable count " +
        std::to_string(f.variables().size()));
  }
  return detail::eval_node(f.nodes(), f.root(), w.assignment);
}

// Independent success probability per variable, in canonical variable order.
struct BernoulliVector {
  std::vector<double> probs;
};

namespace detail {

inline void check_probs(const BernoulliVector& p) {
  for (double v : p.probs) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("probability out of [0, 1]: " +
                                  std::to_string(v));
    }
  }
}

inline void check_enum_size(std::size_t n) {
  if (n > kMaxEnumVars) {
    throw std::invalid_argument("too many variables (limit " +
                                std::to_string(kMaxEnumVars) + ")");
  }
}

}  // namespace detail

// Probability of world m under the factorized distribution. Both wmc and
// world_distribution go through this, so their per-world terms are
// bit-identical.
inline double world_weight(const BernoulliVector& p, std::uint64_t m) {
  const std::size_t n = p.probs.size();
  double w = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool on = ((m >> (n - 1 - i)) & 1ULL) != 0;
    w *= on ? p.probs[i] : (1.0 - p.probs[i]);
  }
  return w;
}

// Model count over an explicit variable space. p is sized to
// shared_variables; the formula may mention any subset of them.
inline double wmc(const Formula& f, const BernoulliVector& p,
                  const std::vector<std::string>& shared_variables) {
  if (f.empty()) {
    throw std::logic_error("wmc called on an empty formula");
  }
  const std::size_t n = shared_variables.size();
  if (p.probs.size() != n) {
    throw std::invalid_argument("probability vector length " +
                                std::to_string(p.probs.size()) +
                                " does not match variable count " +
                                std::to_string(n));
  }
  detail::check_probs(p);
  detail::check_enum_size(n);

  std::vector<std::size_t> positions;
  for (const std::string& name : f.variables()) {
    std::size_t pos = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (shared_variables[j] == name) {
        pos = j;
        break;
      }
    }
    if (pos == n) {
      throw std::invalid_argument("formula uses variable '" + name +
                                  "' not in the shared variable list");
    }
    positions.push_back(pos);
  }

  const std::uint64_t worlds = 1ULL << n;
  std::vector<std::uint8_t> values(positions.size());
  double total = 0.0;
  for (std::uint64_t m = 0; m < worlds; ++m) {
    for (std::size_t i = 0; i < positions.size(); ++i) {
      values[i] =
          static_cast<std::uint8_t>((m >> (n - 1 - positions[i])) & 1ULL);
    }
    if (detail::eval_node(f.nodes(), f.root(), values)) {
      total += world_weight(p, m);
    }
  }
  return total;
}

inline double wmc(const Formula& f, const BernoulliVector& p) {
  if (f.empty()) {
    throw std::logic_error("wmc called on an empty formula");
  }
  return wmc(f, p, f.variables());
}

inline std::vector<double> world_distribution(const BernoulliVector& p) {
  detail::check_probs(p);
  detail::check_enum_size(p.probs.size());
  const std::uint64_t worlds = 1ULL << p.probs.size();
  std::vector<double> q(worlds);
  for (std::uint64_t m = 0; m < worlds; ++m) {
    q[m] = world_weight(p, m);
  }
  return q;
}

// Per-class world membership over a shared variable order. betas[k][m] is 1
// when world m satisfies class formula k.
struct WorldTable {
  std::vector<std::string> variables;
  std::vector<std::vector<std::uint8_t>> betas;
  bool mutually_exclusive = true;
  bool exhaustive = true;

  std::size_t world_count() const { return betas.empty() ? 0 : betas[0].size(); }
  bool is_partition() const { return mutually_exclusive && exhaustive; }
};

// Disjunction of one minterm per member world (big-endian world indexing),
// over the full variable list. Empty membership gives the constant false.
inline Formula dnf_for_worlds(const std::vector<std::uint8_t>& member,
                              const std::vector<std::string>& variables) {
  detail::check_enum_size(variables.size());
  const std::size_t n = variables.size();
  if (member.size() != (1ULL << n)) {
    throw std::invalid_argument("membership vector must cover all " +
                                std::to_string(1ULL << n) + " worlds");
  }
  FormulaBuilder b(variables);
  int acc = -1;
  for (std::uint64_t m = 0; m < member.size(); ++m) {
    if (!member[m]) continue;
    int term = -1;
    for (std::size_t i = 0; i < n; ++i) {
      const bool on = ((m >> (n - 1 - i)) & 1ULL) != 0;
      int lit = b.var(i);
      if (!on) lit = b.not_(lit);
      term = term < 0 ? lit : b.and_(term, lit);
    }
    if (term < 0) term = b.constant(true);
    acc = acc < 0 ? term : b.or_(acc, term);
  }
  if (acc < 0) acc = b.constant(false);
  return b.build(acc);
}

inline WorldTable build_world_table(const std::vector<Formula>& classes,
                                    const std::vector<std::string>& variables) {
  detail::check_enum_size(variables.size());
  for (std::size_t i = 0; i < variables.size(); ++i) {
    for (std::size_t j = i + 1; j < variables.size(); ++j) {
      if (variables[i] == variables[j]) {
        throw std::invalid_argument("duplicate variable name: " + variables[i]);
      }
    }
  }

  const std::size_t n = variables.size();
  // Map each class's local variables onto the shared order.
  std::vector<std::vector<std::size_t>> positions(classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (classes[k].empty()) {
      throw std::logic_error("class formula is empty");
    }
    for (const std::string& name : classes[k].variables()) {
      std::size_t pos = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (variables[j] == name) {
          pos = j;
          break;
        }
      }
      if (pos == n) {
        throw std::invalid_argument("class formula uses variable '" + name +
                                    "' not in the shared variable list");
      }
      positions[k].push_back(pos);
    }
  }

  WorldTable table;
  table.variables = variables;
  const std::uint64_t worlds = 1ULL << n;
  table.betas.assign(classes.size(), std::vector<std::uint8_t>(worlds, 0));

  std::vector<std::uint8_t> values;
  for (std::uint64_t m = 0; m < worlds; ++m) {
    int members = 0;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      values.resize(positions[k].size());
      for (std::size_t i = 0; i < positions[k].size(); ++i) {
        values[i] = static_cast<std::uint8_t>(
            (m >> (n - 1 - positions[k][i])) & 1ULL);
      }
      const bool sat =
          detail::eval_node(classes[k].nodes(), classes[k].root(), values);
      table.betas[k][m] = sat ? 1 : 0;
      members += sat ? 1 : 0;
    }
    if (members > 1) table.mutually_exclusive = false;
    if (members == 0) table.exhaustive = false;
  }
  return table;
}

}  // namespace nesylab::logic
