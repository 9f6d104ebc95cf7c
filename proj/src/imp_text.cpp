#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>

#include "pbr/imp.hpp"

namespace pbr {

SyntaxError::SyntaxError(std::size_t l, std::size_t c, const std::string& msg)
    : std::runtime_error("syntax error at " + std::to_string(l) + ":" + std::to_string(c) + ": " + msg),
      line(l),
      col(c) {}

namespace {

const std::set<std::string> kKeywords = {"if", "else", "return", "double"};

bool is_output_name(const std::string& s) {
  if (s.size() < 2 || s[0] != 'o') return false;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

bool is_ident(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

std::string fmt_num(double v) {
  if (!std::isfinite(v)) throw UsageError("cannot emit a non-finite coefficient");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string emit_expr(const Expr& e, const std::vector<std::string>& names) {
  std::string out;
  auto term = [&](bool neg, const std::string& body) {
    if (out.empty())
      out = neg ? "-" + body : body;
    else
      out += (neg ? " - " : " + ") + body;
  };
  const std::size_t p = e.coeffs.size() - 1;
  for (std::size_t i = 0; i <= p; ++i) {
    const Coef& c = e.coeffs[i];
    bool is_const = i == p;
    if (c.hole) {
      term(false, is_const ? "??" : "?? * " + names[i]);
      continue;
    }
    if (std::fabs(c.value) < 1e-9) continue;
    std::string mag = fmt_num(std::fabs(c.value));
    bool neg = c.value < 0;
    if (is_const)
      term(neg, mag);
    else
      term(neg, mag == "1" ? names[i] : mag + " * " + names[i]);
  }
  return out.empty() ? "0" : out;
}

void flatten(const StmtPtr& s, std::vector<StmtPtr>& out) {
  if (s->kind == Stmt::Kind::Seq) {
    flatten(s->first, out);
    flatten(s->second, out);
  } else {
    out.push_back(s);
  }
}

struct Emitter {
  const ImpProgram& prog;
  const std::vector<std::string>& names;
  std::string out;

  void line(int depth, const std::string& s) {
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
    out += s;
    out += '\n';
  }

  void block(const StmtPtr& s, int depth, bool tail) {
    std::vector<StmtPtr> items;
    flatten(s, items);
    std::size_t n = items.size(), m = prog.m;
    // a trailing run assigning o0..o(m-1) in order is printed as a return
    bool ret = tail && n >= m;
    for (std::size_t j = 0; ret && j < m; ++j) {
      const auto& it = items[n - m + j];
      ret = it->kind == Stmt::Kind::Assign && it->out == j;
    }
    std::size_t stop = ret ? n - m : n;
    for (std::size_t i = 0; i < stop; ++i) {
      const Stmt& st = *items[i];
      if (st.kind == Stmt::Kind::Assign) {
        line(depth, "o" + std::to_string(st.out) + " = " + emit_expr(st.expr, names) + ";");
      } else {
        line(depth, "if (" + emit_expr(st.expr, names) + " > 0) {");
        bool t = tail && i + 1 == n;
        block(st.first, depth + 1, t);
        line(depth, "} else {");
        block(st.second, depth + 1, t);
        line(depth, "}");
      }
    }
    if (ret) {
      if (m == 1) {
        line(depth, "return " + emit_expr(items[n - 1]->expr, names) + ";");
      } else {
        std::string r = "return (";
        for (std::size_t j = 0; j < m; ++j)
          r += (j ? ", " : "") + emit_expr(items[n - m + j]->expr, names);
        line(depth, r + ");");
      }
    }
  }
};

// ---- parsing ----

struct Token {
  enum Kind { Ident, Number, Punct, End } kind;
  std::string text;
  std::size_t line, col;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> toks;
  std::size_t i = 0, line = 1, col = 1;
  auto adv = [&](std::size_t k) {
    for (std::size_t j = 0; j < k; ++j) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      adv(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') adv(1);
      continue;
    }
    std::size_t l = line, co = col, start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      toks.push_back({Token::Ident, std::string(src.substr(i, j - i)), l, co});
      adv(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          j = k;
          while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        }
      }
      toks.push_back({Token::Number, std::string(src.substr(start, j - i)), l, co});
      adv(j - i);
      continue;
    }
    if (c == '?' && i + 1 < src.size() && src[i + 1] == '?') {
      toks.push_back({Token::Punct, "??", l, co});
      adv(2);
      continue;
    }
    if (std::string_view("{}()[];,=+-*>").find(c) != std::string_view::npos) {
      toks.push_back({Token::Punct, std::string(1, c), l, co});
      adv(1);
      continue;
    }
    throw SyntaxError(l, co, std::string("unexpected character '") + c + "'");
  }
  toks.push_back({Token::End, "", line, col});
  return toks;
}

struct Parser {
  std::vector<Token> toks;
  std::size_t pos = 0;
  std::size_t p = 0;
  std::size_t m = 1;
  std::map<std::string, std::size_t> feature;

  const Token& peek() const { return toks[pos]; }
  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw SyntaxError(t.line, t.col, msg + (t.kind == Token::End ? " (got end of input)" : " (got '" + t.text + "')"));
  }
  bool is(const std::string& s) const {
    const Token& t = peek();
    return (t.kind == Token::Punct || t.kind == Token::Ident) && t.text == s;
  }
  const Token& expect(const std::string& s) {
    if (!is(s)) fail(peek(), "expected '" + s + "'");
    return toks[pos++];
  }
  std::string ident() {
    if (peek().kind != Token::Ident) fail(peek(), "expected identifier");
    return toks[pos++].text;
  }
  std::size_t integer() {
    const Token& t = peek();
    if (t.kind != Token::Number || t.text.find_first_not_of("0123456789") != std::string::npos)
      fail(t, "expected integer");
    ++pos;
    return std::stoul(t.text);
  }

  void header() {
    expect("double");
    if (is("[")) {
      ++pos;
      const Token& t = peek();
      m = integer();
      if (m == 0) fail(t, "output count must be >= 1");
      expect("]");
    }
    std::string fname = ident();
    (void)fname;
    expect("(");
    std::vector<std::string> names;
    if (!is(")")) {
      while (true) {
        expect("double");
        const Token& t = peek();
        std::string n = ident();
        if (kKeywords.count(n) || is_output_name(n)) fail(t, "reserved parameter name");
        if (feature.count(n)) fail(t, "duplicate parameter name");
        feature[n] = names.size();
        names.push_back(n);
        if (is(")")) break;
        expect(",");
      }
    }
    expect(")");
    p = names.size();
  }

  // Without a header, features must be named x0, x1, ... and m comes from returns.
  void infer_signature() {
    std::size_t max_x = 0, max_o = 0, ret_arity = 1;
    bool any_x = false, any_o = false;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const Token& t = toks[i];
      if (t.kind != Token::Ident) continue;
      if (t.text.size() > 1 && t.text[0] == 'x' && t.text.find_first_not_of("0123456789", 1) == std::string::npos) {
        any_x = true;
        max_x = std::max<std::size_t>(max_x, std::stoul(t.text.substr(1)));
      } else if (is_output_name(t.text)) {
        any_o = true;
        max_o = std::max<std::size_t>(max_o, std::stoul(t.text.substr(1)));
      } else if (t.text == "return" && i + 1 < toks.size() && toks[i + 1].text == "(") {
        std::size_t depth = 0, commas = 0;
        for (std::size_t j = i + 1; j < toks.size() && toks[j].text != ";"; ++j) {
          if (toks[j].text == "(") ++depth;
          if (toks[j].text == ")") --depth;
          if (toks[j].text == "," && depth == 1) ++commas;
        }
        ret_arity = std::max(ret_arity, commas + 1);
      }
    }
    p = any_x ? max_x + 1 : 0;
    m = std::max(ret_arity, any_o ? max_o + 1 : 1);
    for (std::size_t i = 0; i < p; ++i) feature["x" + std::to_string(i)] = i;
  }

  Expr expr() {
    Expr e;
    e.coeffs.assign(p + 1, Coef{});
    bool first = true;
    while (true) {
      bool neg = false;
      if (first) {
        if (is("-")) {
          ++pos;
          neg = true;
        }
      } else if (is("+") || is("-")) {
        neg = toks[pos++].text == "-";
      } else {
        break;
      }
      first = false;
      const Token& t = peek();
      bool hole = false;
      double val = 1.0;
      std::optional<std::size_t> var;
      if (t.kind == Token::Number) {
        try {
          std::size_t used = 0;
          val = std::stod(t.text, &used);
          if (used != t.text.size()) fail(t, "malformed number");
        } catch (const std::logic_error&) {
          fail(t, "malformed number");
        }
        ++pos;
        if (is("*")) {
          ++pos;
          var = feature_ref();
        }
      } else if (is("??")) {
        ++pos;
        hole = true;
        if (is("*")) {
          ++pos;
          var = feature_ref();
        }
      } else if (t.kind == Token::Ident) {
        var = feature_ref();
      } else {
        fail(t, "expected a term");
      }
      Coef& c = e.coeffs[var ? *var : p];
      if (hole) {
        c = Coef{0.0, true};
      } else if (!c.hole) {
        c.value += neg ? -val : val;
      }
    }
    if (first) fail(peek(), "expected an expression");
    return e;
  }

  std::size_t feature_ref() {
    const Token& t = peek();
    if (t.kind != Token::Ident) fail(t, "expected a feature name");
    auto it = feature.find(t.text);
    if (it == feature.end()) fail(t, "unknown feature");
    ++pos;
    return it->second;
  }

  // Returns the statements of a block; tail marks positions after which
  // nothing else executes.
  std::vector<StmtPtr> block(bool tail, const std::string& closer) {
    std::vector<StmtPtr> items;
    while (!(closer.empty() ? peek().kind == Token::End : is(closer))) {
      const Token& t = peek();
      if (is("if")) {
        ++pos;
        expect("(");
        Expr cond = expr();
        expect(">");
        const Token& zt = peek();
        if (zt.kind != Token::Number) fail(zt, "expected a number after '>'");
        double rhs = std::stod(zt.text);
        ++pos;
        cond.coeffs[p].value -= rhs;
        expect(")");
        expect("{");
        auto then_items = block(true, "}");
        expect("}");
        expect("else");
        expect("{");
        auto else_items = block(true, "}");
        expect("}");
        bool last = closer.empty() ? peek().kind == Token::End : is(closer);
        if (then_items.empty() || else_items.empty()) fail(t, "empty branch");
        items.push_back(Stmt::branch(std::move(cond), Stmt::seq(then_items), Stmt::seq(else_items)));
        if (!(last && tail)) check_no_return(items.back(), t);
      } else if (is("return")) {
        ++pos;
        std::vector<Expr> vals;
        if (is("(") && m > 1) {
          ++pos;
          vals.push_back(expr());
          while (is(",")) {
            ++pos;
            vals.push_back(expr());
          }
          expect(")");
        } else {
          vals.push_back(expr());
        }
        expect(";");
        if (vals.size() != m) fail(t, "return arity does not match output count");
        bool last = closer.empty() ? peek().kind == Token::End : is(closer);
        if (!last) fail(peek(), "statement after return");
        if (!tail) fail(t, "return outside tail position");
        for (std::size_t j = 0; j < m; ++j) {
          auto s = Stmt::assign(j, std::move(vals[j]));
          returns_.insert(s.get());
          items.push_back(s);
        }
      } else if (t.kind == Token::Ident && is_output_name(t.text)) {
        ++pos;
        std::size_t o = std::stoul(t.text.substr(1));
        if (o >= m) fail(t, "output index beyond declared count");
        expect("=");
        Expr e = expr();
        expect(";");
        items.push_back(Stmt::assign(o, std::move(e)));
      } else {
        fail(t, "expected a statement");
      }
    }
    return items;
  }

  // Branch bodies are parsed before we know whether the if is in tail
  // position; returns found inside a non-tail if are rejected here.
  void check_no_return(const StmtPtr& s, const Token& at) {
    if (s->kind == Stmt::Kind::Assign) {
      if (returns_.count(s.get())) fail(at, "return inside a non-final if");
      return;
    }
    check_no_return(s->first, at);
    check_no_return(s->second, at);
  }

  std::set<const Stmt*> returns_;
};

}  // namespace

std::string emit_code(const ImpProgram& prog, const std::vector<std::string>& names) {
  prog.validate();
  if (names.size() != prog.p) throw UsageError("emit_code needs one name per feature");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!is_ident(n) || kKeywords.count(n) || is_output_name(n))
      throw UsageError("invalid feature name '" + n + "'");
    if (!seen.insert(n).second) throw UsageError("duplicate feature name '" + n + "'");
  }
  Emitter em{prog, names, {}};
  bool header = prog.p > 0 || prog.m > 1;
  if (header) {
    std::string h = prog.m > 1 ? "double[" + std::to_string(prog.m) + "] decide(" : "double decide(";
    for (std::size_t i = 0; i < names.size(); ++i) h += (i ? ", double " : "double ") + names[i];
    em.line(0, h + ") {");
  }
  em.block(prog.body, header ? 1 : 0, true);
  if (header) em.line(0, "}");
  return em.out;
}

ImpProgram parse_program(std::string_view text) {
  Parser ps;
  ps.toks = lex(text);
  bool header = ps.is("double");
  if (header)
    ps.header();
  else
    ps.infer_signature();
  if (header) ps.expect("{");
  auto items = ps.block(true, header ? "}" : "");
  if (header) {
    ps.expect("}");
    if (ps.peek().kind != Token::End) ps.fail(ps.peek(), "trailing input after function");
  }
  if (items.empty()) ps.fail(ps.peek(), "empty program");
  return ImpProgram{ps.p, ps.m, Stmt::seq(items)};
}

}  // namespace pbr
