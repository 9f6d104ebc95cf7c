#include "pbr/imp.hpp"

#include <algorithm>
#include <functional>

namespace pbr {

Expr Expr::from_values(const Vec& v) {
  Expr e;
  e.coeffs.reserve(v.size());
  for (double c : v) e.coeffs.push_back({c, false});
  return e;
}

Expr Expr::constant(std::size_t p, double c) {
  Vec v(p + 1, 0.0);
  v[p] = c;
  return from_values(v);
}

bool Expr::has_hole() const {
  for (const auto& c : coeffs)
    if (c.hole) return true;
  return false;
}

double Expr::eval(const Vec& xa) const {
  double s = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (coeffs[i].hole) throw HoleError();
    s += coeffs[i].value * xa[i];
  }
  return s;
}

Vec Expr::values() const {
  if (has_hole()) throw HoleError();
  Vec v;
  v.reserve(coeffs.size());
  for (const auto& c : coeffs) v.push_back(c.value);
  return v;
}

StmtPtr Stmt::assign(std::size_t out, Expr e) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::Assign;
  s->out = out;
  s->expr = std::move(e);
  return s;
}

StmtPtr Stmt::branch(Expr cond, StmtPtr then_s, StmtPtr else_s) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::If;
  s->expr = std::move(cond);
  s->first = std::move(then_s);
  s->second = std::move(else_s);
  return s;
}

StmtPtr Stmt::seq(StmtPtr a, StmtPtr b) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::Seq;
  s->first = std::move(a);
  s->second = std::move(b);
  return s;
}

StmtPtr Stmt::seq(const std::vector<StmtPtr>& items) {
  if (items.empty()) throw UsageError("empty statement list");
  StmtPtr acc = items.back();
  for (std::size_t i = items.size() - 1; i-- > 0;) acc = seq(items[i], acc);
  return acc;
}

void ImpProgram::validate() const {
  if (m == 0) throw UsageError("program needs m >= 1");
  if (!body) throw UsageError("program has no body");
  std::function<void(const Stmt&)> check = [&](const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Assign:
        if (s.out >= m) throw UsageError("assignment to output index beyond m");
        if (s.expr.coeffs.size() != p + 1) throw UsageError("expression length is not p+1");
        break;
      case Stmt::Kind::If:
        if (s.expr.coeffs.size() != p + 1) throw UsageError("condition length is not p+1");
        check(*s.first);
        check(*s.second);
        break;
      case Stmt::Kind::Seq:
        check(*s.first);
        check(*s.second);
        break;
    }
  };
  check(*body);
}

bool stmt_equal(const StmtPtr& a, const StmtPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case Stmt::Kind::Assign:
      return a->out == b->out && a->expr == b->expr;
    case Stmt::Kind::If:
      return a->expr == b->expr && stmt_equal(a->first, b->first) &&
             stmt_equal(a->second, b->second);
    case Stmt::Kind::Seq:
      return stmt_equal(a->first, b->first) && stmt_equal(a->second, b->second);
  }
  return false;
}

namespace {

void exec(const Stmt& s, const Vec& xa, Vec& out, std::vector<const Stmt*>* trace) {
  switch (s.kind) {
    case Stmt::Kind::Assign:
      out[s.out] = s.expr.eval(xa);
      if (trace) trace->push_back(&s);
      break;
    case Stmt::Kind::If:
      exec(s.expr.eval(xa) > 0.0 ? *s.first : *s.second, xa, out, trace);
      break;
    case Stmt::Kind::Seq:
      exec(*s.first, xa, out, trace);
      exec(*s.second, xa, out, trace);
      break;
  }
}

std::size_t height(const Stmt& s) {
  switch (s.kind) {
    case Stmt::Kind::Assign:
      return 0;
    case Stmt::Kind::If:
      return 1 + std::max(height(*s.first), height(*s.second));
    case Stmt::Kind::Seq:
      return height(*s.first) + height(*s.second);
  }
  return 0;
}

}  // namespace

Vec eval_program(const ImpProgram& prog, const Vec& x, std::vector<const Stmt*>* trace) {
  if (x.size() != prog.p) throw UsageError("feature length mismatch");
  Vec out(prog.m, 0.0);
  exec(*prog.body, augment(x), out, trace);
  return out;
}

StmtPtr expand(const StmtPtr& s) {
  switch (s->kind) {
    case Stmt::Kind::Assign:
      return s;
    case Stmt::Kind::If:
      return Stmt::branch(s->expr, expand(s->first), expand(s->second));
    case Stmt::Kind::Seq: {
      const StmtPtr& a = s->first;
      const StmtPtr& b = s->second;
      switch (a->kind) {
        case Stmt::Kind::Assign:
          return Stmt::seq(a, expand(b));
        case Stmt::Kind::If:
          return Stmt::branch(a->expr, expand(Stmt::seq(a->first, b)),
                              expand(Stmt::seq(a->second, b)));
        case Stmt::Kind::Seq:
          return expand(Stmt::seq(a->first, Stmt::seq(a->second, b)));
      }
    }
  }
  return s;
}

std::size_t program_height(const ImpProgram& prog) { return height(*prog.body); }

DecisionTree program_to_tree(const ImpProgram& prog, std::size_t max_height) {
  prog.validate();
  std::size_t h = program_height(prog);
  if (h > max_height)
    throw UsageError("program expands to a tree of height " + std::to_string(h) +
                     ", above the cap of " + std::to_string(max_height));
  StmtPtr norm = expand(prog.body);
  DecisionTree tree = DecisionTree::zeros(h, prog.p, prog.m);
  const std::size_t k = prog.p + 1;

  // Fills every leaf under heap node n (at depth d) with theta.
  auto fill = [&](std::size_t n, std::size_t d, const Vec& theta) {
    std::size_t first = n, count = 1;
    for (; d < h; ++d) {
      first = 2 * first + 1;
      count *= 2;
    }
    for (std::size_t i = 0; i < count; ++i) tree.leaf_theta[first + i - tree.internal_count()] = theta;
  };

  std::function<void(const Stmt*, std::size_t, std::size_t, Vec)> walk =
      [&](const Stmt* s, std::size_t n, std::size_t d, Vec theta) {
        while (true) {
          if (s->kind == Stmt::Kind::Assign) {
            Vec v = s->expr.values();
            std::copy(v.begin(), v.end(), theta.begin() + s->out * k);
            fill(n, d, theta);
            return;
          }
          if (s->kind == Stmt::Kind::Seq) {
            const Stmt* a = s->first.get();
            Vec v = a->expr.values();
            std::copy(v.begin(), v.end(), theta.begin() + a->out * k);
            s = s->second.get();
            continue;
          }
          tree.node_w[n] = s->expr.values();
          walk(s->first.get(), 2 * n + 1, d + 1, theta);
          walk(s->second.get(), 2 * n + 2, d + 1, theta);
          return;
        }
      };
  walk(norm.get(), 0, 0, Vec(prog.m * k, 0.0));
  return tree;
}

ImpProgram tree_to_program(const DecisionTree& tree, std::size_t* visits) {
  tree.validate();
  const std::size_t k = tree.p + 1;
  std::size_t count = 0;
  std::function<StmtPtr(std::size_t, std::size_t)> rec = [&](std::size_t n, std::size_t d) {
    ++count;
    if (d == tree.h) {
      const Vec& th = tree.leaf_theta[n - tree.internal_count()];
      std::vector<StmtPtr> items;
      for (std::size_t j = 0; j < tree.m; ++j)
        items.push_back(Stmt::assign(j, Expr::from_values(Vec(th.begin() + j * k, th.begin() + (j + 1) * k))));
      return Stmt::seq(items);
    }
    return Stmt::branch(Expr::from_values(tree.node_w[n]), rec(2 * n + 1, d + 1), rec(2 * n + 2, d + 1));
  };
  ImpProgram prog{tree.p, tree.m, rec(0, 0)};
  if (visits) *visits = count;
  return prog;
}

ImpProgram linear_program(std::size_t p, std::size_t m, const Vec& w) {
  if (w.size() != m * (p + 1)) throw UsageError("linear weight count mismatch");
  const std::size_t k = p + 1;
  std::vector<StmtPtr> items;
  for (std::size_t j = 0; j < m; ++j)
    items.push_back(Stmt::assign(j, Expr::from_values(Vec(w.begin() + j * k, w.begin() + (j + 1) * k))));
  return ImpProgram{p, m, Stmt::seq(items)};
}

std::vector<std::string> default_names(std::size_t p) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < p; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

}  // namespace pbr
