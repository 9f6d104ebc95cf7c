#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pbr/imp.hpp"
#include "test_util.hpp"

using namespace pbr;
using pbr::testing::max_abs_diff;
using pbr::testing::random_point;
using pbr::testing::random_program;
using pbr::testing::random_tree;

TEST_CASE("const program emits a bare return") {
  ImpProgram prog = linear_program(0, 1, {5.0});
  CHECK(emit_code(prog, {}) == "return 5;\n");
  CHECK(eval_program(prog, {}) == Vec{5.0});
}

TEST_CASE("linear program uses feature names") {
  ImpProgram prog = linear_program(2, 1, {0.5, -1.0, 2.0});
  CHECK(emit_code(prog, {"selection", "lines"}) ==
        "double decide(double selection, double lines) {\n  return 0.5 * selection - lines + 2;\n}\n");
  CHECK(eval_program(prog, {2.0, 3.0}) == Vec{0.0});
}

TEST_CASE("multi-output return") {
  ImpProgram prog = linear_program(1, 2, {1.0, 0.0, 0.0, -2.5});
  std::string code = emit_code(prog, {"x"});
  CHECK(code == "double[2] decide(double x) {\n  return (x, -2.5);\n}\n");
  CHECK(emit_code(parse_program(code), {"x"}) == code);
}

TEST_CASE("zero coefficients are elided and an empty expression prints 0") {
  ImpProgram prog = linear_program(2, 1, {0.0, 1e-12, 0.0});
  CHECK(emit_code(prog, {"a", "b"}) == "double decide(double a, double b) {\n  return 0;\n}\n");
}

TEST_CASE("parse handwritten program") {
  const char* src =
      "double decide(double a, double b) {\n"
      "  // pick a branch\n"
      "  o0 = 1;\n"
      "  if (a - 2 * b > 0) {\n"
      "    o0 = 3 * a + 1;\n"
      "  } else {\n"
      "    o0 = -b;\n"
      "  }\n"
      "}\n";
  ImpProgram prog = parse_program(src);
  CHECK(prog.p == 2);
  CHECK(prog.m == 1);
  CHECK(eval_program(prog, {3.0, 1.0}) == Vec{10.0});
  CHECK(eval_program(prog, {0.0, 1.0}) == Vec{-1.0});
  CHECK(program_height(prog) == 1);
}

TEST_CASE("header-less program infers the signature") {
  ImpProgram prog = parse_program("if (x1 > 0) { return 2; } else { return x0; }\n");
  CHECK(prog.p == 2);
  CHECK(prog.m == 1);
  CHECK(eval_program(prog, {7.0, 1.0}) == Vec{2.0});
  CHECK(eval_program(prog, {7.0, -1.0}) == Vec{7.0});
}

TEST_CASE("holes parse and block evaluation") {
  ImpProgram prog = parse_program("return ?? * x0 + 1;\n");
  CHECK(prog.body->expr.has_hole());
  CHECK_THROWS_AS(eval_program(prog, {1.0}), HoleError);
  CHECK(emit_code(prog, {"x0"}) == "double decide(double x0) {\n  return ?? * x0 + 1;\n}\n");
}

TEST_CASE("syntax errors carry a position") {
  try {
    parse_program("double decide(double a) {\n  return a +;\n}\n");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.line == 2);
    CHECK(e.col >= 12);
  }
  CHECK_THROWS_AS(parse_program("return 1"), SyntaxError);
  CHECK_THROWS_AS(parse_program("if (x0 > 1e) { return 1; } else { return 2; }"), SyntaxError);
  CHECK_THROWS_AS(parse_program("double decide(double a) {\n  o3 = a;\n}\n"), SyntaxError);
  CHECK_THROWS_AS(parse_program("return @;"), SyntaxError);
}

TEST_CASE("validate rejects bad output indices") {
  ImpProgram prog{1, 1, Stmt::assign(1, Expr::constant(1, 0.0))};
  CHECK_THROWS_AS(prog.validate(), UsageError);
}

TEST_CASE("height is additive over sequences") {
  auto leaf = Stmt::assign(0, Expr::constant(1, 1.0));
  auto cond = Expr::from_values({1.0, 0.0});
  auto one = Stmt::branch(cond, leaf, leaf);
  ImpProgram prog{1, 1, Stmt::seq(one, one)};
  CHECK(program_height(prog) == 2);
  ImpProgram nested{1, 1, Stmt::branch(cond, one, leaf)};
  CHECK(program_height(nested) == 2);
}

TEST_CASE("expand preserves semantics and execution traces") {
  RngStream rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t p = 1 + rng.index(3), m = 1 + rng.index(2);
    ImpProgram prog = random_program(p, m, 4, rng);
    ImpProgram ex{p, m, expand(prog.body)};
    for (int i = 0; i < 50; ++i) {
      Vec x = random_point(p, rng);
      std::vector<const Stmt*> t1, t2;
      CHECK(eval_program(prog, x, &t1) == eval_program(ex, x, &t2));
      CHECK(t1 == t2);
    }
  }
}

TEST_CASE("program to tree and back preserve semantics") {
  RngStream rng(2024);
  int converted = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t p = 1 + rng.index(3), m = 1 + rng.index(2);
    ImpProgram prog = random_program(p, m, 3, rng);
    if (program_height(prog) > 8) continue;
    DecisionTree t = program_to_tree(prog);
    ImpProgram back = tree_to_program(t);
    for (int i = 0; i < 100; ++i) {
      Vec x = random_point(p, rng);
      Vec want = eval_program(prog, x);
      CHECK(max_abs_diff(eval_tree(t, x), want) <= 1e-9);
      CHECK(max_abs_diff(eval_program(back, x), want) <= 1e-9);
    }
    ++converted;
  }
  CHECK(converted >= 50);
}

TEST_CASE("tree to program visits each node once") {
  RngStream rng(5);
  DecisionTree t = random_tree(3, 2, 1, rng);
  std::size_t visits = 0;
  ImpProgram prog = tree_to_program(t, &visits);
  CHECK(visits == t.internal_count() + t.leaf_count());
  CHECK(program_height(prog) == 3);
  for (int i = 0; i < 100; ++i) {
    Vec x = random_point(2, rng);
    CHECK(max_abs_diff(eval_program(prog, x), eval_tree(t, x)) <= 1e-12);
  }
}

TEST_CASE("program_to_tree enforces the height limit") {
  auto leaf = Stmt::assign(0, Expr::constant(1, 1.0));
  auto one = Stmt::branch(Expr::from_values({1.0, 0.0}), leaf, leaf);
  std::vector<StmtPtr> items(5, one);
  ImpProgram prog{1, 1, Stmt::seq(items)};
  CHECK_THROWS_AS(program_to_tree(prog, 4), UsageError);
  CHECK(program_to_tree(prog, 5).h == 5);
}

TEST_CASE("emit is a fixpoint under parse") {
  RngStream rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t p = rng.index(4), m = 1 + rng.index(2);
    DecisionTree t = random_tree(1 + rng.index(3), p, m, rng);
    auto names = default_names(p);
    std::string code = emit_code(tree_to_program(t), names);
    ImpProgram parsed = parse_program(code);
    CHECK(emit_code(parsed, names) == code);
  }
}

TEST_CASE("emit rejects unusable names") {
  ImpProgram prog = linear_program(1, 1, {1.0, 0.0});
  CHECK_THROWS_AS(emit_code(prog, {"if"}), UsageError);
  CHECK_THROWS_AS(emit_code(prog, {"o0"}), UsageError);
  CHECK_THROWS_AS(emit_code(prog, {"2x"}), UsageError);
  CHECK_THROWS_AS(emit_code(prog, {}), UsageError);
}
