#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pbr/core.hpp"
#include "pbr/tree.hpp"

namespace pbr {

class HoleError : public std::runtime_error {
 public:
  HoleError() : std::runtime_error("unfilled hole in program") {}
};

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(std::size_t line, std::size_t col, const std::string& msg);
  std::size_t line;
  std::size_t col;
};

struct Coef {
  double value = 0.0;
  bool hole = false;
  bool operator==(const Coef&) const = default;
};

// Affine form over augmented features; the last coefficient is the constant.
struct Expr {
  std::vector<Coef> coeffs;

  static Expr from_values(const Vec& v);
  static Expr constant(std::size_t p, double c);
  bool has_hole() const;
  double eval(const Vec& xa) const;
  Vec values() const;
  bool operator==(const Expr&) const = default;
};

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct Stmt {
  enum class Kind { Assign, If, Seq };
  Kind kind = Kind::Assign;
  std::size_t out = 0;  // Assign
  Expr expr;            // Assign value or If condition
  StmtPtr first;        // If then-branch or Seq first
  StmtPtr second;       // If else-branch or Seq second

  static StmtPtr assign(std::size_t out, Expr e);
  static StmtPtr branch(Expr cond, StmtPtr then_s, StmtPtr else_s);
  static StmtPtr seq(StmtPtr a, StmtPtr b);
  // Right-nested sequence; a single element is returned as is.
  static StmtPtr seq(const std::vector<StmtPtr>& items);
};

struct ImpProgram {
  std::size_t p = 0;
  std::size_t m = 1;
  StmtPtr body;

  void validate() const;
};

bool stmt_equal(const StmtPtr& a, const StmtPtr& b);

// Executed Assign statements are appended to trace (by identity) when given.
Vec eval_program(const ImpProgram& prog, const Vec& x, std::vector<const Stmt*>* trace = nullptr);

// Normalizes so that no Seq has an If or Seq as its first element. Assign
// nodes are shared with the input, so execution traces stay comparable.
StmtPtr expand(const StmtPtr& s);

std::size_t program_height(const ImpProgram& prog);
DecisionTree program_to_tree(const ImpProgram& prog, std::size_t max_height = 12);
ImpProgram tree_to_program(const DecisionTree& tree, std::size_t* visits = nullptr);

// Linear/Const models as straight-line programs. W is m x (p+1) row-major.
ImpProgram linear_program(std::size_t p, std::size_t m, const Vec& w);

std::vector<std::string> default_names(std::size_t p);
std::string emit_code(const ImpProgram& prog, const std::vector<std::string>& names);
ImpProgram parse_program(std::string_view text);

}  // namespace pbr
