#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowrank/algebra.hpp"

namespace flowrank {

class PipelineExpr;

struct ExprLeaf {
  std::string name;
  std::vector<std::pair<std::string, AttrValue>> kwargs;
  std::size_t line = 0;
  std::size_t column = 0;
};

struct ExprThen {
  std::vector<PipelineExpr> children;
};

struct ExprLinear {
  std::vector<PipelineExpr> children;
  std::vector<double> weights;
};

struct ExprRrf {
  std::vector<PipelineExpr> children;
  double k = 60.0;
};

// Syntax tree of a pipeline expression:
//
//   pipeline := seq
//   seq      := sum ( ">>" sum )*
//   sum      := term ( "+" term )*
//   term     := ( NUMBER "*" )? atom
//   atom     := "rrf" "(" pipeline ( "," pipeline )+ ( "," "k" "=" NUMBER )? ")"
//             | IDENT ( "(" kwargs? ")" )?
//             | "(" pipeline ")"
//   kwargs   := IDENT "=" value ( "," IDENT "=" value )*
//
// `+` binds tighter than `>>`; a bare term in a sum has weight 1.0.
class PipelineExpr {
 public:
  using Variant = std::variant<ExprLeaf, ExprThen, ExprLinear, ExprRrf>;

  PipelineExpr(Variant v) : v_(std::move(v)) {}  // NOLINT
  PipelineExpr(ExprLeaf v) : v_(std::move(v)) {}  // NOLINT
  PipelineExpr(ExprThen v) : v_(std::move(v)) {}  // NOLINT
  PipelineExpr(ExprLinear v) : v_(std::move(v)) {}  // NOLINT
  PipelineExpr(ExprRrf v) : v_(std::move(v)) {}  // NOLINT
  const Variant& variant() const noexcept { return v_; }

  // Structural equality; source positions are ignored.
  friend bool operator==(const PipelineExpr& a, const PipelineExpr& b);

 private:
  Variant v_;
};

// Throws ParseError with line:column and the set of expected tokens.
PipelineExpr parse(std::string_view src);

struct ParamSpec {
  std::string name;
  // Also fixes the type: int64, double (ints accepted) or string.
  AttrValue default_value;
};

struct TransformerFactory {
  std::vector<ParamSpec> params;
  // Receives every parameter, defaults filled in.
  std::function<TransformerPtr(const std::map<std::string, AttrValue>& args)> build;
};

class Registry {
 public:
  void add(std::string name, TransformerFactory factory);
  const TransformerFactory* find(std::string_view name) const;
  std::vector<std::string> names() const;

  // Type-checks kwargs and builds the transformer. Throws UnknownTransformer or BadArgument.
  TransformerPtr make(const std::string& name,
                      const std::vector<std::pair<std::string, AttrValue>>& kwargs) const;

 private:
  std::vector<std::pair<std::string, TransformerFactory>> entries_;
};

// bm25, wbm25, sdm, text_loader, rescore and answer bound to one index.
Registry builtin_registry(const IndexHandle& index);

PipelineNode elaborate(const PipelineExpr& expr, const Registry& registry);
inline PipelineNode compile(std::string_view src, const Registry& registry) {
  return elaborate(parse(src), registry);
}

// Canonical expression text; compile(render(n)) is structurally equal to n.
std::string render(const PipelineNode& node);

// Shortest round-trip decimal that always reads back as a float ("60.0").
std::string format_number(double v);

}  // namespace flowrank
