#pragma once

#include <variant>
#include <vector>

#include "flowrank/transformers.hpp"

namespace flowrank {

class PipelineNode;

struct LeafNode {
  TransformerPtr transformer;
};

// Children run left to right, each on the previous child's output.
struct ThenNode {
  std::vector<PipelineNode> children;
};

// Weighted sum of child scores over the union of retrieved (qid, docno) pairs.
struct LinearNode {
  std::vector<PipelineNode> children;
  std::vector<double> weights;
};

// Reciprocal rank fusion: sum of 1 / (k + rank) with 1-based ranks.
struct RrfNode {
  std::vector<PipelineNode> children;
  double k = 60.0;
};

class PipelineNode {
 public:
  using Variant = std::variant<LeafNode, ThenNode, LinearNode, RrfNode>;

  PipelineNode(TransformerPtr t);  // NOLINT: leaves convert implicitly

  const Variant& variant() const noexcept { return v_; }
  bool is_leaf() const noexcept { return std::holds_alternative<LeafNode>(v_); }
  const Transformer& leaf() const { return *std::get<LeafNode>(v_).transformer; }
  const std::vector<PipelineNode>& children() const;

  // Display name: transformer name, "then", "linear" or "rrf".
  std::string name() const;

  // Structural equality: same shape, weights, k and leaf name + attributes.
  friend bool operator==(const PipelineNode& a, const PipelineNode& b);

 private:
  explicit PipelineNode(Variant v) : v_(std::move(v)) {}

  friend PipelineNode then(PipelineNode a, PipelineNode b);
  friend PipelineNode then(std::vector<PipelineNode> stages);
  friend PipelineNode linear(std::vector<PipelineNode> children, std::vector<double> weights);
  friend PipelineNode rr_fusion(std::vector<PipelineNode> children, double k);

  Variant v_;
};

// Sequential composition; nested sequences are flattened.
PipelineNode then(PipelineNode a, PipelineNode b);
PipelineNode then(std::vector<PipelineNode> stages);
PipelineNode linear(std::vector<PipelineNode> children, std::vector<double> weights);
PipelineNode rr_fusion(std::vector<PipelineNode> children, double k = 60.0);

inline PipelineNode operator>>(PipelineNode a, PipelineNode b) {
  return then(std::move(a), std::move(b));
}

// Validates the pipeline against the input columns (ValidationError on
// failure) and evaluates it. Errors raised while running a node carry its path.
Relation execute(const PipelineNode& node, const Relation& input);

// Fusion kernels on already computed child outputs; exposed for testing.
Relation fuse_linear(const std::vector<Relation>& runs, const std::vector<double>& weights);
Relation fuse_rrf(const std::vector<Relation>& runs, double k);

}  // namespace flowrank
