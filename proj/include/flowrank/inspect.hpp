#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "flowrank/algebra.hpp"

namespace flowrank {

struct ValidationDiagnostic {
  bool ok = true;
  NodePath failing_path;
  std::string node_name;
  ColumnSet missing;
  ColumnSet available;
  // `invalid pipeline at <path>: <node> requires {..} but only {..} available`
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationDiagnostic d) : Error(d.message), diag_(std::move(d)) {}
  const ValidationDiagnostic& diagnostic() const noexcept { return diag_; }

 private:
  ValidationDiagnostic diag_;
};

class NotSatisfied : public Error {
 public:
  explicit NotSatisfied(ValidationDiagnostic d) : Error(d.message), diag_(std::move(d)) {}
  const ValidationDiagnostic& diagnostic() const noexcept { return diag_; }

 private:
  ValidationDiagnostic diag_;
};

struct IoReport {
  std::vector<ColumnSet> accepted_inputs;
  std::vector<std::pair<ColumnSet, ColumnSet>> outputs_for;
};

// Minimal column sets the pipeline accepts. Throws Uninspectable when a leaf
// has no declared spec.
std::vector<ColumnSet> input_columns(const PipelineNode& node);

// Columns produced for `given`; throws NotSatisfied when the pipeline rejects it.
ColumnSet output_columns(const PipelineNode& node, const ColumnSet& given);

IoReport io_report(const PipelineNode& node);

// Propagates `given` through the tree without running any transformer and
// reports the first stage (preorder) whose requirements are not met.
ValidationDiagnostic validate(const PipelineNode& node, const ColumnSet& given);

// Leaves in preorder with their tree paths.
std::vector<std::pair<NodePath, TransformerPtr>> subtransformers(const PipelineNode& node);

std::vector<std::pair<std::string, std::string>> attributes(const Transformer& t);

// Column names in display order: qid, query, docno, text, rank, score,
// qanswer, query_vec, then the rest alphabetically.
std::vector<std::string> display_order(const ColumnSet& cols);

}  // namespace flowrank
