#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flowrank/inspect.hpp"

namespace flowrank {

// Frame flowing along one edge of the diagram.
struct FrameBadge {
  FrameKind kind;
  ColumnSet columns;

  std::string label() const { return kind.abbreviation(); }
};

struct SchematicBox {
  NodePath path;
  std::string title;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string tooltip;
};

struct SchematicStep;

struct SchematicLane {
  std::vector<SchematicStep> steps;
};

// Parallel lanes joined by a fusion operator. Every lane starts from the
// badge preceding the fork.
struct SchematicFork {
  NodePath path;
  std::string label;  // "rrf" or "linear"
  std::string tooltip;
  std::vector<SchematicLane> lanes;
};

struct SchematicStep {
  std::variant<SchematicBox, SchematicFork> stage;
  FrameBadge after;
};

struct SchematicGraph {
  FrameBadge input;
  std::vector<SchematicStep> steps;
};

// Throws ValidationError when the pipeline does not accept `given`.
SchematicGraph build_schematic(const PipelineNode& node, const ColumnSet& given);

// Self-contained HTML (inline styles, hover tooltips through `title`).
std::string render_html(const SchematicGraph& g);

// ASCII diagram: `--Q--> [bm25] --R-->`, forks as stacked lanes ending in `}=rrf=>`.
std::string render_text(const SchematicGraph& g);

}  // namespace flowrank
