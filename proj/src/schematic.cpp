#include "flowrank/schematic.hpp"

#include <algorithm>

namespace flowrank {

namespace {

std::string join(const std::vector<std::string>& xs, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + xs[i];
  return out;
}

FrameBadge badge(const ColumnSet& cols) { return {classify_frame(cols), cols}; }

std::string column_list(const ColumnSet& cols) { return join(display_order(cols), ", "); }

ColumnSet build_steps(const PipelineNode& node, const ColumnSet& given, NodePath& path,
                      std::vector<SchematicStep>& steps) {
  if (node.is_leaf()) {
    const auto& t = node.leaf();
    ColumnSet out = output_columns(node, given);
    SchematicBox box;
    box.path = path;
    box.title = t.name();
    box.attributes = attributes(t);
    std::vector<std::string> tip{t.name(), t.description()};
    for (const auto& [k, v] : box.attributes) tip.push_back(k + " = " + v);
    tip.push_back("input: " + column_list(given));
    tip.push_back("output: " + column_list(out));
    box.tooltip = join(tip, "\n");
    steps.push_back({std::move(box), badge(out)});
    return out;
  }
  if (std::holds_alternative<ThenNode>(node.variant())) {
    ColumnSet cur = given;
    const auto& kids = node.children();
    for (std::size_t i = 0; i < kids.size(); ++i) {
      path.push_back(i);
      cur = build_steps(kids[i], cur, path, steps);
      path.pop_back();
    }
    return cur;
  }

  SchematicFork fork;
  fork.path = path;
  fork.label = node.name();
  if (auto* l = std::get_if<LinearNode>(&node.variant())) {
    std::vector<std::string> ws;
    for (double w : l->weights) ws.push_back(format_fixed6(w));
    fork.tooltip = "linear score combination\nweights = " + join(ws, ", ");
  } else {
    fork.tooltip = "reciprocal rank fusion\nk = " + format_fixed6(std::get<RrfNode>(node.variant()).k);
  }
  const auto& kids = node.children();
  for (std::size_t i = 0; i < kids.size(); ++i) {
    SchematicLane lane;
    path.push_back(i);
    build_steps(kids[i], given, path, lane.steps);
    path.pop_back();
    fork.lanes.push_back(std::move(lane));
  }
  ColumnSet out = output_columns(node, given);
  fork.tooltip += "\noutput: " + column_list(out);
  steps.push_back({std::move(fork), badge(out)});
  return out;
}

// ---------------------------------------------------------------------------
// HTML

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      case '\n': out += "&#10;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string html_id(const NodePath& path) {
  std::string id = "fr-root";
  for (auto p : path) id += "-" + std::to_string(p);
  return id;
}

constexpr const char* kArrowStyle = "color:#8a8f98;margin:0 2px";
constexpr const char* kBadgeStyle =
    "display:inline-block;min-width:18px;padding:1px 5px;border-radius:9px;background:#f2e8c9;"
    "border:1px solid #c9b57a;color:#5c4b12;font-size:11px;text-align:center;cursor:help";
constexpr const char* kBoxStyle =
    "display:inline-block;padding:5px 10px;border:1px solid #3d6fb6;border-radius:4px;"
    "background:#eaf1fb;color:#1d3557;cursor:help;white-space:nowrap";
constexpr const char* kFusionStyle =
    "display:inline-block;padding:5px 10px;border:1px solid #7a4fb0;border-radius:14px;"
    "background:#f1eafa;color:#3f2166;cursor:help";
constexpr const char* kRowStyle = "display:flex;flex-direction:row;align-items:center";
constexpr const char* kLanesStyle =
    "display:flex;flex-direction:column;gap:6px;padding:4px 8px;border-left:2px solid #c6b3e0;"
    "border-right:2px solid #c6b3e0";

class HtmlWriter {
 public:
  std::string out;

  void edge(const FrameBadge& b, int depth) {
    line(depth, "<span style=\"" + std::string(kArrowStyle) + "\">&#8594;</span>");
    line(depth, "<span class=\"fr-badge\" data-frame=\"" + b.label() + "\" title=\"" +
                    escape(column_list(b.columns)) + "\" style=\"" + kBadgeStyle + "\">" +
                    b.label() + "</span>");
    line(depth, "<span style=\"" + std::string(kArrowStyle) + "\">&#8594;</span>");
  }

  void steps(const std::vector<SchematicStep>& steps, int depth) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& s = steps[i];
      if (const auto* box = std::get_if<SchematicBox>(&s.stage)) {
        line(depth, "<div class=\"fr-box\" id=\"" + html_id(box->path) + "\" data-path=\"" +
                        dotted_path(box->path) + "\" title=\"" + escape(box->tooltip) +
                        "\" style=\"" + kBoxStyle + "\">" + escape(box->title) + "</div>");
      } else {
        fork(std::get<SchematicFork>(s.stage), depth);
      }
      edge(s.after, depth);
    }
  }

  void fork(const SchematicFork& f, int depth) {
    line(depth, "<div class=\"fr-fork\" style=\"" + std::string(kRowStyle) + "\">");
    line(depth + 1, "<div class=\"fr-lanes\" style=\"" + std::string(kLanesStyle) + "\">");
    for (const auto& lane : f.lanes) {
      line(depth + 2, "<div class=\"fr-lane\" style=\"" + std::string(kRowStyle) + "\">");
      steps(lane.steps, depth + 3);
      line(depth + 2, "</div>");
    }
    line(depth + 1, "</div>");
    line(depth + 1, "<div class=\"fr-fusion\" id=\"" + html_id(f.path) + "-fusion\" data-fusion=\"" +
                        f.label + "\" title=\"" + escape(f.tooltip) + "\" style=\"" + kFusionStyle +
                        "\">" + escape(f.label) + "</div>");
    line(depth, "</div>");
  }

  void line(int depth, const std::string& s) {
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
    out += s;
    out += '\n';
  }
};

// ---------------------------------------------------------------------------
// Text

std::string edge_text(const FrameBadge& b) { return "--" + b.label() + "-->"; }

void text_steps(const std::vector<SchematicStep>& steps, std::vector<std::string>& lines) {
  for (const auto& s : steps) {
    if (const auto* box = std::get_if<SchematicBox>(&s.stage)) {
      lines.back() += " [" + box->title + "] " + edge_text(s.after);
      continue;
    }
    const auto& f = std::get<SchematicFork>(s.stage);
    std::vector<std::string> block;
    for (const auto& lane : f.lanes) {
      std::vector<std::string> lane_lines{""};
      text_steps(lane.steps, lane_lines);
      block.insert(block.end(), lane_lines.begin(), lane_lines.end());
    }
    std::size_t width = 0;
    for (const auto& l : block) width = std::max(width, l.size());
    for (std::size_t i = 0; i < block.size(); ++i) {
      block[i].resize(width, ' ');
      block[i] += (i + 1 == block.size()) ? " }=" + f.label + "=> " + edge_text(s.after) : " }";
    }
    const std::string indent(lines.back().size(), ' ');
    lines.back() += block.front();
    for (std::size_t i = 1; i < block.size(); ++i) lines.push_back(indent + block[i]);
  }
}

}  // namespace

SchematicGraph build_schematic(const PipelineNode& node, const ColumnSet& given) {
  auto diag = validate(node, given);
  if (!diag.ok) throw ValidationError(std::move(diag));
  SchematicGraph g;
  g.input = badge(given);
  NodePath path;
  build_steps(node, given, path, g.steps);
  return g;
}

std::string render_html(const SchematicGraph& g) {
  HtmlWriter w;
  w.line(0, "<div class=\"fr-schematic\" data-schematic-version=\"1\" style=\"" +
                std::string(kRowStyle) +
                ";flex-wrap:nowrap;font-family:Menlo,Consolas,monospace;font-size:12px;"
                "padding:8px;overflow-x:auto\">");
  w.line(1, "<span class=\"fr-badge\" data-frame=\"" + g.input.label() + "\" title=\"" +
                escape(column_list(g.input.columns)) + "\" style=\"" + kBadgeStyle + "\">" +
                g.input.label() + "</span>");
  w.line(1, "<span style=\"" + std::string(kArrowStyle) + "\">&#8594;</span>");
  w.steps(g.steps, 1);
  w.line(0, "</div>");
  return w.out;
}

std::string render_text(const SchematicGraph& g) {
  std::vector<std::string> lines{edge_text(g.input)};
  text_steps(g.steps, lines);
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace flowrank
