#include "flowrank/inspect.hpp"

#include <algorithm>

namespace flowrank {

namespace {

const ColumnSet kFusionNeeds{"docno", "qid", "score"};

ValidationDiagnostic failure(const NodePath& path, std::string name, const ColumnSet& required,
                             const ColumnSet& available) {
  ValidationDiagnostic d;
  d.ok = false;
  d.failing_path = path;
  d.node_name = std::move(name);
  d.available = available;
  std::set_difference(required.begin(), required.end(), available.begin(), available.end(),
                      std::inserter(d.missing, d.missing.end()));
  d.message = "invalid pipeline at " + format_path(path) + ": " + d.node_name + " requires " +
              format_columns(required) + " but only " + format_columns(available) + " available";
  return d;
}

class Propagator {
 public:
  std::optional<ColumnSet> run(const PipelineNode& node, const ColumnSet& given) {
    return std::visit([&](const auto& n) { return visit(n, node, given); }, node.variant());
  }

  ValidationDiagnostic diag;

 private:
  std::optional<ColumnSet> visit(const LeafNode& n, const PipelineNode&, const ColumnSet& given) {
    const auto& t = *n.transformer;
    if (!t.spec()) {
      diag = failure(path_, t.name(), {}, given);
      diag.message = "invalid pipeline at " + format_path(path_) + ": " + t.name() +
                     " has no declared column spec";
      return std::nullopt;
    }
    if (auto out = t.spec()->outputs_for(given)) return out;
    // Report the accepted set with the fewest missing columns.
    const ColumnSet* best = nullptr;
    std::size_t best_missing = 0;
    for (const auto& acc : t.spec()->accepted_inputs) {
      std::size_t missing = 0;
      for (const auto& c : acc) missing += given.count(c) ? 0 : 1;
      if (!best || missing < best_missing) {
        best = &acc;
        best_missing = missing;
      }
    }
    diag = failure(path_, t.name(), *best, given);
    return std::nullopt;
  }

  std::optional<ColumnSet> visit(const ThenNode& n, const PipelineNode&, const ColumnSet& given) {
    ColumnSet cur = given;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      path_.push_back(i);
      auto next = run(n.children[i], cur);
      path_.pop_back();
      if (!next) return std::nullopt;
      cur = std::move(*next);
    }
    return cur;
  }

  std::optional<ColumnSet> fusion(const std::vector<PipelineNode>& children,
                                  const PipelineNode& node, const ColumnSet& given) {
    std::vector<ColumnSet> outs;
    for (std::size_t i = 0; i < children.size(); ++i) {
      path_.push_back(i);
      auto out = run(children[i], given);
      path_.pop_back();
      if (!out) return std::nullopt;
      outs.push_back(std::move(*out));
    }
    bool all_query = true;
    for (const auto& out : outs) {
      if (!std::includes(out.begin(), out.end(), kFusionNeeds.begin(), kFusionNeeds.end())) {
        diag = failure(path_, node.name(), kFusionNeeds, out);
        return std::nullopt;
      }
      all_query = all_query && out.count("query");
    }
    ColumnSet result{"docno", "qid", "rank", "score"};
    if (all_query) result.insert("query");
    return result;
  }

  std::optional<ColumnSet> visit(const LinearNode& n, const PipelineNode& node,
                                 const ColumnSet& given) {
    return fusion(n.children, node, given);
  }
  std::optional<ColumnSet> visit(const RrfNode& n, const PipelineNode& node,
                                 const ColumnSet& given) {
    return fusion(n.children, node, given);
  }

  NodePath path_;
};

void require_specs(const PipelineNode& node) {
  for (const auto& [path, t] : subtransformers(node))
    if (!t->spec())
      throw Uninspectable("transformer " + t->name() + " at " + format_path(path) +
                          " has no declared column spec");
}

bool is_strict_superset(const ColumnSet& a, const ColumnSet& b) {
  return a.size() > b.size() && std::includes(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<ColumnSet> candidates(const PipelineNode& node) {
  if (node.is_leaf()) return node.leaf().spec()->accepted_inputs;
  const auto& kids = node.children();
  if (std::holds_alternative<ThenNode>(node.variant())) return candidates(kids.front());
  // Fusion: every combination of one accepted set per child.
  std::vector<ColumnSet> acc{ColumnSet{}};
  for (const auto& child : kids) {
    std::vector<ColumnSet> next;
    for (const auto& partial : acc)
      for (const auto& s : candidates(child)) {
        ColumnSet u = partial;
        u.insert(s.begin(), s.end());
        next.push_back(std::move(u));
      }
    acc = std::move(next);
  }
  return acc;
}

}  // namespace

ValidationDiagnostic validate(const PipelineNode& node, const ColumnSet& given) {
  Propagator p;
  if (p.run(node, given)) return ValidationDiagnostic{};
  return p.diag;
}

ColumnSet output_columns(const PipelineNode& node, const ColumnSet& given) {
  Propagator p;
  if (auto out = p.run(node, given)) return *out;
  throw NotSatisfied(std::move(p.diag));
}

std::vector<ColumnSet> input_columns(const PipelineNode& node) {
  require_specs(node);
  std::vector<ColumnSet> ok;
  for (auto& c : candidates(node)) {
    if (std::find(ok.begin(), ok.end(), c) != ok.end()) continue;
    if (validate(node, c).ok) ok.push_back(std::move(c));
  }
  std::vector<ColumnSet> minimal;
  for (const auto& c : ok)
    if (std::none_of(ok.begin(), ok.end(), [&](const ColumnSet& o) { return is_strict_superset(c, o); }))
      minimal.push_back(c);
  return minimal;
}

IoReport io_report(const PipelineNode& node) {
  IoReport r;
  r.accepted_inputs = input_columns(node);
  for (const auto& acc : r.accepted_inputs) r.outputs_for.emplace_back(acc, output_columns(node, acc));
  return r;
}

std::vector<std::pair<NodePath, TransformerPtr>> subtransformers(const PipelineNode& node) {
  std::vector<std::pair<NodePath, TransformerPtr>> out;
  NodePath path;
  auto walk = [&](auto&& self, const PipelineNode& n) -> void {
    if (auto* leaf = std::get_if<LeafNode>(&n.variant())) {
      out.emplace_back(path, leaf->transformer);
      return;
    }
    const auto& kids = n.children();
    for (std::size_t i = 0; i < kids.size(); ++i) {
      path.push_back(i);
      self(self, kids[i]);
      path.pop_back();
    }
  };
  walk(walk, node);
  return out;
}

std::vector<std::pair<std::string, std::string>> attributes(const Transformer& t) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& a : t.attributes()) out.emplace_back(a.name, render_attr(a.value));
  return out;
}

std::vector<std::string> display_order(const ColumnSet& cols) {
  static const std::vector<std::string> known{"qid",  "query", "docno",   "text",
                                              "rank", "score", "qanswer", "query_vec"};
  std::vector<std::string> out;
  for (const auto& k : known)
    if (cols.count(k)) out.push_back(k);
  for (const auto& c : cols)
    if (std::find(known.begin(), known.end(), c) == known.end()) out.push_back(c);
  return out;
}

}  // namespace flowrank
