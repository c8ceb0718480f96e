#include "flowrank/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "flowrank/inspect.hpp"

namespace flowrank {

PipelineNode::PipelineNode(TransformerPtr t) : v_(LeafNode{std::move(t)}) {
  if (!std::get<LeafNode>(v_).transformer) throw InvalidPipeline("null transformer");
}

const std::vector<PipelineNode>& PipelineNode::children() const {
  static const std::vector<PipelineNode> none;
  return std::visit(
      [](const auto& n) -> const std::vector<PipelineNode>& {
        if constexpr (std::is_same_v<std::decay_t<decltype(n)>, LeafNode>) return none;
        else return n.children;
      },
      v_);
}

std::string PipelineNode::name() const {
  struct {
    std::string operator()(const LeafNode& n) const { return n.transformer->name(); }
    std::string operator()(const ThenNode&) const { return "then"; }
    std::string operator()(const LinearNode&) const { return "linear"; }
    std::string operator()(const RrfNode&) const { return "rrf"; }
  } visitor;
  return std::visit(visitor, v_);
}

bool operator==(const PipelineNode& a, const PipelineNode& b) {
  if (a.v_.index() != b.v_.index()) return false;
  if (a.is_leaf())
    return a.leaf().name() == b.leaf().name() && a.leaf().attributes() == b.leaf().attributes();
  if (auto* la = std::get_if<LinearNode>(&a.v_))
    if (la->weights != std::get<LinearNode>(b.v_).weights) return false;
  if (auto* ra = std::get_if<RrfNode>(&a.v_))
    if (ra->k != std::get<RrfNode>(b.v_).k) return false;
  return a.children() == b.children();
}

PipelineNode then(std::vector<PipelineNode> stages) {
  if (stages.size() < 2) throw InvalidPipeline("a sequence needs at least two stages");
  ThenNode node;
  for (auto& s : stages) {
    if (auto* t = std::get_if<ThenNode>(&s.v_)) {
      for (auto& c : t->children) node.children.push_back(std::move(c));
    } else {
      node.children.push_back(std::move(s));
    }
  }
  return PipelineNode(std::move(node));
}

PipelineNode then(PipelineNode a, PipelineNode b) {
  std::vector<PipelineNode> stages;
  stages.push_back(std::move(a));
  stages.push_back(std::move(b));
  return then(std::move(stages));
}

PipelineNode linear(std::vector<PipelineNode> children, std::vector<double> weights) {
  if (children.size() != weights.size())
    throw WeightLengthMismatch(std::to_string(children.size()) + " children but " +
                               std::to_string(weights.size()) + " weights");
  if (children.size() < 2) throw InvalidPipeline("linear combination needs at least two children");
  for (double w : weights)
    if (!std::isfinite(w)) throw InvalidArgument("linear weights must be finite");
  return PipelineNode(LinearNode{std::move(children), std::move(weights)});
}

PipelineNode rr_fusion(std::vector<PipelineNode> children, double k) {
  if (!(k > 0) || !std::isfinite(k)) throw InvalidK("rrf k must be positive, got " + std::to_string(k));
  if (children.size() < 2) throw InvalidPipeline("rrf needs at least two children");
  return PipelineNode(RrfNode{std::move(children), k});
}

// ---------------------------------------------------------------------------

namespace {

using Key = std::pair<std::string, std::string>;  // (qid, docno)

// Sum independent of the order contributions arrive in, so fusion is
// invariant under permuting children.
double ordered_sum(std::vector<double>& parts) {
  std::sort(parts.begin(), parts.end());
  double s = 0;
  for (double p : parts) s += p;
  return s;
}

Relation fused_relation(const std::vector<Relation>& runs, std::map<Key, std::vector<double>> parts) {
  const bool keep_query = std::all_of(runs.begin(), runs.end(),
                                      [](const Relation& r) { return r.schema().contains("query"); });
  std::map<std::string, std::string> queries;
  if (keep_query) {
    // First child carrying a qid decides its query text.
    for (const auto& run : runs) {
      const auto qid = *run.schema().index_of("qid");
      const auto query = *run.schema().index_of("query");
      std::map<std::string, std::string> local;
      for (std::size_t r = 0; r < run.size(); ++r) local.emplace(run.text(r, qid), run.text(r, query));
      for (auto& [q, text] : local) queries.emplace(q, std::move(text));
    }
  }

  std::vector<std::string> names{"qid"};
  if (keep_query) names.push_back("query");
  for (auto n : {"docno", "rank", "score"}) names.push_back(n);

  std::vector<Row> rows;
  rows.reserve(parts.size());
  for (auto& [key, contribs] : parts) {
    Row row{key.first};
    if (keep_query) row.push_back(queries.at(key.first));
    row.push_back(key.second);
    row.push_back(std::int64_t{0});
    row.push_back(ordered_sum(contribs));
    rows.push_back(std::move(row));
  }
  return sort_and_rank(Relation(Schema::of(names), std::move(rows)));
}

}  // namespace

Relation fuse_linear(const std::vector<Relation>& runs, const std::vector<double>& weights) {
  if (runs.size() != weights.size())
    throw WeightLengthMismatch(std::to_string(runs.size()) + " runs but " +
                               std::to_string(weights.size()) + " weights");
  std::map<Key, std::vector<double>> parts;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    const auto qid = run.require("qid", "linear");
    const auto docno = run.require("docno", "linear");
    const auto score = run.require("score", "linear");
    for (std::size_t r = 0; r < run.size(); ++r)
      parts[{run.text(r, qid), run.text(r, docno)}].push_back(weights[i] * run.float64(r, score));
  }
  return fused_relation(runs, std::move(parts));
}

Relation fuse_rrf(const std::vector<Relation>& runs, double k) {
  if (!(k > 0) || !std::isfinite(k)) throw InvalidK("rrf k must be positive, got " + std::to_string(k));
  std::map<Key, std::vector<double>> parts;
  for (const auto& raw : runs) {
    require_columns(raw, {"qid", "docno", "score"}, "rrf");
    const Relation run = sort_and_rank(raw);
    const auto qid = *run.schema().index_of("qid");
    const auto docno = *run.schema().index_of("docno");
    const auto rank = *run.schema().index_of("rank");
    for (std::size_t r = 0; r < run.size(); ++r)
      parts[{run.text(r, qid), run.text(r, docno)}].push_back(
          1.0 / (k + static_cast<double>(run.int64(r, rank) + 1)));
  }
  return fused_relation(runs, std::move(parts));
}

namespace {

Relation evaluate(const PipelineNode& node, const Relation& input, NodePath& path) {
  try {
    struct Visitor {
      const Relation& input;
      NodePath& path;

      Relation operator()(const LeafNode& n) const { return transform(*n.transformer, input); }
      Relation operator()(const ThenNode& n) const {
        Relation cur = input;
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          path.push_back(i);
          cur = evaluate(n.children[i], cur, path);
          path.pop_back();
        }
        return cur;
      }
      std::vector<Relation> branches(const std::vector<PipelineNode>& children) const {
        std::vector<Relation> runs;
        for (std::size_t i = 0; i < children.size(); ++i) {
          path.push_back(i);
          runs.push_back(evaluate(children[i], input, path));
          path.pop_back();
        }
        return runs;
      }
      Relation operator()(const LinearNode& n) const {
        return fuse_linear(branches(n.children), n.weights);
      }
      Relation operator()(const RrfNode& n) const { return fuse_rrf(branches(n.children), n.k); }
    };
    return std::visit(Visitor{input, path}, node.variant());
  } catch (Error& e) {
    e.set_path(path, node.name());
    throw;
  }
}

}  // namespace

Relation execute(const PipelineNode& node, const Relation& input) {
  auto diag = validate(node, input.columns());
  if (!diag.ok) throw ValidationError(std::move(diag));
  NodePath path;
  return evaluate(node, input, path);
}

}  // namespace flowrank
