#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace flowrank::testing {

std::vector<CorpusDoc> toy5() {
  return {{"d1", "the quick brown fox"},
          {"d2", "the lazy dog"},
          {"d3", "quick quick fox"},
          {"d4", "brown dog barks"},
          {"d5", "fox jumps over the lazy dog"}};
}

TempDir::TempDir() {
  static std::mt19937_64 rng{std::random_device{}()};
  for (;;) {
    path_ = std::filesystem::temp_directory_path() /
            ("flowrank-test-" + std::to_string(rng() % 1000000000ULL));
    if (std::filesystem::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

const IndexHandle& toy5_index() {
  static TempDir dir;
  static IndexHandle handle = [] {
    build_index(toy5(), dir.path() / "toy5");
    return IndexHandle(std::make_shared<const Index>(Index::load(dir.path() / "toy5")));
  }();
  return handle;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::size_t adjacent_count(const std::vector<std::string>& toks, const std::string& t1,
                           const std::string& t2) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) n += toks[i] == t1 && toks[i + 1] == t2;
  return n;
}

Bm25Oracle::Bm25Oracle(const std::vector<CorpusDoc>& corpus) {
  for (const auto& d : corpus) docs.emplace_back(d.docno, split_ws(d.text));
}

namespace {

double formula(double tf, double df, double n, double dl, double avgdl, double k1, double b) {
  const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
}

}  // namespace

double Bm25Oracle::unigram(const std::string& term, std::size_t doc) const {
  double total = 0, df = 0;
  for (const auto& [_, toks] : docs) {
    total += static_cast<double>(toks.size());
    df += std::count(toks.begin(), toks.end(), term) > 0;
  }
  const auto& toks = docs[doc].second;
  const double tf = static_cast<double>(std::count(toks.begin(), toks.end(), term));
  if (tf == 0) return 0;
  const double n = static_cast<double>(docs.size());
  return formula(tf, df, n, static_cast<double>(toks.size()), total / n, k1, b);
}

double Bm25Oracle::window(const std::string& t1, const std::string& t2, std::size_t doc) const {
  double total = 0, df = 0;
  for (const auto& [_, toks] : docs) {
    total += static_cast<double>(toks.size());
    df += adjacent_count(toks, t1, t2) > 0;
  }
  const auto& toks = docs[doc].second;
  const double tf = static_cast<double>(adjacent_count(toks, t1, t2));
  if (tf == 0) return 0;
  const double n = static_cast<double>(docs.size());
  return formula(tf, df, n, static_cast<double>(toks.size()), total / n, k1, b);
}

double Bm25Oracle::score(const std::string& query, const std::string& docno) const {
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (docs[d].first != docno) continue;
    double s = 0;
    for (const auto& t : split_ws(query)) s += unigram(t, d);
    return s;
  }
  return 0;
}

// ---------------------------------------------------------------------------

namespace {

Relation with_column(const Relation& rel, ColumnSpec spec, const std::vector<Value>& values) {
  Schema schema = rel.schema().with_column(spec);
  const auto col = *schema.index_of(spec.name);
  std::vector<Row> rows;
  for (std::size_t r = 0; r < rel.size(); ++r) {
    Row row = rel.rows()[r];
    row.resize(schema.size());
    row[col] = values[r];
    rows.push_back(std::move(row));
  }
  return Relation(std::move(schema), std::move(rows));
}

ColumnSet plus(ColumnSet s, const std::string& c) {
  s.insert(c);
  return s;
}

}  // namespace

TransformerPtr constant_run(std::string name, Relation out) {
  TransformerSpec spec;
  spec.accepted_inputs = {{"qid"}};
  const ColumnSet cols = out.columns();
  spec.output_fn = [cols](const ColumnSet&) { return cols; };
  return std::make_shared<const Transformer>(
      std::move(name), "Returns a fixed run.", std::vector<Attribute>{}, std::move(spec),
      [out](const Relation&) { return out; });
}

TransformerPtr encode_query() {
  TransformerSpec spec;
  spec.accepted_inputs = {{"qid", "query"}};
  spec.output_fn = [](const ColumnSet& m) { return plus(m, "query_vec"); };
  spec.passthrough = true;
  return std::make_shared<const Transformer>(
      "encode_query", "Bag-of-letters query vector.", std::vector<Attribute>{}, std::move(spec),
      [](const Relation& rel) {
        const auto q = *rel.schema().index_of("query");
        std::vector<Value> vecs;
        for (std::size_t r = 0; r < rel.size(); ++r) {
          const auto& text = rel.text(r, q);
          FloatVector v(3, 0.0);
          for (char c : text) v[static_cast<unsigned char>(c) % 3] += 1.0;
          vecs.push_back(std::move(v));
        }
        return with_column(rel, {"query_vec", ColumnType::FloatVector}, vecs);
      });
}

TransformerPtr dense_retrieve() {
  TransformerSpec spec;
  spec.accepted_inputs = {{"qid", "query_vec"}};
  spec.output_fn = [](const ColumnSet&) { return ColumnSet{"qid", "docno", "score", "rank"}; };
  return std::make_shared<const Transformer>(
      "dense_retrieve", "Scores every document against the query vector.",
      std::vector<Attribute>{{"dim", std::int64_t{3}, std::nullopt}}, std::move(spec),
      [](const Relation& rel) {
        const auto qid = *rel.schema().index_of("qid");
        const auto vec = *rel.schema().index_of("query_vec");
        std::map<std::string, FloatVector> first;
        for (std::size_t r = 0; r < rel.size(); ++r)
          if (const auto* v = std::get_if<FloatVector>(&rel.rows()[r][vec]))
            first.emplace(rel.text(r, qid), *v);
          else
            first.emplace(rel.text(r, qid), FloatVector{});
        std::vector<Row> rows;
        const auto docs = toy5();
        for (const auto& [q, v] : first) {
          for (std::size_t d = 0; d < docs.size(); ++d) {
            double s = 1.0 / static_cast<double>(d + 1);
            for (std::size_t i = 0; i < v.size(); ++i) s += 0.01 * v[i] * static_cast<double>(i + d);
            rows.push_back({q, docs[d].docno, s, std::int64_t{0}});
          }
        }
        return sort_and_rank(Relation(Schema::of({"qid", "docno", "score", "rank"}), std::move(rows)));
      });
}

TransformerPtr length_feature() {
  TransformerSpec spec;
  spec.accepted_inputs = {{"docno", "text"}, {"qid", "query"}};
  spec.output_fn = [](const ColumnSet& m) { return plus(m, "text_len"); };
  spec.passthrough = true;
  return std::make_shared<const Transformer>(
      "length_feature", "Byte length of the document text, or of the query.",
      std::vector<Attribute>{}, std::move(spec), [](const Relation& rel) {
        auto col = rel.schema().index_of("text");
        if (!col || !rel.schema().contains("docno")) col = rel.schema().index_of("query");
        std::vector<Value> lens;
        for (std::size_t r = 0; r < rel.size(); ++r)
          lens.push_back(static_cast<std::int64_t>(rel.text(r, *col).size()));
        return with_column(rel, {"text_len", ColumnType::Int64}, lens);
      });
}

std::vector<TransformerPtr> all_leaves(const IndexHandle& index) {
  return {bm25_retriever(index),   weighted_bm25_retriever(index), sdm_rewriter(),
          text_loader(index),      lexical_rescorer(),             extractive_answerer(),
          encode_query(),          dense_retrieve(),               length_feature()};
}

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

PipelineNode random_tree(std::mt19937_64& rng, const std::vector<TransformerPtr>& leaves,
                         int max_depth) {
  if (max_depth <= 1 || uniform(rng, 0, 1) < 0.4) return leaves[pick(rng, leaves.size())];
  const std::size_t n = 2 + pick(rng, 2);
  std::vector<PipelineNode> kids;
  for (std::size_t i = 0; i < n; ++i) kids.push_back(random_tree(rng, leaves, max_depth - 1));
  switch (pick(rng, 4)) {
    case 0:
    case 1: return then(std::move(kids));
    case 2: {
      std::vector<double> w;
      for (std::size_t i = 0; i < n; ++i) w.push_back(uniform(rng, -2, 2));
      return linear(std::move(kids), std::move(w));
    }
    default: return rr_fusion(std::move(kids), uniform(rng, 0.5, 100));
  }
}

Relation random_relation(std::mt19937_64& rng, const ColumnSet& cols) {
  static const std::vector<std::string> vocab{"quick", "fox", "lazy", "dog", "brown",
                                              "zebra", "the", "barks"};
  const auto docs = toy5();
  const bool has_qid = cols.count("qid"), has_docno = cols.count("docno");

  std::vector<std::pair<std::string, std::string>> keys;  // (qid, docno)
  const std::size_t n_qids = has_qid ? 1 + pick(rng, 3) : 1;
  for (std::size_t q = 0; q < n_qids; ++q) {
    const std::string qid = has_qid ? "q" + std::to_string(q + 1) : "";
    if (!has_docno) {
      keys.emplace_back(qid, "");
      continue;
    }
    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0, n = 1 + pick(rng, 3); i < n; ++i) keys.emplace_back(qid, docs[order[i]].docno);
    if (!has_qid) break;
  }

  std::map<std::string, std::string> queries;
  auto query_for = [&](const std::string& qid) {
    auto it = queries.find(qid);
    if (it != queries.end()) return it->second;
    std::string q;
    for (std::size_t i = 0, n = 1 + pick(rng, 3); i < n; ++i)
      q += (i ? " " : "") + vocab[pick(rng, vocab.size())];
    return queries[qid] = q;
  };

  std::vector<ColumnSpec> specs;
  for (const auto& c : cols)
    specs.push_back({c, c == "text_len" ? ColumnType::Int64 : standard_column_type(c)});
  Schema schema(specs);
  // Frames keyed by qid alone get a single row per qid.
  if (const auto base = classify_frame(schema).base; base == FrameBase::Q || base == FrameBase::A) {
    std::set<std::string> kept;
    std::erase_if(keys, [&](const auto& k) { return !kept.insert(k.first).second; });
  }

  std::vector<Row> rows;
  for (const auto& [qid, docno] : keys) {
    Row row;
    for (const auto& spec : specs) {
      const auto& c = spec.name;
      if (c == "qid") row.push_back(qid);
      else if (c == "docno") row.push_back(docno);
      else if (c == "query") row.push_back(query_for(qid));
      else if (c == "text") {
        auto it = std::find_if(docs.begin(), docs.end(), [&](const auto& d) { return d.docno == docno; });
        row.push_back(it != docs.end() ? it->text : "fox and dog. then more");
      } else if (c == "score") row.push_back(std::round(uniform(rng, 0, 10) * 4) / 4);
      else if (c == "rank") row.push_back(std::int64_t{0});
      else if (c == "query_vec") row.push_back(FloatVector{uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)});
      else if (spec.type == ColumnType::Int64) row.push_back(static_cast<std::int64_t>(pick(rng, 50)));
      else if (spec.type == ColumnType::Float64) row.push_back(uniform(rng, 0, 1));
      else row.push_back("v" + std::to_string(pick(rng, 100)));
    }
    rows.push_back(std::move(row));
  }

  if (const auto rank = schema.index_of("rank")) {
    const auto score = schema.index_of("score");
    const auto qid = schema.index_of("qid");
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < rows.size(); ++r)
      groups[qid ? std::get<std::string>(rows[r][*qid]) : ""].push_back(r);
    for (auto& [_, members] : groups) {
      if (score)
        std::stable_sort(members.begin(), members.end(), [&](auto a, auto b) {
          return std::get<double>(rows[a][*score]) > std::get<double>(rows[b][*score]);
        });
      for (std::size_t i = 0; i < members.size(); ++i)
        rows[members[i]][*rank] = static_cast<std::int64_t>(i);
    }
  }
  return Relation(std::move(schema), std::move(rows));
}

PipelineNode random_registry_tree(std::mt19937_64& rng, const Registry& registry, int max_depth) {
  if (max_depth <= 1 || uniform(rng, 0, 1) < 0.4) {
    const auto names = registry.names();
    const auto& name = names[pick(rng, names.size())];
    std::vector<std::pair<std::string, AttrValue>> kwargs;
    if (name == "sdm") {
      if (pick(rng, 2)) {
        const double t = uniform(rng, 0, 1);
        kwargs = {{"lambda_t", t}, {"lambda_o", 1.0 - t}};
      }
    } else {
      for (const auto& p : registry.find(name)->params) {
        if (pick(rng, 2)) continue;
        if (p.name == "b") kwargs.emplace_back(p.name, uniform(rng, 0, 1));
        else if (std::holds_alternative<double>(p.default_value))
          kwargs.emplace_back(p.name, pick(rng, 2) ? uniform(rng, 0, 3) : std::round(uniform(rng, 0, 3)));
        else
          kwargs.emplace_back(p.name, static_cast<std::int64_t>(1 + pick(rng, 2000)));
      }
    }
    return registry.make(name, kwargs);
  }
  const std::size_t n = 2 + pick(rng, 2);
  std::vector<PipelineNode> kids;
  for (std::size_t i = 0; i < n; ++i) kids.push_back(random_registry_tree(rng, registry, max_depth - 1));
  switch (pick(rng, 3)) {
    case 0: return then(std::move(kids));
    case 1: {
      std::vector<double> w;
      for (std::size_t i = 0; i < n; ++i) {
        switch (pick(rng, 3)) {
          case 0: w.push_back(1.0); break;
          case 1: w.push_back(uniform(rng, -5, 5)); break;
          default: w.push_back(std::ldexp(uniform(rng, 1, 2), static_cast<int>(pick(rng, 80)) - 40));
        }
      }
      return linear(std::move(kids), std::move(w));
    }
    default: return rr_fusion(std::move(kids), pick(rng, 2) ? 60.0 : uniform(rng, 1e-3, 1e3));
  }
}

Relation random_run(std::mt19937_64& rng, std::size_t n_qids, std::size_t n_docnos,
                    bool integer_scores) {
  std::vector<Row> rows;
  for (std::size_t q = 0; q < n_qids; ++q) {
    for (std::size_t d = 0; d < n_docnos; ++d) {
      if (pick(rng, 3) == 0) continue;
      const double s = integer_scores ? static_cast<double>(pick(rng, 8)) : uniform(rng, -3, 3);
      rows.push_back({"q" + std::to_string(q), "d" + std::to_string(d), s, std::int64_t{0}});
    }
  }
  return sort_and_rank(Relation(Schema::of({"qid", "docno", "score", "rank"}), std::move(rows)));
}

}  // namespace flowrank::testing
