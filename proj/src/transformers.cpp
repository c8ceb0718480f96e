#include "flowrank/transformers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

namespace flowrank {

std::string render_attr(const AttrValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) return format_fixed6(x);
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
        else return x;
      },
      v);
}

std::optional<std::size_t> TransformerSpec::match(const ColumnSet& given) const {
  for (std::size_t i = 0; i < accepted_inputs.size(); ++i)
    if (std::includes(given.begin(), given.end(), accepted_inputs[i].begin(),
                      accepted_inputs[i].end()))
      return i;
  return std::nullopt;
}

std::optional<ColumnSet> TransformerSpec::outputs_for(const ColumnSet& given) const {
  auto m = match(given);
  if (!m) return std::nullopt;
  const auto& matched = accepted_inputs[*m];
  ColumnSet out = output_fn(matched);
  if (passthrough)
    for (const auto& c : given)
      if (!matched.count(c)) out.insert(c);
  return out;
}

Transformer::Transformer(std::string name, std::string description,
                         std::vector<Attribute> attributes, std::optional<TransformerSpec> spec,
                         Procedure procedure)
    : name_(std::move(name)),
      description_(std::move(description)),
      attributes_(std::move(attributes)),
      spec_(std::move(spec)),
      procedure_(std::move(procedure)) {
  if (spec_ && spec_->accepted_inputs.empty())
    throw InvalidArgument(name_ + ": a spec needs at least one accepted input set");
}

Relation transform(const Transformer& t, const Relation& rel) {
  if (!t.spec()) return t.run(rel);
  const auto& spec = *t.spec();
  const ColumnSet given = rel.columns();
  auto expected = spec.outputs_for(given);
  if (!expected) {
    // Report against the accepted set that is closest to being satisfied.
    const ColumnSet* best = nullptr;
    ColumnSet best_missing;
    for (const auto& acc : spec.accepted_inputs) {
      ColumnSet missing;
      std::set_difference(acc.begin(), acc.end(), given.begin(), given.end(),
                          std::inserter(missing, missing.end()));
      if (!best || missing.size() < best_missing.size()) {
        best = &acc;
        best_missing = std::move(missing);
      }
    }
    throw MissingColumn(t.name() + " requires " + format_columns(*best) + " but only " +
                            format_columns(given) + " present; missing " +
                            format_columns(best_missing),
                        best_missing);
  }
  Relation out = t.run(rel);
  if (out.columns() != *expected)
    throw SpecViolation(t.name() + " produced " + format_columns(out.columns()) +
                        " but declares " + format_columns(*expected));
  return out;
}

void Bm25Params::validate() const {
  if (!(k1 >= 0) || !std::isfinite(k1)) throw InvalidArgument("k1 must be finite and >= 0");
  if (!(b >= 0 && b <= 1)) throw InvalidArgument("b must lie in [0, 1]");
  if (num_results < 1) throw InvalidArgument("num_results must be >= 1");
}

void SdmParams::validate() const {
  if (!(lambda_t >= 0) || !(lambda_o >= 0))
    throw InvalidArgument("sdm weights must be non-negative");
  if (std::abs(lambda_t + lambda_o - 1.0) > 1e-9)
    throw InvalidArgument("lambda_t + lambda_o must equal 1");
}

double bm25_idf(std::int64_t df, std::int64_t n_docs) {
  const double n = static_cast<double>(n_docs);
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_term_weight(double tf, std::int64_t df, std::int64_t n_docs, double doc_len,
                        double avg_doc_len, double k1, double b) {
  const double rel_len = avg_doc_len > 0 ? doc_len / avg_doc_len : 0.0;
  return bm25_idf(df, n_docs) * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * rel_len));
}

// ---------------------------------------------------------------------------
// Weighted query strings

bool is_weighted_query(std::string_view query) {
  auto p = query.find_first_not_of(' ');
  return p != std::string_view::npos && query[p] == '#';
}

std::vector<WeightedGroup> parse_weighted_query(std::string_view q) {
  std::vector<WeightedGroup> groups;
  std::size_t pos = 0;
  const std::size_t n = q.size();
  auto skip_spaces = [&] {
    while (pos < n && q[pos] == ' ') ++pos;
  };
  skip_spaces();
  if (pos == n) throw MalformedWeightedQuery("empty weighted query", pos);

  while (pos < n) {
    WeightedGroup g;
    const std::size_t group_start = pos;
    if (q.substr(pos, 3) == "#w(") {
      g.kind = WeightedGroup::Kind::Unigram;
      pos += 3;
    } else if (q.substr(pos, 4) == "#ow(") {
      g.kind = WeightedGroup::Kind::OrderedWindow;
      pos += 4;
    } else {
      throw MalformedWeightedQuery("expected '#w(' or '#ow('", pos);
    }

    const std::size_t num_start = pos;
    while (pos < n && (std::isdigit(static_cast<unsigned char>(q[pos])) || q[pos] == '.')) ++pos;
    if (pos == num_start) throw MalformedWeightedQuery("expected weight", pos);
    auto [end, ec] = std::from_chars(q.data() + num_start, q.data() + pos, g.weight);
    if (ec != std::errc() || end != q.data() + pos)
      throw MalformedWeightedQuery("invalid weight", num_start);
    if (pos >= n || q[pos] != ')') throw MalformedWeightedQuery("expected ')'", pos);
    ++pos;

    while (true) {
      if (pos < n && q[pos] != ' ') throw MalformedWeightedQuery("expected ' '", pos);
      skip_spaces();
      if (pos >= n || q[pos] == '#') break;
      const std::size_t tok_start = pos;
      while (pos < n && q[pos] != ' ') ++pos;
      std::string tok(q.substr(tok_start, pos - tok_start));
      auto toks = tokenize(tok);
      if (toks.size() != 1 || toks.front() != tok)
        throw MalformedWeightedQuery("invalid token '" + tok + "'", tok_start);
      g.tokens.push_back(std::move(tok));
    }

    if (g.kind == WeightedGroup::Kind::Unigram && g.tokens.empty())
      throw MalformedWeightedQuery("#w group without tokens", group_start);
    if (g.kind == WeightedGroup::Kind::OrderedWindow && g.tokens.size() != 2)
      throw MalformedWeightedQuery("#ow group needs exactly two tokens", group_start);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::string sdm_rewrite(std::string_view query, const SdmParams& params) {
  const auto tokens = tokenize(query);
  if (tokens.empty()) throw EmptyQuery("query '" + std::string(query) + "' has no tokens");
  if (tokens.size() == 1) return std::string(query);
  std::string out = "#w(" + format_fixed6(params.lambda_t) + ")";
  for (const auto& t : tokens) out += " " + t;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
    out += " #ow(" + format_fixed6(params.lambda_o) + ") " + tokens[i] + " " + tokens[i + 1];
  return out;
}

std::string first_sentence(std::string_view text) {
  auto end = text.find_first_of(".?!");
  std::string_view s = end == std::string_view::npos ? text : text.substr(0, end + 1);
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// ---------------------------------------------------------------------------
// Retrieval

namespace {

ColumnSet cols(std::initializer_list<const char*> names) {
  ColumnSet out;
  for (auto n : names) out.insert(n);
  return out;
}

ColumnSet with(ColumnSet base, std::initializer_list<const char*> extra) {
  for (auto n : extra) base.insert(n);
  return base;
}

class Accumulator {
 public:
  explicit Accumulator(std::size_t n_docs) : scores_(n_docs, 0.0), touched_(n_docs, false) {}

  void add(std::int64_t doc, double s) {
    if (!touched_[doc]) {
      touched_[doc] = true;
      hits_.push_back(doc);
    }
    scores_[doc] += s;
  }

  // Top `k` documents by (score desc, docno asc).
  std::vector<std::pair<std::int64_t, double>> top(const Index& ix, std::int64_t k) const {
    std::vector<std::pair<std::int64_t, double>> out;
    out.reserve(hits_.size());
    for (auto d : hits_) out.emplace_back(d, scores_[d]);
    auto better = [&](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return ix.doc(a.first).docno < ix.doc(b.first).docno;
    };
    const auto keep = std::min<std::size_t>(out.size(), static_cast<std::size_t>(k));
    std::partial_sort(out.begin(), out.begin() + keep, out.end(), better);
    out.resize(keep);
    return out;
  }

 private:
  std::vector<double> scores_;
  std::vector<bool> touched_;
  std::vector<std::int64_t> hits_;
};

void score_unigrams(const Index& ix, const Bm25Params& p, const std::vector<std::string>& tokens,
                    double weight, Accumulator& acc) {
  const auto& st = ix.stats();
  for (const auto& t : tokens) {
    const auto& entry = ix.term(t);
    for (const auto& post : entry.postings) {
      const double w = bm25_term_weight(static_cast<double>(post.tf), entry.df, st.n_docs,
                                        static_cast<double>(ix.doc(post.doc_id).doc_len),
                                        st.avg_doc_len, p.k1, p.b);
      acc.add(post.doc_id, weight * w);
    }
  }
}

void score_ordered_window(const Index& ix, const Bm25Params& p, const std::string& t1,
                          const std::string& t2, double weight, Accumulator& acc) {
  const auto& st = ix.stats();
  std::vector<std::pair<std::int64_t, std::int64_t>> counts;
  for (const auto& post : ix.postings(t1)) {
    auto c = ix.ordered_window_count(t1, t2, post.doc_id);
    if (c > 0) counts.emplace_back(post.doc_id, c);
  }
  const auto df = static_cast<std::int64_t>(counts.size());
  for (auto [doc, c] : counts) {
    const double w = bm25_term_weight(static_cast<double>(c), df, st.n_docs,
                                      static_cast<double>(ix.doc(doc).doc_len), st.avg_doc_len,
                                      p.k1, p.b);
    acc.add(doc, weight * w);
  }
}

using QueryScorer = std::function<void(const Index&, const std::string& query, Accumulator&)>;

Relation retrieve(const Index& ix, const Bm25Params& p, const Relation& rel,
                  const std::string& who, const QueryScorer& scorer) {
  const auto qid = rel.require("qid", who);
  const auto query = rel.require("query", who);
  std::vector<Row> rows;
  std::set<std::string_view> seen;
  for (std::size_t r = 0; r < rel.size(); ++r) {
    // One retrieval per qid; later rows of a qid (re-retrieval over a result frame) are skipped.
    if (!seen.insert(rel.text(r, qid)).second) continue;
    Accumulator acc(static_cast<std::size_t>(ix.stats().n_docs));
    scorer(ix, rel.text(r, query), acc);
    for (auto [doc, score] : acc.top(ix, p.num_results))
      rows.push_back({rel.text(r, qid), rel.text(r, query), ix.doc(doc).docno,
                      std::int64_t{0}, score});
  }
  return sort_and_rank(Relation(Schema::of({"qid", "query", "docno", "rank", "score"}),
                                std::move(rows)));
}

std::vector<Attribute> bm25_attributes(const Bm25Params& p, bool with_num_results) {
  const Bm25Params defaults;
  std::vector<Attribute> attrs{{"k1", p.k1, AttrValue{defaults.k1}},
                               {"b", p.b, AttrValue{defaults.b}}};
  if (with_num_results)
    attrs.push_back({"num_results", p.num_results, AttrValue{defaults.num_results}});
  return attrs;
}

TransformerSpec retriever_spec() {
  return {{cols({"qid", "query"})},
          [](const ColumnSet&) { return cols({"qid", "query", "docno", "rank", "score"}); },
          false};
}

}  // namespace

TransformerPtr bm25_retriever(IndexHandle index, Bm25Params params) {
  params.validate();
  auto proc = [index, params](const Relation& rel) {
    return retrieve(index.get(), params, rel, "bm25",
                    [&](const Index& ix, const std::string& q, Accumulator& acc) {
                      score_unigrams(ix, params, tokenize(q), 1.0, acc);
                    });
  };
  return std::make_shared<const Transformer>(
      "bm25", "Ranks documents of the index for each query with BM25.",
      bm25_attributes(params, true), retriever_spec(), std::move(proc));
}

TransformerPtr weighted_bm25_retriever(IndexHandle index, Bm25Params params) {
  params.validate();
  auto proc = [index, params](const Relation& rel) {
    return retrieve(
        index.get(), params, rel, "wbm25",
        [&](const Index& ix, const std::string& q, Accumulator& acc) {
          if (!is_weighted_query(q)) {
            score_unigrams(ix, params, tokenize(q), 1.0, acc);
            return;
          }
          for (const auto& g : parse_weighted_query(q)) {
            if (g.kind == WeightedGroup::Kind::Unigram)
              score_unigrams(ix, params, g.tokens, g.weight, acc);
            else
              score_ordered_window(ix, params, g.tokens[0], g.tokens[1], g.weight, acc);
          }
        });
  };
  return std::make_shared<const Transformer>(
      "wbm25",
      "Ranks documents with BM25 over weighted queries of unigram and ordered-window groups; "
      "plain queries score as bm25.",
      bm25_attributes(params, true), retriever_spec(), std::move(proc));
}

TransformerPtr text_loader(IndexHandle index) {
  TransformerSpec spec{{cols({"docno"})},
                       [](const ColumnSet& m) { return with(m, {"text"}); },
                       true};
  std::vector<Attribute> attrs{{"index", index.dir().generic_string(), std::nullopt}};
  auto proc = [index](const Relation& rel) { return join_on_docno(rel, index.get()); };
  return std::make_shared<const Transformer>(
      "text_loader", "Adds the stored text of each document from the index.", std::move(attrs),
      std::move(spec), std::move(proc));
}

TransformerPtr sdm_rewriter(SdmParams params) {
  params.validate();
  TransformerSpec spec{{cols({"qid", "query"})},
                       [](const ColumnSet& m) { return m; },
                       true};
  const SdmParams defaults;
  std::vector<Attribute> attrs{{"lambda_t", params.lambda_t, AttrValue{defaults.lambda_t}},
                               {"lambda_o", params.lambda_o, AttrValue{defaults.lambda_o}}};
  auto proc = [params](const Relation& rel) {
    rel.require("qid", "sdm");
    const auto query = rel.require("query", "sdm");
    std::vector<Row> rows = rel.rows();
    for (auto& row : rows) row[query] = sdm_rewrite(std::get<std::string>(row[query]), params);
    return Relation(rel.schema(), std::move(rows));
  };
  return std::make_shared<const Transformer>(
      "sdm",
      "Rewrites queries into weighted unigram and ordered-window (adjacent pair) groups.",
      std::move(attrs), std::move(spec), std::move(proc));
}

TransformerPtr lexical_rescorer(Bm25Params params) {
  params.validate();
  TransformerSpec spec{{cols({"qid", "query", "docno", "text"})},
                       [](const ColumnSet& m) { return with(m, {"score", "rank"}); },
                       true};
  auto proc = [params](const Relation& rel) {
    const auto qid = rel.require("qid", "rescore");
    const auto query = rel.require("query", "rescore");
    rel.require("docno", "rescore");
    const auto text = rel.require("text", "rescore");

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < rel.size(); ++r) groups[rel.text(r, qid)].push_back(r);

    std::vector<double> scores(rel.size(), 0.0);
    for (const auto& [q, members] : groups) {
      std::vector<std::unordered_map<std::string, std::int64_t>> tfs(members.size());
      std::vector<double> lens(members.size());
      std::unordered_map<std::string, std::int64_t> df;
      double total = 0;
      for (std::size_t i = 0; i < members.size(); ++i) {
        const auto toks = tokenize(rel.text(members[i], text));
        for (const auto& t : toks)
          if (tfs[i][t]++ == 0) ++df[t];
        lens[i] = static_cast<double>(toks.size());
        total += lens[i];
      }
      const auto n = static_cast<std::int64_t>(members.size());
      const double avg = total / static_cast<double>(n);
      for (std::size_t i = 0; i < members.size(); ++i) {
        double s = 0;
        for (const auto& t : tokenize(rel.text(members[i], query))) {
          auto it = tfs[i].find(t);
          if (it == tfs[i].end()) continue;
          s += bm25_term_weight(static_cast<double>(it->second), df[t], n, lens[i], avg,
                                params.k1, params.b);
        }
        scores[members[i]] = s;
      }
    }

    Schema schema = rel.schema().with_column({"score", ColumnType::Float64});
    const auto score = *schema.index_of("score");
    std::vector<Row> rows = rel.rows();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      rows[r].resize(schema.size());
      rows[r][score] = scores[r];
    }
    return sort_and_rank(Relation(std::move(schema), std::move(rows)));
  };
  return std::make_shared<const Transformer>(
      "rescore",
      "Re-ranks candidate documents by BM25 over their text, using the candidate set of each "
      "query as the collection.",
      bm25_attributes(params, false), std::move(spec), std::move(proc));
}

TransformerPtr extractive_answerer(std::int64_t max_passages) {
  if (max_passages < 1) throw InvalidArgument("max_passages must be >= 1");
  TransformerSpec spec{{cols({"qid", "query", "docno", "score", "rank", "text"})},
                       [](const ColumnSet&) { return cols({"qid", "qanswer"}); },
                       false};
  std::vector<Attribute> attrs{{"max_passages", max_passages, AttrValue{std::int64_t{3}}}};
  auto proc = [max_passages](const Relation& rel) {
    require_columns(rel, cols({"qid", "query", "docno", "score", "rank", "text"}), "answer");
    const auto qid = *rel.schema().index_of("qid");
    const auto rank = *rel.schema().index_of("rank");
    const auto text = *rel.schema().index_of("text");

    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < rel.size(); ++r) {
      auto& g = groups[rel.text(r, qid)];
      if (g.empty()) order.push_back(rel.text(r, qid));
      g.push_back(r);
    }
    std::vector<Row> rows;
    for (const auto& q : order) {
      auto members = groups[q];
      std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        return rel.int64(a, rank) < rel.int64(b, rank);
      });
      // Fall back to lower-ranked passages only when the top one has no text.
      std::string answer;
      const auto limit = std::min<std::size_t>(members.size(), max_passages);
      for (std::size_t i = 0; i < limit && answer.empty(); ++i)
        answer = first_sentence(rel.text(members[i], text));
      rows.push_back({q, std::move(answer)});
    }
    return Relation(Schema::of({"qid", "qanswer"}), std::move(rows));
  };
  return std::make_shared<const Transformer>(
      "answer", "Answers each query with the first sentence of its top-ranked passage.",
      std::move(attrs), std::move(spec), std::move(proc));
}

}  // namespace flowrank
