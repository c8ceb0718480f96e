#include "flowrank/frames.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

namespace flowrank {

std::string_view to_string(ColumnType t) {
  switch (t) {
    case ColumnType::Text: return "text";
    case ColumnType::Float64: return "float64";
    case ColumnType::Int64: return "int64";
    case ColumnType::FloatVector: return "float-vector";
  }
  return "?";
}

ColumnType standard_column_type(std::string_view name) {
  if (name == "score") return ColumnType::Float64;
  if (name == "rank") return ColumnType::Int64;
  if (name == "query_vec") return ColumnType::FloatVector;
  return ColumnType::Text;
}

bool is_core_column(std::string_view name) {
  static const std::set<std::string, std::less<>> core{"qid",   "query", "docno",  "text",
                                                       "score", "rank",  "qanswer"};
  return core.find(name) != core.end();
}

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
  std::set<std::string_view> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw SchemaError("column name must be non-empty");
    if (!seen.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
  }
}

Schema Schema::of(const std::vector<std::string>& names) {
  std::vector<ColumnSpec> specs;
  specs.reserve(names.size());
  for (const auto& n : names) specs.push_back({n, standard_column_type(n)});
  return Schema(std::move(specs));
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  return std::nullopt;
}

ColumnSet Schema::names() const {
  ColumnSet out;
  for (const auto& c : columns_) out.insert(c.name);
  return out;
}

Schema Schema::with_column(ColumnSpec spec) const {
  auto cols = columns_;
  if (auto i = index_of(spec.name)) {
    cols[*i] = std::move(spec);
  } else {
    cols.push_back(std::move(spec));
  }
  return Schema(std::move(cols));
}

bool value_matches(const Value& v, ColumnType t) {
  switch (t) {
    case ColumnType::Text: return std::holds_alternative<std::string>(v);
    case ColumnType::Float64: return std::holds_alternative<double>(v);
    case ColumnType::Int64: return std::holds_alternative<std::int64_t>(v);
    case ColumnType::FloatVector: return std::holds_alternative<FloatVector>(v);
  }
  return false;
}

Relation::Relation(Schema schema, std::vector<Row> rows)
    : schema_(std::move(schema)), rows_(std::move(rows)) {
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const auto& row = rows_[r];
    if (row.size() != schema_.size())
      throw SchemaError("row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                        " values for " + std::to_string(schema_.size()) + " columns");
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto& spec = schema_[c];
      if (std::holds_alternative<std::monostate>(row[c])) {
        if (is_core_column(spec.name))
          throw SchemaError("null value in column '" + spec.name + "' at row " +
                            std::to_string(r));
        continue;
      }
      if (!value_matches(row[c], spec.type))
        throw SchemaError("value of column '" + spec.name + "' at row " + std::to_string(r) +
                          " is not " + std::string(to_string(spec.type)));
    }
  }
}

std::size_t Relation::require(std::string_view column, std::string_view who) const {
  if (auto i = schema_.index_of(column)) return *i;
  require_columns(*this, ColumnSet{std::string(column)}, who);
  return 0;  // unreachable
}

const std::string& Relation::text(std::size_t row, std::size_t col) const {
  return std::get<std::string>(rows_[row][col]);
}
double Relation::float64(std::size_t row, std::size_t col) const {
  return std::get<double>(rows_[row][col]);
}
std::int64_t Relation::int64(std::size_t row, std::size_t col) const {
  return std::get<std::int64_t>(rows_[row][col]);
}

void require_columns(const Relation& rel, const ColumnSet& needed, std::string_view who) {
  ColumnSet missing;
  for (const auto& c : needed)
    if (!rel.schema().contains(c)) missing.insert(c);
  if (missing.empty()) return;
  throw MissingColumn(std::string(who) + " requires " + format_columns(needed) + " but only " +
                          format_columns(rel.columns()) + " present; missing " +
                          format_columns(missing),
                      std::move(missing));
}

// ---------------------------------------------------------------------------
// Frame classification

namespace {

bool contains_all(const ColumnSet& cols, std::initializer_list<const char*> needed) {
  return std::all_of(needed.begin(), needed.end(),
                     [&](const char* c) { return cols.count(c) > 0; });
}

bool has_extras(const ColumnSet& cols, std::initializer_list<const char*> allowed) {
  for (const auto& c : cols)
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return c == a; }))
      return true;
  return false;
}

}  // namespace

FrameKind classify_frame(const ColumnSet& cols) {
  // A result frame keeps the query that produced it without counting as extended.
  if (contains_all(cols, {"qid", "docno", "score", "rank"}))
    return {FrameBase::R, has_extras(cols, {"qid", "docno", "score", "rank", "query"})};
  if (contains_all(cols, {"qid", "qanswer"}))
    return {FrameBase::A, has_extras(cols, {"qid", "qanswer"})};
  if (contains_all(cols, {"qid", "query"}))
    return {FrameBase::Q, has_extras(cols, {"qid", "query"})};
  if (contains_all(cols, {"docno", "text"}))
    return {FrameBase::D, has_extras(cols, {"docno", "text"})};
  return {FrameBase::None, true};
}

std::string FrameKind::abbreviation() const {
  std::string s;
  switch (base) {
    case FrameBase::Q: s = "Q"; break;
    case FrameBase::D: s = "D"; break;
    case FrameBase::R: s = "R"; break;
    case FrameBase::A: s = "A"; break;
    case FrameBase::None: return "X";
  }
  return extended ? s + "+" : s;
}

std::optional<std::string> check_frame_invariants(const Relation& rel) {
  const auto& schema = rel.schema();
  const auto kind = classify_frame(schema);
  const auto qid = schema.index_of("qid");
  const auto docno = schema.index_of("docno");

  auto unique_by = [&](std::vector<std::size_t> cols, const char* what)
      -> std::optional<std::string> {
    std::set<std::vector<std::string>> seen;
    for (std::size_t r = 0; r < rel.size(); ++r) {
      std::vector<std::string> key;
      for (auto c : cols) key.push_back(rel.text(r, c));
      if (!seen.insert(key).second) return std::string("duplicate ") + what + " at row " +
                                           std::to_string(r);
    }
    return std::nullopt;
  };

  std::optional<std::string> pk;
  switch (kind.base) {
    case FrameBase::Q:
    case FrameBase::A: pk = unique_by({*qid}, "qid"); break;
    case FrameBase::R: pk = unique_by({*qid, *docno}, "(qid, docno)"); break;
    case FrameBase::D: pk = unique_by({*docno}, "docno"); break;
    case FrameBase::None: break;
  }
  if (pk) return pk;

  const auto rank = schema.index_of("rank");
  if (!rank) return std::nullopt;
  const auto score = schema.index_of("score");

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < rel.size(); ++r)
    groups[qid ? rel.text(r, *qid) : std::string()].push_back(r);
  for (auto& [q, rows] : groups) {
    std::vector<std::size_t> by_rank(rows.size(), rows.size());
    for (auto r : rows) {
      auto k = rel.int64(r, *rank);
      if (k < 0 || static_cast<std::size_t>(k) >= rows.size() || by_rank[k] != rows.size())
        return "ranks of qid '" + q + "' are not 0.." + std::to_string(rows.size() - 1);
      by_rank[k] = r;
    }
    if (!score) continue;
    for (std::size_t k = 1; k < by_rank.size(); ++k)
      if (rel.float64(by_rank[k], *score) > rel.float64(by_rank[k - 1], *score))
        return "score increases with rank for qid '" + q + "' at rank " + std::to_string(k);
  }
  return std::nullopt;
}

Relation sort_and_rank(const Relation& rel) {
  const auto qid = rel.require("qid", "sort_and_rank");
  const auto docno = rel.require("docno", "sort_and_rank");
  const auto score = rel.require("score", "sort_and_rank");

  std::vector<std::size_t> order(rel.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (int c = rel.text(a, qid).compare(rel.text(b, qid)); c != 0) return c < 0;
    const double sa = rel.float64(a, score);
    const double sb = rel.float64(b, score);
    const bool na = std::isnan(sa), nb = std::isnan(sb);
    if (na != nb) return nb;  // NaN sorts last
    if (!na && sa != sb) return sa > sb;
    return rel.text(a, docno) < rel.text(b, docno);
  });

  Schema schema = rel.schema().with_column({"rank", ColumnType::Int64});
  const auto rank = *schema.index_of("rank");
  std::vector<Row> rows;
  rows.reserve(rel.size());
  std::int64_t pos = 0;
  const std::string* prev_qid = nullptr;
  for (auto r : order) {
    const auto& q = rel.text(r, qid);
    pos = (prev_qid && *prev_qid == q) ? pos + 1 : 0;
    prev_qid = &q;
    Row row = rel.rows()[r];
    if (row.size() < schema.size()) row.resize(schema.size());
    row[rank] = pos;
    rows.push_back(std::move(row));
  }
  return Relation(std::move(schema), std::move(rows));
}

Relation join_on_docno(const Relation& left, const TextStore& docs) {
  const auto docno = left.require("docno", "join_on_docno");
  Schema schema = left.schema().with_column({"text", ColumnType::Text});
  const auto text = *schema.index_of("text");
  std::vector<Row> rows;
  rows.reserve(left.size());
  for (std::size_t r = 0; r < left.size(); ++r) {
    const auto& d = left.text(r, docno);
    const std::string* found = docs.find_text(d);
    if (!found) throw UnknownDocno("unknown docno '" + d + "'");
    Row row = left.rows()[r];
    if (row.size() < schema.size()) row.resize(schema.size());
    row[text] = *found;
    rows.push_back(std::move(row));
  }
  return Relation(std::move(schema), std::move(rows));
}

std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Relation make_query_frame(const std::vector<std::pair<std::string, std::string>>& queries) {
  std::set<std::string_view> seen;
  std::vector<Row> rows;
  rows.reserve(queries.size());
  for (const auto& [qid, query] : queries) {
    if (!seen.insert(qid).second) throw InvalidInput("duplicate qid '" + qid + "'");
    rows.push_back({qid, query});
  }
  return Relation(Schema::of({"qid", "query"}), std::move(rows));
}

Relation read_queries_tsv(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> queries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw InvalidInput("line " + std::to_string(lineno) + ": expected qid<TAB>query");
    queries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return make_query_frame(queries);
}

void write_trec_run(const Relation& rel, std::ostream& out, std::string_view tag) {
  const auto qid = rel.require("qid", "TREC output");
  const auto docno = rel.require("docno", "TREC output");
  const auto rank = rel.require("rank", "TREC output");
  const auto score = rel.require("score", "TREC output");
  for (std::size_t r = 0; r < rel.size(); ++r) {
    out << rel.text(r, qid) << " Q0 " << rel.text(r, docno) << ' ' << rel.int64(r, rank) << ' '
        << format_fixed6(rel.float64(r, score)) << ' ' << tag << '\n';
  }
}

}  // namespace flowrank
