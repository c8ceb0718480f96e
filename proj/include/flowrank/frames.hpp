#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowrank/error.hpp"

namespace flowrank {

enum class ColumnType { Text, Float64, Int64, FloatVector };

std::string_view to_string(ColumnType t);

// Type of the well-known columns (qid, query, docno, text, score, rank,
// qanswer, query_vec). Anything else defaults to Text.
ColumnType standard_column_type(std::string_view name);

// Columns that must never hold null values.
bool is_core_column(std::string_view name);

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::Text;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns);
  // Builds a schema from names using standard_column_type.
  static Schema of(const std::vector<std::string>& names);

  std::size_t size() const noexcept { return columns_.size(); }
  const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }
  const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }

  std::optional<std::size_t> index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_of(name).has_value(); }
  ColumnSet names() const;

  // Appends the column, or replaces the type of an existing one in place.
  Schema with_column(ColumnSpec spec) const;

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<ColumnSpec> columns_;
};

using FloatVector = std::vector<double>;
using Value = std::variant<std::monostate, std::string, double, std::int64_t, FloatVector>;
using Row = std::vector<Value>;

bool value_matches(const Value& v, ColumnType t);

// Ordered rows under a schema. Immutable once built.
class Relation {
 public:
  Relation() = default;
  Relation(Schema schema, std::vector<Row> rows);

  const Schema& schema() const noexcept { return schema_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  ColumnSet columns() const { return schema_.names(); }

  // Index of a column; throws MissingColumn naming `who` when absent.
  std::size_t require(std::string_view column, std::string_view who) const;

  const std::string& text(std::size_t row, std::size_t col) const;
  double float64(std::size_t row, std::size_t col) const;
  std::int64_t int64(std::size_t row, std::size_t col) const;

  friend bool operator==(const Relation&, const Relation&) = default;

 private:
  Schema schema_;
  std::vector<Row> rows_;
};

// Throws MissingColumn listing required-vs-present when any column is absent.
void require_columns(const Relation& rel, const ColumnSet& needed, std::string_view who);

enum class FrameBase { Q, D, R, A, None };

struct FrameKind {
  FrameBase base = FrameBase::None;
  bool extended = true;

  // "Q", "R+", ...; Extended(None) renders as "X".
  std::string abbreviation() const;
  friend bool operator==(const FrameKind&, const FrameKind&) = default;
};

FrameKind classify_frame(const ColumnSet& columns);
inline FrameKind classify_frame(const Schema& schema) { return classify_frame(schema.names()); }

// Primary-key and rank invariants of the classified frame; nullopt when they hold.
std::optional<std::string> check_frame_invariants(const Relation& rel);

// Sorts by (qid asc, score desc, docno asc) and writes a 0-based rank per qid.
Relation sort_and_rank(const Relation& rel);

class TextStore {
 public:
  virtual ~TextStore() = default;
  virtual const std::string* find_text(std::string_view docno) const = 0;
};

// Appends (or overwrites) a `text` column looked up by docno.
Relation join_on_docno(const Relation& left, const TextStore& docs);

// Fixed-point rendering with six decimals, the canonical float format.
std::string format_fixed6(double v);

// Query TSV: `qid<TAB>query` per line. Blank lines are skipped.
Relation read_queries_tsv(std::istream& in);
Relation make_query_frame(const std::vector<std::pair<std::string, std::string>>& queries);

// TREC run lines `qid Q0 docno rank score tag`.
void write_trec_run(const Relation& rel, std::ostream& out, std::string_view tag);

}  // namespace flowrank
