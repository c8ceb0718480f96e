#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowrank/frames.hpp"
#include "flowrank/index.hpp"

namespace flowrank {

using AttrValue = std::variant<std::int64_t, double, std::string>;

// Canonical text: floats with six decimals, integers in decimal, strings verbatim.
std::string render_attr(const AttrValue& v);

struct Attribute {
  std::string name;
  AttrValue value;
  // Set for constructor parameters; informational attributes have none.
  std::optional<AttrValue> default_value;

  bool is_parameter() const noexcept { return default_value.has_value(); }
  friend bool operator==(const Attribute&, const Attribute&) = default;
};

// Declared column contract of a transformer.
struct TransformerSpec {
  // Alternative minimal input configurations, in priority order.
  std::vector<ColumnSet> accepted_inputs;
  // Columns produced for a matched accepted set.
  std::function<ColumnSet(const ColumnSet& matched)> output_fn;
  // Whether input columns outside the matched set survive into the output.
  bool passthrough = false;

  // Index of the first accepted set contained in `given`.
  std::optional<std::size_t> match(const ColumnSet& given) const;
  // Output columns for `given`; nullopt when no accepted set matches.
  std::optional<ColumnSet> outputs_for(const ColumnSet& given) const;
};

class Transformer {
 public:
  using Procedure = std::function<Relation(const Relation&)>;

  Transformer(std::string name, std::string description, std::vector<Attribute> attributes,
              std::optional<TransformerSpec> spec, Procedure procedure);

  const std::string& name() const noexcept { return name_; }
  const std::string& description() const noexcept { return description_; }
  const std::vector<Attribute>& attributes() const noexcept { return attributes_; }
  const std::optional<TransformerSpec>& spec() const noexcept { return spec_; }

  // Runs the procedure without any contract checks.
  Relation run(const Relation& rel) const { return procedure_(rel); }

 private:
  std::string name_;
  std::string description_;
  std::vector<Attribute> attributes_;
  std::optional<TransformerSpec> spec_;
  Procedure procedure_;
};

using TransformerPtr = std::shared_ptr<const Transformer>;

// Checks the input against the declared spec, runs the transformer and
// verifies the produced columns agree with the spec.
Relation transform(const Transformer& t, const Relation& rel);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
  std::int64_t num_results = 1000;

  void validate() const;
};

struct SdmParams {
  double lambda_t = 0.9;
  double lambda_o = 0.1;

  void validate() const;
};

// Okapi BM25 weight of one term in one document. IDF is ln(1 + (N - df + 0.5) / (df + 0.5)).
double bm25_idf(std::int64_t df, std::int64_t n_docs);
double bm25_term_weight(double tf, std::int64_t df, std::int64_t n_docs, double doc_len,
                        double avg_doc_len, double k1, double b);

// Weighted query strings: `#w(0.900000) quick fox #ow(0.100000) quick fox`.
struct WeightedGroup {
  enum class Kind { Unigram, OrderedWindow };
  Kind kind = Kind::Unigram;
  double weight = 1.0;
  std::vector<std::string> tokens;

  friend bool operator==(const WeightedGroup&, const WeightedGroup&) = default;
};

bool is_weighted_query(std::string_view query);
std::vector<WeightedGroup> parse_weighted_query(std::string_view query);
// Unigrams at lambda_t plus one ordered window per adjacent pair at lambda_o.
// Single-token queries are returned unchanged; throws EmptyQuery on no tokens.
std::string sdm_rewrite(std::string_view query, const SdmParams& params);

// First sentence of `text`, up to and including the first '.', '?' or '!'.
std::string first_sentence(std::string_view text);

TransformerPtr bm25_retriever(IndexHandle index, Bm25Params params = {});
TransformerPtr weighted_bm25_retriever(IndexHandle index, Bm25Params params = {});
TransformerPtr text_loader(IndexHandle index);
TransformerPtr sdm_rewriter(SdmParams params = {});
// Re-scores candidates using statistics of each query's candidate set only.
TransformerPtr lexical_rescorer(Bm25Params params = {});
TransformerPtr extractive_answerer(std::int64_t max_passages = 3);

}  // namespace flowrank
