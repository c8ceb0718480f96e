#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "flowrank/dsl.hpp"
#include "flowrank/index.hpp"
#include "flowrank/inspect.hpp"

namespace flowrank::testing {

// d1..d5, the five-document desk corpus every oracle runs against.
std::vector<CorpusDoc> toy5();

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Loaded TOY5 index shared by the whole process.
const IndexHandle& toy5_index();

// Straight transcription of the scoring formula over whitespace-split texts.
// TOY5 is lowercase ASCII words, so splitting on spaces is the tokenizer.
struct Bm25Oracle {
  std::vector<std::pair<std::string, std::vector<std::string>>> docs;
  double k1 = 1.2;
  double b = 0.75;

  explicit Bm25Oracle(const std::vector<CorpusDoc>& corpus);
  // Sum over query tokens; 0 when no token matches.
  double score(const std::string& query, const std::string& docno) const;
  double unigram(const std::string& term, std::size_t doc) const;
  // tf = adjacent (t1, t2) occurrences, df = docs with at least one.
  double window(const std::string& t1, const std::string& t2, std::size_t doc) const;
};

std::vector<std::string> split_ws(const std::string& s);
std::size_t adjacent_count(const std::vector<std::string>& toks, const std::string& t1,
                           const std::string& t2);

// Leaf returning a fixed relation regardless of input (only requires qid).
TransformerPtr constant_run(std::string name, Relation out);

// Spec-carrying synthetic transformers used by the random pipeline suite.
TransformerPtr encode_query();     // {qid, query} -> + query_vec
TransformerPtr dense_retrieve();   // {qid, query_vec} -> R frame
TransformerPtr length_feature();   // {docno, text} | {qid, query} -> + text_len (int64)

std::vector<TransformerPtr> all_leaves(const IndexHandle& index);

// Random tree over `leaves`, depth <= max_depth (a leaf has depth 1).
PipelineNode random_tree(std::mt19937_64& rng, const std::vector<TransformerPtr>& leaves,
                         int max_depth);

// Random relation with exactly `cols` that satisfies every frame invariant.
// Docnos come from TOY5 so loaders succeed; queries are non-empty.
Relation random_relation(std::mt19937_64& rng, const ColumnSet& cols);

// Random leaf expression for the DSL round trip, with random kwargs.
PipelineNode random_registry_tree(std::mt19937_64& rng, const Registry& registry, int max_depth);

// Run with random scores over random docnos: columns qid, docno, score, rank.
Relation random_run(std::mt19937_64& rng, std::size_t n_qids, std::size_t n_docnos,
                    bool integer_scores);

}  // namespace flowrank::testing
