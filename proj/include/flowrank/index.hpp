#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flowrank/frames.hpp"

namespace flowrank {

// Lowercases ASCII and splits on every ASCII non-alphanumeric byte. Bytes
// >= 0x80 stay inside tokens so UTF-8 words are kept whole.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr int kIndexFormatVersion = 1;

struct Posting {
  std::int64_t doc_id = 0;
  std::int64_t tf = 0;
  std::vector<std::int64_t> positions;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct TermEntry {
  std::int64_t df = 0;
  std::int64_t cf = 0;
  std::vector<Posting> postings;  // ascending doc_id
};

struct IndexStats {
  std::int64_t n_docs = 0;
  double avg_doc_len = 0.0;
  std::int64_t total_tokens = 0;

  friend bool operator==(const IndexStats&, const IndexStats&) = default;
};

struct DocRecord {
  std::int64_t doc_id = 0;
  std::string docno;
  std::int64_t doc_len = 0;
  std::string text;
};

struct CorpusDoc {
  std::string docno;
  std::string text;
};

// JSONL with one {"docno": ..., "text": ...} per line.
std::vector<CorpusDoc> read_corpus_jsonl(const std::filesystem::path& path);

// Writes meta.json, docs.jsonl and postings.jsonl into out_dir.
IndexStats build_index(const std::vector<CorpusDoc>& corpus, const std::filesystem::path& out_dir);

// Read-only, in-memory view of an index directory.
class Index : public TextStore {
 public:
  static Index load(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  const IndexStats& stats() const noexcept { return stats_; }

  // Empty entry for unseen terms.
  const TermEntry& term(std::string_view t) const;
  const std::vector<Posting>& postings(std::string_view t) const { return term(t).postings; }
  const std::map<std::string, TermEntry, std::less<>>& lexicon() const noexcept {
    return lexicon_;
  }

  const std::vector<DocRecord>& docs() const noexcept { return docs_; }
  const DocRecord& doc(std::int64_t doc_id) const { return docs_.at(doc_id); }
  std::optional<std::int64_t> doc_id(std::string_view docno) const;
  const std::string* find_text(std::string_view docno) const override;

  // Positions p with t1 at p and t2 at p + 1 in the document.
  std::int64_t ordered_window_count(std::string_view t1, std::string_view t2,
                                    std::int64_t doc_id) const;

 private:
  std::filesystem::path dir_;
  IndexStats stats_;
  std::map<std::string, TermEntry, std::less<>> lexicon_;
  std::vector<DocRecord> docs_;
  std::unordered_map<std::string, std::int64_t> by_docno_;
};

const Posting* find_posting(const std::vector<Posting>& list, std::int64_t doc_id);

// Shared handle to an index directory. Loading is deferred until first use so
// pure inspection paths never read document data.
class IndexHandle {
 public:
  explicit IndexHandle(std::filesystem::path dir);
  explicit IndexHandle(std::shared_ptr<const Index> loaded);

  const std::filesystem::path& dir() const noexcept { return state_->dir; }
  const Index& get() const;
  bool loaded() const;

 private:
  struct State {
    std::filesystem::path dir;
    mutable std::once_flag once;
    mutable std::shared_ptr<const Index> index;
    mutable std::atomic<bool> ready{false};
  };
  std::shared_ptr<State> state_;
};

}  // namespace flowrank
