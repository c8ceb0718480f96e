#include "flowrank/index.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

namespace flowrank {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                      (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (word) {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                           : static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<CorpusDoc> read_corpus_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<CorpusDoc> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      docs.push_back({j.at("docno").get<std::string>(), j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string dump(const ordered_json& j, const std::string& where) {
  try {
    return j.dump();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(where + ": " + e.what());
  }
}

}  // namespace

IndexStats build_index(const std::vector<CorpusDoc>& corpus, const fs::path& out_dir) {
  if (corpus.empty()) throw EmptyCorpus("corpus has no documents");
  {
    std::set<std::string_view> seen;
    for (const auto& d : corpus)
      if (!seen.insert(d.docno).second) throw DuplicateDocno("duplicate docno '" + d.docno + "'");
  }

  std::map<std::string, TermEntry> lexicon;
  std::vector<std::int64_t> lengths;
  std::int64_t total = 0;
  for (std::size_t id = 0; id < corpus.size(); ++id) {
    const auto tokens = tokenize(corpus[id].text);
    lengths.push_back(static_cast<std::int64_t>(tokens.size()));
    total += static_cast<std::int64_t>(tokens.size());
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
      auto& entry = lexicon[tokens[pos]];
      if (entry.postings.empty() || entry.postings.back().doc_id != static_cast<std::int64_t>(id)) {
        entry.postings.push_back({static_cast<std::int64_t>(id), 0, {}});
        ++entry.df;
      }
      auto& p = entry.postings.back();
      ++p.tf;
      p.positions.push_back(static_cast<std::int64_t>(pos));
      ++entry.cf;
    }
  }

  IndexStats stats;
  stats.n_docs = static_cast<std::int64_t>(corpus.size());
  stats.total_tokens = total;
  stats.avg_doc_len = static_cast<double>(total) / static_cast<double>(stats.n_docs);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  ordered_json meta;
  meta["format_version"] = kIndexFormatVersion;
  meta["n_docs"] = stats.n_docs;
  meta["total_tokens"] = stats.total_tokens;
  meta["avg_doc_len"] = stats.avg_doc_len;

  std::string docs;
  for (std::size_t id = 0; id < corpus.size(); ++id) {
    ordered_json d;
    d["doc_id"] = id;
    d["docno"] = corpus[id].docno;
    d["doc_len"] = lengths[id];
    d["text"] = corpus[id].text;
    docs += dump(d, "document '" + corpus[id].docno + "'") + '\n';
  }

  std::string postings;
  for (const auto& [term, entry] : lexicon) {
    ordered_json t;
    t["term"] = term;
    t["df"] = entry.df;
    t["cf"] = entry.cf;
    auto list = ordered_json::array();
    for (const auto& p : entry.postings) list.push_back(ordered_json::array({p.doc_id, p.tf, p.positions}));
    t["postings"] = std::move(list);
    postings += dump(t, "term '" + term + "'") + '\n';
  }

  write_file(out_dir / "meta.json", meta.dump() + '\n');
  write_file(out_dir / "docs.jsonl", docs);
  write_file(out_dir / "postings.jsonl", postings);
  return stats;
}

// ---------------------------------------------------------------------------

namespace {

template <class Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw CorruptIndex("missing or unreadable " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw CorruptIndex(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const CorruptIndex& e) {
      throw CorruptIndex(path.string() + ":" + std::to_string(lineno) + ": " + e.message());
    }
  }
}

}  // namespace

Index Index::load(const fs::path& dir) {
  Index ix;
  ix.dir_ = dir;

  const auto meta_path = dir / "meta.json";
  {
    std::ifstream in(meta_path);
    if (!in) throw CorruptIndex("missing or unreadable " + meta_path.string());
    try {
      auto meta = nlohmann::json::parse(in);
      const int version = meta.at("format_version").get<int>();
      if (version != kIndexFormatVersion)
        throw VersionMismatch(meta_path.string() + ": format_version " + std::to_string(version) +
                              ", expected " + std::to_string(kIndexFormatVersion));
      ix.stats_.n_docs = meta.at("n_docs").get<std::int64_t>();
      ix.stats_.total_tokens = meta.at("total_tokens").get<std::int64_t>();
      ix.stats_.avg_doc_len = meta.at("avg_doc_len").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw CorruptIndex(meta_path.string() + ": " + e.what());
    }
  }

  std::int64_t total = 0;
  for_each_line(dir / "docs.jsonl", [&](const nlohmann::json& j) {
    DocRecord d;
    d.doc_id = j.at("doc_id").get<std::int64_t>();
    d.docno = j.at("docno").get<std::string>();
    d.doc_len = j.at("doc_len").get<std::int64_t>();
    d.text = j.at("text").get<std::string>();
    if (d.doc_id != static_cast<std::int64_t>(ix.docs_.size()))
      throw CorruptIndex("doc_id " + std::to_string(d.doc_id) + " out of sequence");
    if (!ix.by_docno_.emplace(d.docno, d.doc_id).second)
      throw CorruptIndex("duplicate docno '" + d.docno + "'");
    total += d.doc_len;
    ix.docs_.push_back(std::move(d));
  });
  if (static_cast<std::int64_t>(ix.docs_.size()) != ix.stats_.n_docs || total != ix.stats_.total_tokens)
    throw CorruptIndex((dir / "docs.jsonl").string() + ": document table disagrees with meta.json");

  std::int64_t cf_sum = 0;
  for_each_line(dir / "postings.jsonl", [&](const nlohmann::json& j) {
    auto term = j.at("term").get<std::string>();
    TermEntry e;
    e.df = j.at("df").get<std::int64_t>();
    e.cf = j.at("cf").get<std::int64_t>();
    std::int64_t cf = 0;
    for (const auto& p : j.at("postings")) {
      Posting posting{p.at(0).get<std::int64_t>(), p.at(1).get<std::int64_t>(),
                      p.at(2).get<std::vector<std::int64_t>>()};
      if (posting.doc_id < 0 || posting.doc_id >= ix.stats_.n_docs)
        throw CorruptIndex("term '" + term + "': doc_id out of range");
      if (!e.postings.empty() && e.postings.back().doc_id >= posting.doc_id)
        throw CorruptIndex("term '" + term + "': postings not ascending");
      if (posting.tf != static_cast<std::int64_t>(posting.positions.size()) ||
          !std::is_sorted(posting.positions.begin(), posting.positions.end(),
                          std::less_equal<>()) ||
          std::adjacent_find(posting.positions.begin(), posting.positions.end()) !=
              posting.positions.end())
        throw CorruptIndex("term '" + term + "': bad positions");
      cf += posting.tf;
      e.postings.push_back(std::move(posting));
    }
    if (e.df != static_cast<std::int64_t>(e.postings.size()) || e.cf != cf)
      throw CorruptIndex("term '" + term + "': df/cf disagree with postings");
    if (!ix.lexicon_.empty() && ix.lexicon_.rbegin()->first >= term)
      throw CorruptIndex("term '" + term + "' out of order");
    cf_sum += cf;
    ix.lexicon_.emplace(std::move(term), std::move(e));
  });
  if (cf_sum != ix.stats_.total_tokens)
    throw CorruptIndex((dir / "postings.jsonl").string() + ": collection frequency sum " +
                       std::to_string(cf_sum) + " != total_tokens");
  return ix;
}

const TermEntry& Index::term(std::string_view t) const {
  static const TermEntry empty;
  auto it = lexicon_.find(t);
  return it == lexicon_.end() ? empty : it->second;
}

std::optional<std::int64_t> Index::doc_id(std::string_view docno) const {
  auto it = by_docno_.find(std::string(docno));
  if (it == by_docno_.end()) return std::nullopt;
  return it->second;
}

const std::string* Index::find_text(std::string_view docno) const {
  auto id = doc_id(docno);
  return id ? &docs_[*id].text : nullptr;
}

const Posting* find_posting(const std::vector<Posting>& list, std::int64_t doc_id) {
  auto it = std::lower_bound(list.begin(), list.end(), doc_id,
                             [](const Posting& p, std::int64_t id) { return p.doc_id < id; });
  return (it != list.end() && it->doc_id == doc_id) ? &*it : nullptr;
}

std::int64_t Index::ordered_window_count(std::string_view t1, std::string_view t2,
                                         std::int64_t doc_id) const {
  const Posting* a = find_posting(postings(t1), doc_id);
  const Posting* b = find_posting(postings(t2), doc_id);
  if (!a || !b) return 0;
  std::int64_t count = 0;
  auto j = b->positions.begin();
  for (auto p : a->positions) {
    j = std::lower_bound(j, b->positions.end(), p + 1);
    if (j == b->positions.end()) break;
    if (*j == p + 1) ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------

IndexHandle::IndexHandle(fs::path dir) : state_(std::make_shared<State>()) {
  state_->dir = std::move(dir);
}

IndexHandle::IndexHandle(std::shared_ptr<const Index> loaded) : state_(std::make_shared<State>()) {
  state_->dir = loaded->dir();
  state_->index = std::move(loaded);
  state_->ready = true;
}

const Index& IndexHandle::get() const {
  if (!state_->ready.load(std::memory_order_acquire)) {
    std::call_once(state_->once, [this] {
      state_->index = std::make_shared<const Index>(Index::load(state_->dir));
      state_->ready.store(true, std::memory_order_release);
    });
  }
  return *state_->index;
}

bool IndexHandle::loaded() const { return state_->ready.load(std::memory_order_acquire); }

}  // namespace flowrank
