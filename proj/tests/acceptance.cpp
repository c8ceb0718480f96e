// Acceptance suite: one line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "flowrank/cli.hpp"
#include "flowrank/dsl.hpp"
#include "flowrank/inspect.hpp"
#include "flowrank/mcp.hpp"
#include "flowrank/schematic.hpp"
#include "support.hpp"

using namespace flowrank;
using namespace flowrank::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const ColumnSet kQ{"qid", "query"};
constexpr const char* kQaPipeline = "rrf(bm25, sdm >> wbm25) >> text_loader >> rescore >> answer";

// Collects failures; a criterion passes when none were recorded.
struct Check {
  std::vector<std::string> failures;
  std::string note;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    else if (!ok) failures.back() = "... and more";
  }
};

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (const auto& x : xs) out += (out.empty() ? "" : ", ") + x;
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

void inspection_facts(Check& c) {
  TempDir dir;
  auto bm25 = bm25_retriever(IndexHandle(dir.path() / "unbuilt"));
  c.expect(input_columns(bm25) == std::vector<ColumnSet>{{"qid", "query"}}, "input_columns(bm25)");
  c.expect(output_columns(bm25, kQ) == ColumnSet{"qid", "query", "docno", "rank", "score"},
           "output_columns(bm25, {qid, query})");
}

void validation_semantics(Check& c) {
  TempDir dir;
  IndexHandle lazy(dir.path() / "unbuilt");
  const auto reg = builtin_registry(lazy);
  const auto bad = validate(compile("bm25 >> rescore", reg), kQ);
  c.expect(!bad.ok, "bm25 >> rescore must fail");
  c.expect(bad.failing_path == NodePath{1}, "failure must be at [1], got " + format_path(bad.failing_path));
  c.expect(bad.node_name == "rescore", "failing node must be rescore");
  c.expect(bad.missing == ColumnSet{"text"}, "missing must be {text}, got " + format_columns(bad.missing));
  c.expect(bad.message.find("rescore requires") != std::string::npos, "message names the stage");
  c.expect(validate(compile("bm25 >> text_loader >> rescore", reg), kQ).ok, "bm25 >> text_loader >> rescore must pass");
  // Any transformer run would have had to load the (absent) index.
  c.expect(!lazy.loaded(), "validation touched the index");
  c.note = bad.message;
}

void soundness_agreement(Check& c) {
  std::mt19937_64 rng(2024);
  const auto leaves = all_leaves(toy5_index());
  const std::vector<ColumnSet> inputs{
      {"qid", "query"},
      {"qid", "query", "docno", "text"},
      {"qid", "query", "docno", "score", "rank"},
      {"qid", "query", "docno", "score", "rank", "text"},
      {"qid", "query", "docno", "score", "rank", "text", "extra"},
      {"qid", "query_vec"},
      {"qid", "query", "query_vec"},
      {"docno", "text"},
      {"docno"}};
  std::size_t valid = 0, trees_with_valid = 0;
  for (int i = 0; i < 500; ++i) {
    const auto node = random_tree(rng, leaves, 4);
    bool any = false;
    for (const auto& cols : inputs) {
      if (!validate(node, cols).ok) continue;
      any = true;
      ++valid;
      const auto rel = random_relation(rng, cols);
      const auto expected = output_columns(node, cols);
      try {
        const auto out = execute(node, rel);
        c.expect(out.columns() == expected, render(node) + " on " + format_columns(cols) + ": produced " +
                                                format_columns(out.columns()) + ", inspected " +
                                                format_columns(expected));
        c.expect(!check_frame_invariants(out), render(node) + ": output violates frame invariants");
      } catch (const MissingColumn& e) {
        c.expect(false, render(node) + " on " + format_columns(cols) + ": MissingColumn " + e.what());
      } catch (const Error& e) {
        c.expect(false, render(node) + " on " + format_columns(cols) + ": " + e.what());
      }
    }
    trees_with_valid += any;
  }
  c.expect(trees_with_valid >= 100, "too few valid trees to be meaningful");
  c.note = std::to_string(trees_with_valid) + " of 500 trees valid for some input, " +
           std::to_string(valid) + " executions";
}

// Independent rank: 1 + rows of the same qid strictly ahead by (score desc, docno asc).
std::map<std::pair<std::string, std::string>, std::int64_t> brute_ranks(const Relation& run) {
  const auto q = *run.schema().index_of("qid"), d = *run.schema().index_of("docno"),
             s = *run.schema().index_of("score");
  std::map<std::pair<std::string, std::string>, std::int64_t> out;
  for (std::size_t a = 0; a < run.size(); ++a) {
    std::int64_t ahead = 0;
    for (std::size_t b = 0; b < run.size(); ++b) {
      if (run.text(b, q) != run.text(a, q)) continue;
      const double sa = run.float64(a, s), sb = run.float64(b, s);
      ahead += sb > sa || (sb == sa && run.text(b, d) < run.text(a, d));
    }
    out[{run.text(a, q), run.text(a, d)}] = ahead + 1;
  }
  return out;
}

using Fused = std::map<std::pair<std::string, std::string>, double>;

// Expected (qid, docno, rank, score) rows in output order.
std::vector<std::tuple<std::string, std::string, std::int64_t, double>> order(const Fused& fused) {
  std::vector<std::tuple<std::string, std::string, double>> rows;
  for (const auto& [k, v] : fused) rows.emplace_back(k.first, k.second, v);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) > std::get<2>(b);
    return std::get<1>(a) < std::get<1>(b);
  });
  std::vector<std::tuple<std::string, std::string, std::int64_t, double>> out;
  std::int64_t r = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    r = (i && std::get<0>(rows[i]) == std::get<0>(rows[i - 1])) ? r + 1 : 0;
    out.emplace_back(std::get<0>(rows[i]), std::get<1>(rows[i]), r, std::get<2>(rows[i]));
  }
  return out;
}

void compare(Check& c, const Relation& got, const Fused& fused, double tol, const std::string& label) {
  const auto want = order(fused);
  if (got.size() != want.size()) {
    c.expect(false, label + ": row count " + std::to_string(got.size()) + " vs " + std::to_string(want.size()));
    return;
  }
  const auto q = *got.schema().index_of("qid"), d = *got.schema().index_of("docno"),
             k = *got.schema().index_of("rank"), s = *got.schema().index_of("score");
  for (std::size_t i = 0; i < want.size(); ++i) {
    const auto& [wq, wd, wr, ws] = want[i];
    c.expect(got.text(i, q) == wq && got.text(i, d) == wd && got.int64(i, k) == wr,
             label + ": row " + std::to_string(i) + " differs");
    c.expect(std::abs(got.float64(i, s) - ws) <= tol, label + ": score of " + wd);
  }
}

double sorted_sum(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return std::accumulate(xs.begin(), xs.end(), 0.0);
}

Relation query_frame_for(std::size_t n_qids) {
  std::vector<std::pair<std::string, std::string>> qs;
  for (std::size_t q = 0; q < n_qids; ++q) qs.emplace_back("q" + std::to_string(q), "x");
  return make_query_frame(qs);
}

std::vector<PipelineNode> as_leaves(const std::vector<Relation>& runs) {
  std::vector<PipelineNode> out;
  for (std::size_t i = 0; i < runs.size(); ++i) out.push_back(constant_run("run" + std::to_string(i), runs[i]));
  return out;
}

Relation remap(const Relation& run, const std::function<double(double)>& f) {
  const auto s = *run.schema().index_of("score");
  std::vector<Row> rows = run.rows();
  for (auto& row : rows) row[s] = f(std::get<double>(row[s]));
  return sort_and_rank(Relation(run.schema(), std::move(rows)));
}

void rrf_oracle(Check& c) {
  std::mt19937_64 rng(4242);
  const std::vector<std::function<double(double)>> maps{
      [](double x) { return 2 * x + 1; },
      [](double x) { return std::exp(x); },
      [](double x) { return x * x * x + 3 * x; },
      [](double x) { return std::atan(x) + 10; }};
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n_qids = 1 + rng() % 5, n_docs = 1 + rng() % 20, n_runs = 2 + rng() % 3;
    const bool ties = rng() % 2;
    std::vector<Relation> runs;
    for (std::size_t r = 0; r < n_runs; ++r) runs.push_back(random_run(rng, n_qids, n_docs, ties));

    std::map<std::pair<std::string, std::string>, std::vector<double>> parts;
    for (const auto& run : runs)
      for (const auto& [key, rank] : brute_ranks(run)) parts[key].push_back(1.0 / (60.0 + static_cast<double>(rank)));
    Fused fused;
    for (auto& [key, p] : parts) fused[key] = sorted_sum(p);

    const auto input = query_frame_for(n_qids);
    const auto got = execute(rr_fusion(as_leaves(runs)), input);
    compare(c, got, fused, 1e-12, "instance " + std::to_string(i));

    std::vector<Relation> mapped;
    for (const auto& run : runs) mapped.push_back(remap(run, maps[rng() % maps.size()]));
    c.expect(execute(rr_fusion(as_leaves(mapped)), input) == got,
             "instance " + std::to_string(i) + ": monotone rescaling changed the fused relation");
  }
}

void linear_oracle(Check& c) {
  std::mt19937_64 rng(777);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n_qids = 1 + rng() % 5, n_docs = 1 + rng() % 20, n_runs = 2 + rng() % 3;
    std::vector<Relation> runs;
    std::vector<double> weights;
    for (std::size_t r = 0; r < n_runs; ++r) {
      runs.push_back(random_run(rng, n_qids, n_docs, rng() % 2));
      weights.push_back(rng() % 5 == 0 ? 0.0 : std::uniform_real_distribution<double>(-2, 2)(rng));
    }

    // Zero-fill: every child contributes weight * score, or weight * 0 when absent.
    std::set<std::pair<std::string, std::string>> keys;
    std::vector<std::map<std::pair<std::string, std::string>, double>> scores(n_runs);
    for (std::size_t r = 0; r < n_runs; ++r) {
      const auto& run = runs[r];
      for (std::size_t j = 0; j < run.size(); ++j) {
        std::pair<std::string, std::string> key{run.text(j, 0), run.text(j, 1)};
        scores[r][key] = run.float64(j, 2);
        keys.insert(key);
      }
    }
    Fused fused;
    for (const auto& key : keys) {
      std::vector<double> p;
      for (std::size_t r = 0; r < n_runs; ++r) {
        auto it = scores[r].find(key);
        p.push_back(weights[r] * (it == scores[r].end() ? 0.0 : it->second));
      }
      fused[key] = sorted_sum(p);
    }
    compare(c, execute(linear(as_leaves(runs), weights), query_frame_for(n_qids)), fused, 1e-12,
            "instance " + std::to_string(i));
  }

  // A + A doubles scores and keeps the order.
  const auto qs = make_query_frame({{"q1", "quick fox"}, {"q2", "lazy dog"}, {"q3", "brown the"}});
  const PipelineNode a = bm25_retriever(toy5_index());
  const auto single = execute(a, qs);
  const auto doubled = execute(linear({a, a}, {1, 1}), qs);
  c.expect(single.size() == doubled.size(), "A + A row count");
  for (std::size_t i = 0; i < std::min(single.size(), doubled.size()); ++i) {
    c.expect(doubled.text(i, *doubled.schema().index_of("docno")) == single.text(i, *single.schema().index_of("docno")),
             "A + A order");
    c.expect(doubled.float64(i, *doubled.schema().index_of("score")) ==
                 2 * single.float64(i, *single.schema().index_of("score")),
             "A + A score");
  }
}

void bm25_oracle(Check& c) {
  const Bm25Oracle oracle(toy5());
  const std::vector<std::pair<std::string, std::string>> queries{{"q1", "quick fox"}, {"q2", "lazy dog"}};
  const auto got = execute(bm25_retriever(toy5_index()), make_query_frame(queries));
  Fused want;
  for (const auto& [qid, text] : queries)
    for (const auto& d : toy5())
      if (double s = oracle.score(text, d.docno); s > 0) want[{qid, d.docno}] = s;
  compare(c, got, want, 1e-9, "TOY5");
  double max_err = 0;
  for (std::size_t i = 0; i < got.size(); ++i)
    max_err = std::max(max_err, std::abs(got.float64(i, 4) - want[{got.text(i, 0), got.text(i, 2)}]));

  TempDir dir;
  {
    std::ofstream corpus(dir.path() / "toy.jsonl");
    for (const auto& d : toy5()) corpus << json{{"docno", d.docno}, {"text", d.text}}.dump() << '\n';
    std::ofstream topics(dir.path() / "q.tsv");
    for (const auto& [q, t] : queries) topics << q << '\t' << t << '\n';
  }
  std::vector<std::string> outputs;
  for (int run = 0; run < 2; ++run) {
    const auto ix = (dir.path() / ("ix" + std::to_string(run))).string();
    std::ostringstream out, err;
    c.expect(cli::run({"index", "--corpus", (dir.path() / "toy.jsonl").string(), "--out", ix}, out, err) == 0, "index");
    std::ostringstream run_out;
    c.expect(cli::run({"search", "--index", ix, "--pipeline", "bm25", "--topics", (dir.path() / "q.tsv").string()},
                      run_out, err) == 0,
             "search");
    outputs.push_back(run_out.str());
  }
  c.expect(!outputs[0].empty() && outputs[0] == outputs[1], "TREC output differs between runs");
  char buf[64];
  std::snprintf(buf, sizeof buf, "max |error| %.3g", max_err);
  c.note = buf;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

void schematic_golden(Check& c) {
  TempDir dir;
  const auto cwd = fs::current_path();
  fs::current_path(dir.path());
  std::vector<std::pair<std::string, std::string>> renders;
  try {
    build_index(toy5(), "golden_toy5");
    for (int run = 0; run < 2; ++run) {
      const auto reg = builtin_registry(IndexHandle("golden_toy5"));
      const auto g = build_schematic(compile(kQaPipeline, reg), kQ);
      renders.emplace_back(render_html(g), render_text(g));
    }
  } catch (...) {
    fs::current_path(cwd);
    throw;
  }
  fs::current_path(cwd);

  const auto& [html, text] = renders[0];
  c.expect(renders[0] == renders[1], "two consecutive renders differ");
  c.expect(count(html, "data-fusion=") == 1, "exactly one fusion element");
  c.expect(count(html, "data-path=") == 6, "six data-path boxes");
  static const std::regex frame("data-frame=\"([^\"]+)\"");
  std::string last;
  for (auto it = std::sregex_iterator(html.begin(), html.end(), frame); it != std::sregex_iterator(); ++it) last = (*it)[1];
  c.expect(last == "A", "last badge is " + last);

  const fs::path golden = FLOWRANK_GOLDEN_DIR;
  if (const char* update = std::getenv("FLOWRANK_UPDATE_GOLDEN"); update && *update == '1') {
    std::ofstream(golden / "qa_pipeline.html", std::ios::binary) << html;
    std::ofstream(golden / "qa_pipeline.txt", std::ios::binary) << text;
    c.note = "golden files rewritten";
  }
  c.expect(fs::exists(golden / "qa_pipeline.html") && slurp(golden / "qa_pipeline.html") == html, "HTML differs from golden");
  c.expect(fs::exists(golden / "qa_pipeline.txt") && slurp(golden / "qa_pipeline.txt") == text, "text differs from golden");
}

void mcp_conformance(Check& c) {
  const auto reg = builtin_registry(toy5_index());
  mcp::ServerConfig config;
  config.port = 0;
  config.pipelines.push_back({"bm25", compile("bm25", reg), "BM25 retrieval over the toy corpus."});
  mcp::Server server(config);
  httplib::Client client("127.0.0.1", server.port());
  auto post = [&](const std::string& body) -> nlohmann::ordered_json {
    auto res = client.Post("/mcp", body, "application/json");
    if (!res) {
      c.expect(false, "no HTTP response for " + body);
      return json::object();
    }
    return nlohmann::ordered_json::parse(res->body);
  };

  auto init = post(R"({"jsonrpc":"2.0","id":1,"method":"initialize","params":{}})");
  c.expect(init["jsonrpc"] == "2.0" && init["id"] == 1, "initialize envelope");
  c.expect(init["result"]["protocolVersion"] == "2025-03-26", "protocol version");

  auto list = post(R"({"jsonrpc":"2.0","id":2,"method":"tools/list"})");
  c.expect(list["id"] == 2, "tools/list id");
  const auto& tools = list["result"]["tools"];
  c.expect(tools.size() == 1 && tools[0]["name"] == "bm25", "one bm25 tool");
  const auto& schema = tools[0]["inputSchema"];
  c.expect(schema["required"] == json::array({"queries"}), "inputSchema requires queries");
  const auto& item = schema["properties"]["queries"]["items"];
  c.expect(schema["properties"]["queries"]["type"] == "array", "queries is an array");
  c.expect(item["required"] == json::array({"qid", "query"}), "items require qid and query");
  c.expect(item["properties"]["qid"]["type"] == "string" && item["properties"]["query"]["type"] == "string",
           "qid and query are strings");

  auto call = post(R"({"jsonrpc":"2.0","id":3,"method":"tools/call","params":{"name":"bm25",)"
                   R"("arguments":{"queries":[{"qid":"q1","query":"quick fox"}]}}})");
  c.expect(call["id"] == 3 && call["result"]["isError"] == false, "tools/call result");
  const auto local = execute(compile("bm25", reg), make_query_frame({{"q1", "quick fox"}}));
  c.expect(call["result"]["rows"].dump() == mcp::rows_to_json(local).dump(), "rows differ from in-process execute");
  c.expect(call["result"]["rows"].size() == local.size() && local.size() == 3, "row count");

  auto bad = post("not json");
  c.expect(bad["error"]["code"] == -32700 && bad.contains("id") && bad["id"].is_null(), "-32700 with null id");
  auto unknown = post(R"({"jsonrpc":"2.0","id":"abc","method":"no/such"})");
  c.expect(unknown["error"]["code"] == -32601 && unknown["id"] == "abc", "-32601 echoing id");
  server.stop();
  c.note = "port " + std::to_string(server.port());
}

void qa_end_to_end(Check& c) {
  const auto reg = builtin_registry(toy5_index());
  const auto out = execute(compile(kQaPipeline, reg), make_query_frame({{"q1", "quick fox"}, {"q2", "lazy dog"}}));
  c.expect(classify_frame(out.schema()) == FrameKind{FrameBase::A, false}, "output is an A frame");
  c.expect(out.size() == 2, "exactly two rows");
  std::set<std::string> qids;
  for (std::size_t i = 0; i < out.size(); ++i) {
    qids.insert(out.text(i, *out.schema().index_of("qid")));
    c.expect(!out.text(i, *out.schema().index_of("qanswer")).empty(), "non-empty qanswer");
  }
  c.expect(qids.size() == out.size(), "unique qids");
}

void dsl_round_trip(Check& c) {
  std::mt19937_64 rng(99);
  const auto reg = builtin_registry(toy5_index());
  for (int i = 0; i < 500; ++i) {
    const auto t = random_registry_tree(rng, reg, 4);
    const auto text = render(t);
    try {
      c.expect(elaborate(parse(text), reg) == t, "round trip failed for " + text);
    } catch (const Error& e) {
      c.expect(false, text + ": " + e.what());
    }
  }
  c.expect(parse("a >> b + c") == parse("a >> (b + c)"), "precedence");
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  void (*fn)(Check&);
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "inspection facts for bm25", 1, inspection_facts},
      {2, "validation names missing text before execution", 1, validation_semantics},
      {3, "soundness and agreement over 500 random trees", 30, soundness_agreement},
      {4, "reciprocal rank fusion oracle (1000 instances)", 30, rrf_oracle},
      {5, "linear combination oracle (1000 instances)", 30, linear_oracle},
      {6, "BM25 on TOY5 within 1e-9, stable TREC output", 1, bm25_oracle},
      {7, "QA pipeline schematic golden files", 1, schematic_golden},
      {8, "MCP HTTP session", 5, mcp_conformance},
      {9, "QA pipeline pipeline end to end", 1, qa_end_to_end},
      {10, "DSL round trip (500 trees) and precedence", 10, dsl_round_trip},
  };
  toy5_index().get();  // shared fixture, built outside the timed sections

  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.fn(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > cr.limit_s) check.expect(false, "took longer than the limit");
    const bool ok = check.failures.empty();
    failed += !ok;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.3fs / %gs", secs, cr.limit_s);
    std::cout << (ok ? "PASS" : "FAIL") << "  [" << cr.id << "] " << cr.name << "  (" << timing << ")";
    if (!check.note.empty()) std::cout << "  " << check.note;
    if (!ok) std::cout << "\n      " << join(check.failures);
    std::cout << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
