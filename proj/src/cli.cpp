#include "flowrank/cli.hpp"

#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "flowrank/dsl.hpp"
#include "flowrank/inspect.hpp"
#include "flowrank/mcp.hpp"
#include "flowrank/schematic.hpp"

namespace flowrank::cli {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// `@file` reads the expression from a file.
std::string pipeline_source(const std::string& arg) {
  return (!arg.empty() && arg.front() == '@') ? read_file(arg.substr(1)) : arg;
}

ColumnSet parse_columns(const std::string& csv) {
  ColumnSet out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(' ');
    auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.insert(item.substr(b, e - b + 1));
  }
  return out;
}

struct Options {
  std::string corpus, out_dir, index, pipeline, topics, tag = "flowrank", input_columns = "qid,query",
                                                          format = "text", out_file, host = "127.0.0.1";
  std::vector<std::string> pipelines;
  int port = 8765;
};

int cmd_index(const Options& o, std::ostream& out) {
  auto stats = build_index(read_corpus_jsonl(o.corpus), o.out_dir);
  out << "indexed " << stats.n_docs << " documents, " << stats.total_tokens << " tokens (avg "
      << format_fixed6(stats.avg_doc_len) << ") into " << o.out_dir << '\n';
  return 0;
}

int cmd_search(const Options& o, std::ostream& out) {
  IndexHandle index(o.index);
  const auto node = compile(pipeline_source(o.pipeline), builtin_registry(index));
  std::ifstream topics(o.topics);
  if (!topics) throw IoError("cannot read " + o.topics);
  const Relation result = execute(node, read_queries_tsv(topics));
  const auto cols = result.columns();
  if (cols.count("qid") && cols.count("docno") && cols.count("rank") && cols.count("score")) {
    write_trec_run(result, out, o.tag);
  } else if (cols.count("qid") && cols.count("qanswer")) {
    const auto qid = *result.schema().index_of("qid");
    const auto answer = *result.schema().index_of("qanswer");
    for (std::size_t r = 0; r < result.size(); ++r)
      out << result.text(r, qid) << '\t' << result.text(r, answer) << '\n';
  } else {
    throw InvalidPipeline("pipeline output " + format_columns(cols) +
                          " is neither a result nor an answer frame");
  }
  return 0;
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  IndexHandle index(o.index);
  const auto node = compile(pipeline_source(o.pipeline), builtin_registry(index));
  const auto given = parse_columns(o.input_columns);
  const auto diag = validate(node, given);
  if (!diag.ok) {
    err << diag.message << '\n' << "missing " << format_columns(diag.missing) << '\n';
    return 1;
  }
  out << "ok: " << format_columns(given) << " -> " << format_columns(output_columns(node, given))
      << '\n';
  return 0;
}

int cmd_inspect(const Options& o, std::ostream& out) {
  IndexHandle index(o.index);
  const auto node = compile(pipeline_source(o.pipeline), builtin_registry(index));
  out << "pipeline: " << render(node) << '\n';
  out << "accepted inputs:\n";
  for (const auto& [in, produced] : io_report(node).outputs_for)
    out << "  " << format_columns(in) << " -> " << format_columns(produced) << '\n';
  out << "subtransformers:\n";
  for (const auto& [path, t] : subtransformers(node)) {
    out << "  " << format_path(path) << ' ' << t->name() << '\n';
    for (const auto& [k, v] : attributes(*t)) out << "      " << k << " = " << v << '\n';
  }
  return 0;
}

int cmd_schematic(const Options& o, std::ostream& out) {
  IndexHandle index(o.index);
  const auto node = compile(pipeline_source(o.pipeline), builtin_registry(index));
  const auto graph = build_schematic(node, parse_columns(o.input_columns));
  const std::string text = o.format == "html" ? render_html(graph) : render_text(graph);
  if (o.out_file.empty()) {
    out << text;
  } else {
    std::ofstream f(o.out_file, std::ios::binary);
    if (!f) throw IoError("cannot write " + o.out_file);
    f << text;
  }
  return 0;
}

int cmd_serve(const Options& o, std::ostream& out) {
  IndexHandle index(o.index);
  const auto registry = builtin_registry(index);
  mcp::ServerConfig config;
  config.host = o.host;
  config.port = o.port;
  for (const auto& spec : o.pipelines) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
      throw InvalidArgument("--pipelines expects name=expr, got '" + spec + "'");
    auto node = compile(pipeline_source(spec.substr(eq + 1)), registry);
    std::string description = "Runs the retrieval pipeline `" + render(node) +
                              "` over a batch of queries (qid, query).";
    config.pipelines.push_back({spec.substr(0, eq), std::move(node), std::move(description)});
  }
  index.get();  // fail before binding if the index is unusable
  mcp::Server server(std::move(config));
  out << "serving " << o.pipelines.size() << " pipeline(s) on http://" << server.host() << ':'
      << server.port() << "/mcp" << std::endl;
  server.wait();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"flowrank: declarative retrieval pipelines", "flowrank"};
  app.require_subcommand(1);
  Options o;

  auto* index = app.add_subcommand("index", "Build an index from a JSONL corpus");
  index->add_option("--corpus", o.corpus, "JSONL corpus, one {docno, text} per line")->required();
  index->add_option("--out", o.out_dir, "Output index directory")->required();

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--index", o.index, "Index directory")->required();
    sub->add_option("--pipeline", o.pipeline, "Pipeline expression or @file")->required();
  };
  auto* search = app.add_subcommand("search", "Run a pipeline over a topics file");
  add_common(search);
  search->add_option("--topics", o.topics, "Queries as qid<TAB>query")->required();
  search->add_option("--tag", o.tag, "Run tag for TREC output");

  auto* validate_cmd = app.add_subcommand("validate", "Check column flow without running anything");
  add_common(validate_cmd);
  validate_cmd->add_option("--input-columns", o.input_columns, "Comma-separated input columns");

  auto* inspect_cmd = app.add_subcommand("inspect", "Print inputs, outputs, subtransformers and attributes");
  add_common(inspect_cmd);

  auto* schematic = app.add_subcommand("schematic", "Render a pipeline diagram");
  add_common(schematic);
  schematic->add_option("--format", o.format, "html or text")
      ->check(CLI::IsMember({"html", "text"}))
      ->required();
  schematic->add_option("--out", o.out_file, "Write to a file instead of standard output");
  schematic->add_option("--input-columns", o.input_columns, "Comma-separated input columns");

  auto* serve = app.add_subcommand("serve", "Expose pipelines as MCP tools over HTTP");
  serve->add_option("--index", o.index, "Index directory")->required();
  serve->add_option("--pipelines", o.pipelines, "name=expr pairs")->required();
  serve->add_option("--port", o.port, "Port (FLOWRANK_MCP_PORT overrides)");
  serve->add_option("--host", o.host, "Bind address");

  std::vector<std::string> argv_store{"flowrank"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return 2;
  }

  try {
    if (*index) return cmd_index(o, out);
    if (*search) return cmd_search(o, out);
    if (*validate_cmd) return cmd_validate(o, out, err);
    if (*inspect_cmd) return cmd_inspect(o, out);
    if (*schematic) return cmd_schematic(o, out);
    if (*serve) return cmd_serve(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace flowrank::cli
