#include "flowrank/mcp.hpp"

#include <cstdlib>
#include <set>
#include <thread>

#include <httplib.h>

#include "flowrank/dsl.hpp"
#include "flowrank/inspect.hpp"

namespace flowrank::mcp {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const ColumnSet kQueryFrame{"qid", "query"};

struct RpcError {
  int code;
  std::string message;
};

constexpr int kParseError = -32700;
constexpr int kInvalidRequest = -32600;
constexpr int kMethodNotFound = -32601;
constexpr int kInvalidParams = -32602;

double round6(double v) { return std::strtod(format_fixed6(v).c_str(), nullptr); }

ordered_json value_to_json(const Value& v) {
  struct {
    ordered_json operator()(std::monostate) const { return nullptr; }
    ordered_json operator()(const std::string& s) const { return s; }
    ordered_json operator()(double d) const { return round6(d); }
    ordered_json operator()(std::int64_t i) const { return i; }
    ordered_json operator()(const FloatVector& xs) const {
      auto arr = ordered_json::array();
      for (double x : xs) arr.push_back(round6(x));
      return arr;
    }
  } visitor;
  return std::visit(visitor, v);
}

std::string rows_as_text(const Relation& rel) {
  std::string out;
  for (std::size_t c = 0; c < rel.schema().size(); ++c)
    out += (c ? "\t" : "") + rel.schema()[c].name;
  out += '\n';
  for (std::size_t r = 0; r < rel.size(); ++r) {
    for (std::size_t c = 0; c < rel.schema().size(); ++c) {
      const auto j = value_to_json(rel.rows()[r][c]);
      out += (c ? "\t" : "") + (j.is_string() ? j.get<std::string>() : j.dump());
    }
    out += '\n';
  }
  return out;
}

ordered_json error_response(const json& id, int code, const std::string& message) {
  ordered_json r;
  r["jsonrpc"] = "2.0";
  r["id"] = id;
  r["error"] = {{"code", code}, {"message", message}};
  return r;
}

}  // namespace

ordered_json ToolDescriptor::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["description"] = description;
  j["inputSchema"] = input_schema;
  j["outputColumns"] = output_columns;
  return j;
}

ToolDescriptor tool_descriptor(const std::string& name, const PipelineNode& node,
                               const std::string& description) {
  auto diag = validate(node, kQueryFrame);
  if (!diag.ok) throw NotServable("pipeline '" + name + "' is not servable: " + diag.message);

  ToolDescriptor t;
  t.name = name;
  t.description = description;
  t.output_columns = display_order(output_columns(node, kQueryFrame));

  ordered_json item;
  item["type"] = "object";
  item["properties"] = {{"qid", {{"type", "string"}, {"description", "Query identifier"}}},
                        {"query", {{"type", "string"}, {"description", "Query text"}}}};
  item["required"] = {"qid", "query"};
  ordered_json schema;
  schema["type"] = "object";
  schema["properties"]["queries"] = {{"type", "array"},
                                     {"description", "Queries to run through the pipeline"},
                                     {"items", item}};
  schema["required"] = {"queries"};
  t.input_schema = std::move(schema);
  return t;
}

ordered_json row_to_json(const Relation& rel, std::size_t row) {
  ordered_json j = ordered_json::object();
  for (std::size_t c = 0; c < rel.schema().size(); ++c)
    j[rel.schema()[c].name] = value_to_json(rel.rows()[row][c]);
  return j;
}

ordered_json rows_to_json(const Relation& rel) {
  auto arr = ordered_json::array();
  for (std::size_t r = 0; r < rel.size(); ++r) arr.push_back(row_to_json(rel, r));
  return arr;
}

// ---------------------------------------------------------------------------

Service::Service(ServerConfig config) : config_(std::move(config)) {
  std::set<std::string> names;
  for (const auto& p : config_.pipelines) {
    if (!names.insert(p.name).second) throw InvalidArgument("duplicate tool name '" + p.name + "'");
    tools_.push_back(tool_descriptor(p.name, p.node, p.description));
  }
}

std::string Service::handle(std::string_view body) const {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::parse_error&) {
    return error_response(nullptr, kParseError, "Parse error").dump();
  }

  if (!request.is_object()) return error_response(nullptr, kInvalidRequest, "Invalid Request").dump();
  const bool has_id = request.contains("id");
  json id = nullptr;
  if (has_id) {
    const auto& raw = request["id"];
    if (!(raw.is_string() || raw.is_number() || raw.is_null()))
      return error_response(nullptr, kInvalidRequest, "Invalid Request: bad id").dump();
    id = raw;
  }
  auto version = request.find("jsonrpc");
  auto method = request.find("method");
  auto params = request.find("params");
  if (version == request.end() || *version != "2.0" || method == request.end() ||
      !method->is_string() ||
      (params != request.end() && !params->is_object() && !params->is_array()))
    return error_response(id, kInvalidRequest, "Invalid Request").dump();

  ordered_json result;
  try {
    result = dispatch(request);
  } catch (const RpcError& e) {
    return has_id ? error_response(id, e.code, e.message).dump() : std::string();
  }
  if (!has_id) return {};
  ordered_json r;
  r["jsonrpc"] = "2.0";
  r["id"] = id;
  r["result"] = std::move(result);
  return r.dump();
}

ordered_json Service::dispatch(const json& request) const {
  const auto method = request["method"].get<std::string>();
  const json params = request.value("params", json::object());

  if (method == "initialize") {
    ordered_json r;
    r["protocolVersion"] = config_.protocol_version;
    r["capabilities"] = {{"tools", {{"listChanged", false}}}};
    r["serverInfo"] = {{"name", kServerName}, {"version", kServerVersion}};
    return r;
  }
  if (method == "ping") return ordered_json::object();
  if (method == "tools/list") {
    ordered_json r;
    r["tools"] = ordered_json::array();
    for (const auto& t : tools_) r["tools"].push_back(t.to_json());
    return r;
  }
  if (method == "tools/call") return call_tool(params);
  if (method.rfind("notifications/", 0) == 0) return ordered_json::object();
  throw RpcError{kMethodNotFound, "Method not found: " + method};
}

ordered_json Service::call_tool(const json& params) const {
  if (!params.is_object() || !params.contains("name") || !params["name"].is_string())
    throw RpcError{kInvalidParams, "tools/call requires a string 'name'"};
  const auto name = params["name"].get<std::string>();
  const RegisteredPipeline* target = nullptr;
  for (const auto& p : config_.pipelines)
    if (p.name == name) target = &p;
  if (!target) throw RpcError{kInvalidParams, "unknown tool '" + name + "'"};

  const json args = params.value("arguments", json::object());
  if (!args.is_object() || !args.contains("queries") || !args["queries"].is_array())
    throw RpcError{kInvalidParams, "arguments.queries must be an array"};
  std::vector<std::pair<std::string, std::string>> queries;
  for (const auto& q : args["queries"]) {
    if (!q.is_object() || !q.contains("qid") || !q["qid"].is_string() || !q.contains("query") ||
        !q["query"].is_string())
      throw RpcError{kInvalidParams, "each query needs string 'qid' and 'query'"};
    queries.emplace_back(q["qid"].get<std::string>(), q["query"].get<std::string>());
  }

  ordered_json r;
  try {
    const Relation input = make_query_frame(queries);
    const Relation out = execute(target->node, input);
    r["content"] = ordered_json::array({{{"type", "text"}, {"text", rows_as_text(out)}}});
    r["rows"] = rows_to_json(out);
    r["isError"] = false;
  } catch (const InvalidInput& e) {
    throw RpcError{kInvalidParams, e.what()};
  } catch (const Error& e) {
    r = ordered_json::object();
    r["content"] = ordered_json::array({{{"type", "text"}, {"text", e.what()}}});
    r["isError"] = true;
  }
  return r;
}

// ---------------------------------------------------------------------------

int resolve_port(int configured) {
  const char* env = std::getenv("FLOWRANK_MCP_PORT");
  if (!env || !*env) return configured;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0 || v > 65535)
    throw InvalidArgument(std::string("FLOWRANK_MCP_PORT is not a port: ") + env);
  return static_cast<int>(v);
}

struct Server::Impl {
  Service service;
  httplib::Server http;
  std::string host;
  int port = 0;
  std::thread thread;

  explicit Impl(ServerConfig config) : service(config), host(config.host) {}
};

Server::Server(ServerConfig config) {
  const int wanted = resolve_port(config.port);
  impl_ = std::make_unique<Impl>(std::move(config));
  auto* impl = impl_.get();
  impl->http.Post("/mcp", [impl](const httplib::Request& req, httplib::Response& res) {
    auto body = impl->service.handle(req.body);
    if (body.empty()) {
      res.status = 202;
      return;
    }
    res.set_content(body, "application/json");
  });

  // httplib's default also sets SO_REUSEPORT, which would let two servers share a port.
  impl->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  if (wanted == 0) {
    impl->port = impl->http.bind_to_any_port(impl->host);
    if (impl->port < 0) throw BindError("cannot bind " + impl->host + " on any port");
  } else {
    if (!impl->http.bind_to_port(impl->host, wanted))
      throw BindError("cannot bind " + impl->host + ":" + std::to_string(wanted));
    impl->port = wanted;
  }
  impl->thread = std::thread([impl] { impl->http.listen_after_bind(); });
  impl->http.wait_until_ready();
}

Server::~Server() { stop(); }

int Server::port() const noexcept { return impl_->port; }
const std::string& Server::host() const noexcept { return impl_->host; }

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void Server::wait() {
  if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace flowrank::mcp
