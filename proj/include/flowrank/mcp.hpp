#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowrank/algebra.hpp"

namespace flowrank::mcp {

inline constexpr const char* kProtocolVersion = "2025-03-26";
inline constexpr const char* kServerName = "flowrank";
inline constexpr const char* kServerVersion = "0.1.0";

struct ToolDescriptor {
  std::string name;
  std::string description;
  nlohmann::ordered_json input_schema;
  std::vector<std::string> output_columns;

  nlohmann::ordered_json to_json() const;
};

// Only pipelines that accept a query frame {qid, query} are servable;
// anything else raises NotServable carrying the validation message.
ToolDescriptor tool_descriptor(const std::string& name, const PipelineNode& node,
                               const std::string& description);

struct RegisteredPipeline {
  std::string name;
  PipelineNode node;
  std::string description;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 picks a free port
  std::vector<RegisteredPipeline> pipelines;
  std::string protocol_version = kProtocolVersion;
};

// JSON row: text as strings, float64 rounded to six decimals, int64 as integers.
nlohmann::ordered_json row_to_json(const Relation& rel, std::size_t row);
nlohmann::ordered_json rows_to_json(const Relation& rel);

// Transport-independent JSON-RPC 2.0 handler for initialize, tools/list and tools/call.
class Service {
 public:
  explicit Service(ServerConfig config);

  const std::vector<ToolDescriptor>& tools() const noexcept { return tools_; }

  // Response body for one request body; empty for notifications.
  std::string handle(std::string_view body) const;

 private:
  nlohmann::ordered_json dispatch(const nlohmann::json& request) const;
  nlohmann::ordered_json call_tool(const nlohmann::json& params) const;

  ServerConfig config_;
  std::vector<ToolDescriptor> tools_;
};

// HTTP front end: POST /mcp. Listens on a background thread until stopped.
class Server {
 public:
  // Honors FLOWRANK_MCP_PORT over config.port. Throws BindError.
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  int port() const noexcept;
  const std::string& host() const noexcept;
  void stop();
  // Blocks until stop() is called from elsewhere.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Port after applying the FLOWRANK_MCP_PORT override.
int resolve_port(int configured);

}  // namespace flowrank::mcp
