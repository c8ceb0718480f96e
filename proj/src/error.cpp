#include "flowrank/error.hpp"

namespace flowrank {

std::string format_path(const NodePath& path) {
  std::string out = "[";
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(path[i]);
  }
  return out + "]";
}

std::string dotted_path(const NodePath& path) {
  std::string out = "root";
  for (auto p : path) out += "." + std::to_string(p);
  return out;
}

std::string format_columns(const ColumnSet& cols) {
  std::string out = "{";
  bool first = true;
  for (const auto& c : cols) {
    if (!first) out += ", ";
    out += c;
    first = false;
  }
  return out + "}";
}

namespace {

std::string parse_message(std::size_t line, std::size_t column,
                          const std::vector<std::string>& expected, const std::string& found) {
  std::string msg = "parse error at " + std::to_string(line) + ":" + std::to_string(column) +
                    ": unexpected " + found + ", expected one of ";
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i) msg += ", ";
    msg += expected[i];
  }
  return msg;
}

}  // namespace

ParseError::ParseError(std::size_t line, std::size_t column, std::size_t offset,
                       std::vector<std::string> expected, const std::string& found)
    : Error(parse_message(line, column, expected, found)),
      line_(line),
      column_(column),
      offset_(offset),
      expected_(std::move(expected)) {}

}  // namespace flowrank
