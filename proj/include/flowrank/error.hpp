#pragma once

#include <exception>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace flowrank {

using ColumnSet = std::set<std::string>;

// Position of a node inside a pipeline tree; empty for the root.
using NodePath = std::vector<std::size_t>;

std::string format_path(const NodePath& path);  // "[0, 1]"
std::string dotted_path(const NodePath& path);  // "root.0.1"
std::string format_columns(const ColumnSet& cols);  // "{docno, qid}"

// Base of every domain error. Execution wraps errors with the path of the
// pipeline node that raised them.
class Error : public std::exception {
 public:
  explicit Error(std::string message) : message_(std::move(message)) { rebuild(); }

  const char* what() const noexcept override { return what_.c_str(); }
  const std::string& message() const noexcept { return message_; }

  bool has_path() const noexcept { return has_path_; }
  const NodePath& path() const noexcept { return path_; }
  void set_path(NodePath path, std::string node_name) {
    if (has_path_) return;  // innermost node wins
    has_path_ = true;
    path_ = std::move(path);
    node_name_ = std::move(node_name);
    rebuild();
  }

 private:
  void rebuild() {
    what_ = has_path_ ? "at " + format_path(path_) + " (" + node_name_ + "): " + message_
                      : message_;
  }

  std::string message_;
  NodePath path_;
  std::string node_name_;
  bool has_path_ = false;
  std::string what_;
};

#define FLOWRANK_ERROR(Name)               \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

FLOWRANK_ERROR(InvalidArgument);
FLOWRANK_ERROR(SchemaError);
FLOWRANK_ERROR(UnknownDocno);
FLOWRANK_ERROR(DuplicateDocno);
FLOWRANK_ERROR(EmptyCorpus);
FLOWRANK_ERROR(IoError);
FLOWRANK_ERROR(CorruptIndex);
FLOWRANK_ERROR(VersionMismatch);
FLOWRANK_ERROR(EmptyQuery);
FLOWRANK_ERROR(WeightLengthMismatch);
FLOWRANK_ERROR(InvalidK);
FLOWRANK_ERROR(InvalidPipeline);
FLOWRANK_ERROR(Uninspectable);
FLOWRANK_ERROR(UnknownTransformer);
FLOWRANK_ERROR(NotServable);
FLOWRANK_ERROR(BindError);
FLOWRANK_ERROR(InvalidInput);
FLOWRANK_ERROR(SpecViolation);

#undef FLOWRANK_ERROR

class MissingColumn : public Error {
 public:
  MissingColumn(std::string message, ColumnSet missing)
      : Error(std::move(message)), missing_(std::move(missing)) {}
  const ColumnSet& missing() const noexcept { return missing_; }

 private:
  ColumnSet missing_;
};

class MalformedWeightedQuery : public Error {
 public:
  MalformedWeightedQuery(std::string message, std::size_t offset)
      : Error(std::move(message) + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class BadArgument : public Error {
 public:
  BadArgument(std::string transformer, std::string kwarg, const std::string& reason)
      : Error("bad argument '" + kwarg + "' for " + transformer + ": " + reason),
        transformer_(std::move(transformer)),
        kwarg_(std::move(kwarg)) {}
  const std::string& transformer() const noexcept { return transformer_; }
  const std::string& kwarg() const noexcept { return kwarg_; }

 private:
  std::string transformer_;
  std::string kwarg_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, std::size_t offset,
             std::vector<std::string> expected, const std::string& found);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::size_t offset_;
  std::vector<std::string> expected_;
};

}  // namespace flowrank
