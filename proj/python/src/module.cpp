#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "flowrank/dsl.hpp"
#include "flowrank/index.hpp"
#include "flowrank/inspect.hpp"
#include "flowrank/schematic.hpp"

namespace py = pybind11;
using namespace flowrank;

namespace {

py::object to_py(const Value& v) {
  struct {
    py::object operator()(std::monostate) const { return py::none(); }
    py::object operator()(const std::string& s) const { return py::str(s); }
    py::object operator()(double d) const { return py::float_(d); }
    py::object operator()(std::int64_t i) const { return py::int_(i); }
    py::object operator()(const FloatVector& xs) const { return py::cast(xs); }
  } visitor;
  return std::visit(visitor, v);
}

py::list rows_to_py(const Relation& rel) {
  py::list out;
  for (const auto& row : rel.rows()) {
    py::dict d;
    for (std::size_t c = 0; c < rel.schema().size(); ++c) d[py::str(rel.schema()[c].name)] = to_py(row[c]);
    out.append(std::move(d));
  }
  return out;
}

// A compiled expression bound to one index.
class Pipeline {
 public:
  Pipeline(const std::string& index_dir, const std::string& expr)
      : index_(index_dir), node_(compile(expr, builtin_registry(index_))) {}

  std::string render() const { return flowrank::render(node_); }

  py::dict validate(const ColumnSet& given) const {
    const auto diag = flowrank::validate(node_, given);
    py::dict d;
    d["ok"] = diag.ok;
    d["message"] = diag.message;
    d["missing"] = display_order(diag.missing);
    d["path"] = diag.failing_path;
    return d;
  }

  std::vector<std::string> output_columns(const ColumnSet& given) const {
    return display_order(flowrank::output_columns(node_, given));
  }

  py::dict inspect() const {
    py::dict d;
    py::list inputs;
    for (const auto& in : input_columns(node_)) inputs.append(display_order(in));
    d["inputs"] = inputs;
    py::list subs;
    for (const auto& [path, t] : subtransformers(node_)) {
      py::dict s;
      s["path"] = path;
      s["name"] = t->name();
      s["attributes"] = attributes(*t);
      subs.append(std::move(s));
    }
    d["subtransformers"] = subs;
    return d;
  }

  py::list execute(const std::vector<std::pair<std::string, std::string>>& queries) const {
    Relation out;
    {
      py::gil_scoped_release release;
      out = flowrank::execute(node_, make_query_frame(queries));
    }
    return rows_to_py(out);
  }

  std::string schematic(const std::string& format, const ColumnSet& given) const {
    const auto g = build_schematic(node_, given);
    if (format == "html") return render_html(g);
    if (format == "text") return render_text(g);
    throw InvalidArgument("format must be 'html' or 'text'");
  }

 private:
  IndexHandle index_;
  PipelineNode node_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "flowrank native core";
  py::register_exception<Error>(m, "FlowrankError");

  m.def("tokenize", [](const std::string& text) { return tokenize(text); });
  m.def(
      "build_index",
      [](const std::string& corpus, const std::string& out_dir) {
        const auto stats = flowrank::build_index(read_corpus_jsonl(corpus), out_dir);
        py::dict d;
        d["n_docs"] = stats.n_docs;
        d["total_tokens"] = stats.total_tokens;
        d["avg_doc_len"] = stats.avg_doc_len;
        return d;
      },
      py::arg("corpus"), py::arg("out_dir"));

  py::class_<Pipeline>(m, "Pipeline")
      .def(py::init<const std::string&, const std::string&>(), py::arg("index"), py::arg("expr"))
      .def("render", &Pipeline::render)
      .def("__str__", &Pipeline::render)
      .def("validate", &Pipeline::validate, py::arg("columns"))
      .def("output_columns", &Pipeline::output_columns, py::arg("columns"))
      .def("inspect", &Pipeline::inspect)
      .def("execute", &Pipeline::execute, py::arg("queries"))
      .def("schematic", &Pipeline::schematic, py::arg("format") = "text",
           py::arg("columns") = ColumnSet{"qid", "query"});
}
