#include "flowrank/dsl.hpp"

namespace flowrank {

namespace {

double num(const std::map<std::string, AttrValue>& args, const std::string& key) {
  return std::get<double>(args.at(key));
}

std::int64_t integer(const std::map<std::string, AttrValue>& args, const std::string& key) {
  return std::get<std::int64_t>(args.at(key));
}

std::vector<ParamSpec> bm25_params(bool with_num_results) {
  const Bm25Params d;
  std::vector<ParamSpec> p{{"k1", d.k1}, {"b", d.b}};
  if (with_num_results) p.push_back({"num_results", d.num_results});
  return p;
}

Bm25Params bm25_args(const std::map<std::string, AttrValue>& args) {
  Bm25Params p;
  p.k1 = num(args, "k1");
  p.b = num(args, "b");
  if (args.count("num_results")) p.num_results = integer(args, "num_results");
  return p;
}

}  // namespace

Registry builtin_registry(const IndexHandle& index) {
  Registry r;
  r.add("bm25", {bm25_params(true), [index](const auto& args) {
                   return bm25_retriever(index, bm25_args(args));
                 }});
  r.add("wbm25", {bm25_params(true), [index](const auto& args) {
                    return weighted_bm25_retriever(index, bm25_args(args));
                  }});
  const SdmParams sdm;
  r.add("sdm", {{{"lambda_t", sdm.lambda_t}, {"lambda_o", sdm.lambda_o}}, [](const auto& args) {
                  return sdm_rewriter({num(args, "lambda_t"), num(args, "lambda_o")});
                }});
  r.add("text_loader", {{}, [index](const auto&) { return text_loader(index); }});
  r.add("rescore", {bm25_params(false), [](const auto& args) {
                      return lexical_rescorer(bm25_args(args));
                    }});
  r.add("answer", {{{"max_passages", std::int64_t{3}}}, [](const auto& args) {
                     return extractive_answerer(integer(args, "max_passages"));
                   }});
  return r;
}

}  // namespace flowrank
