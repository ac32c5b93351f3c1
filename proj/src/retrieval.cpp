#include "clb/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "clb/error.hpp"
#include "clb/tokenize.hpp"

namespace clb {

double Bm25Index::idf(std::string_view term) const {
  auto it = postings.find(std::string(term));
  const double df = it == postings.end() ? 0.0 : static_cast<double>(it->second.size());
  const double n = static_cast<double>(n_docs());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

Bm25Index build_index(const std::vector<std::pair<std::string, std::string>>& docs,
                      Bm25Params params) {
  Bm25Index index;
  index.params = params;
  std::unordered_set<std::string> seen;
  std::uint64_t total = 0;
  for (std::uint32_t d = 0; d < docs.size(); ++d) {
    const auto& [id, text] = docs[d];
    if (!seen.insert(id).second) throw ValidationError("duplicate document id '" + id + "'");
    const auto tokens = tokenize(text);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) index.postings[term].push_back({d, count});
    index.doc_ids.push_back(id);
    index.doc_lengths.push_back(static_cast<std::uint32_t>(tokens.size()));
    total += tokens.size();
  }
  index.avg_doc_length =
      docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
  return index;
}

std::vector<ScoredDoc> query_top_k(const Bm25Index& index, std::string_view query, std::size_t k,
                                   const std::vector<bool>* allowed) {
  if (k == 0) throw ValidationError("query_top_k: k must be >= 1");
  const auto tokens = tokenize(query);
  const std::set<std::string> terms(tokens.begin(), tokens.end());
  std::vector<double> scores(index.n_docs(), 0.0);
  const double k1 = index.params.k1;
  const double b = index.params.b;
  const double avg = index.avg_doc_length > 0 ? index.avg_doc_length : 1.0;
  for (const auto& term : terms) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const double idf = index.idf(term);
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double len = index.doc_lengths[p.doc];
      scores[p.doc] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
    }
  }
  std::vector<std::uint32_t> hits;
  for (std::uint32_t d = 0; d < scores.size(); ++d) {
    if (scores[d] > 0.0 && (!allowed || (*allowed)[d])) hits.push_back(d);
  }
  std::sort(hits.begin(), hits.end(), [&](std::uint32_t a, std::uint32_t c) {
    if (scores[a] != scores[c]) return scores[a] > scores[c];
    return index.doc_ids[a] < index.doc_ids[c];
  });
  if (hits.size() > k) hits.resize(k);
  std::vector<ScoredDoc> out;
  out.reserve(hits.size());
  for (auto d : hits) out.push_back({index.doc_ids[d], scores[d]});
  return out;
}

nlohmann::json index_stats(const Bm25Index& index, bool with_postings) {
  nlohmann::json j = {{"n_docs", index.n_docs()},
                      {"n_terms", index.postings.size()},
                      {"avg_doc_length", index.avg_doc_length},
                      {"k1", index.params.k1},
                      {"b", index.params.b}};
  if (with_postings) {
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [term, list] : index.postings) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& e : list) arr.push_back({index.doc_ids[e.doc], e.tf});
      p[term] = std::move(arr);
    }
    j["postings"] = std::move(p);
    j["doc_lengths"] = index.doc_lengths;
    j["doc_ids"] = index.doc_ids;
  }
  return j;
}

}  // namespace clb
