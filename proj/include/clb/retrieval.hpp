#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace clb {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  bool operator==(const Bm25Params&) const = default;
};

struct Posting {
  std::uint32_t doc = 0;  // index into Bm25Index::doc_ids
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

struct ScoredDoc {
  std::string id;
  double score = 0.0;
};

// In-memory BM25 inverted index. Immutable after build_index.
class Bm25Index {
 public:
  std::vector<std::string> doc_ids;
  std::vector<std::uint32_t> doc_lengths;
  std::map<std::string, std::vector<Posting>> postings;
  double avg_doc_length = 0.0;
  Bm25Params params;

  std::size_t n_docs() const { return doc_ids.size(); }
  double idf(std::string_view term) const;

  bool operator==(const Bm25Index&) const = default;
};

// Throws ValidationError on duplicate ids.
Bm25Index build_index(const std::vector<std::pair<std::string, std::string>>& docs,
                      Bm25Params params = {});

// Documents with a positive score, highest first, ties by id ascending; at
// most k results. `allowed` (indexed by doc position) restricts the result
// set without changing collection statistics.
std::vector<ScoredDoc> query_top_k(const Bm25Index& index, std::string_view query, std::size_t k,
                                   const std::vector<bool>* allowed = nullptr);

nlohmann::json index_stats(const Bm25Index& index, bool with_postings = false);

}  // namespace clb
