#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clb {

struct Embedding {
  std::vector<double> values;
  double norm = 0.0;

  std::size_t dim() const { return values.size(); }
  bool operator==(const Embedding&) const = default;
};

enum class EmbedMode { hashed_tf, external };

struct EmbedderConfig {
  std::size_t dim = 32;
  EmbedMode mode = EmbedMode::hashed_tf;
  std::optional<std::filesystem::path> external_path;
};

Embedding make_embedding(std::vector<double> values);

// Signed feature hashing of retrieval tokens into `dim` buckets, L2
// normalised. Text without tokens maps to the zero vector.
Embedding hashed_embedding(std::string_view text, std::size_t dim);

double cosine(const Embedding& a, const Embedding& b);

// (file ‖ report); dimensions must agree.
Embedding combine(const Embedding& file_emb, const Embedding& report_emb);

// Produces embeddings for code units and bug reports. In external mode the
// vectors come from a JSON map keyed by unit id, with reports under
// "report:<bug id>".
class Embedder {
 public:
  explicit Embedder(EmbedderConfig cfg);

  const EmbedderConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.dim; }

  // `key` is the unit id or "report:<bug id>"; used only in external mode.
  Embedding embed(std::string_view key, std::string_view text) const;

 private:
  EmbedderConfig cfg_;
  std::unordered_map<std::string, std::vector<double>> external_;
};

}  // namespace clb
