#include "clb/embed.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "clb/error.hpp"
#include "clb/tokenize.hpp"

namespace clb {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Embedding make_embedding(std::vector<double> values) {
  double sq = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("embedding has a non-finite entry");
    sq += v * v;
  }
  return Embedding{std::move(values), std::sqrt(sq)};
}

Embedding hashed_embedding(std::string_view text, std::size_t dim) {
  if (dim == 0) throw ValidationError("embedding dimension must be >= 1");
  std::vector<double> v(dim, 0.0);
  for (const auto& tok : tokenize(text)) {
    const auto h = fnv1a(tok);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[h % dim] += sign;
  }
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
  }
  return make_embedding(std::move(v));
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) throw ValidationError("cosine: dimension mismatch");
  if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a.values[i] * b.values[i];
  return dot / (a.norm * b.norm);
}

Embedding combine(const Embedding& file_emb, const Embedding& report_emb) {
  if (file_emb.dim() != report_emb.dim()) {
    throw ValidationError("combine: dimension mismatch (" + std::to_string(file_emb.dim()) +
                          " vs " + std::to_string(report_emb.dim()) + ")");
  }
  std::vector<double> v;
  v.reserve(2 * file_emb.dim());
  v.insert(v.end(), file_emb.values.begin(), file_emb.values.end());
  v.insert(v.end(), report_emb.values.begin(), report_emb.values.end());
  return Embedding{std::move(v), std::hypot(file_emb.norm, report_emb.norm)};
}

Embedder::Embedder(EmbedderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.dim == 0) throw ValidationError("embedding dimension must be >= 1");
  if (cfg_.mode != EmbedMode::external) return;
  if (!cfg_.external_path) throw ValidationError("external embedding mode requires a file path");
  std::ifstream in(*cfg_.external_path);
  if (!in) {
    throw ValidationError("cannot read embeddings file '" + cfg_.external_path->string() + "'");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("embeddings file: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ParseError("embeddings file: expected an object of id -> array");
  for (const auto& [key, arr] : j.items()) {
    auto v = arr.get<std::vector<double>>();
    if (v.size() != cfg_.dim) {
      throw ValidationError("embedding '" + key + "' has dimension " + std::to_string(v.size()) +
                            ", expected " + std::to_string(cfg_.dim));
    }
    external_.emplace(key, std::move(v));
  }
}

Embedding Embedder::embed(std::string_view key, std::string_view text) const {
  if (cfg_.mode == EmbedMode::hashed_tf) return hashed_embedding(text, cfg_.dim);
  auto it = external_.find(std::string(key));
  if (it == external_.end()) {
    throw ValidationError("no external embedding for id '" + std::string(key) + "'");
  }
  return make_embedding(it->second);
}

}  // namespace clb
