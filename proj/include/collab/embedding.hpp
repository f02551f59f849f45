#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "collab/gateway.hpp"

namespace collab {

// Replays recorded vectors keyed by exact text. Fixture files are JSONL with
// one {"text", "model_id", "vector"} object per line. Unknown texts raise
// FixtureMissError.
class FixtureEmbedder : public EmbeddingBackend {
 public:
  FixtureEmbedder() = default;
  explicit FixtureEmbedder(std::string model_id) : model_id_(std::move(model_id)) {}

  static FixtureEmbedder load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void add(const std::string& text, const EmbeddingVector& vector);
  bool contains(const std::string& text) const;
  std::size_t size() const { return vectors_.size(); }

  EmbeddingBatch embed(const std::vector<std::string>& texts) override;
  std::string model_id() const override { return model_id_; }

 private:
  std::string model_id_;
  std::map<std::string, EmbeddingVector> vectors_;
};

// Deterministic offline embedder: signed feature hashing of lower-cased word
// unigrams and bigrams, L2-normalized. Lexical only; useful for plumbing and
// clustering tests, not as a stand-in for a semantic model.
class HashingEmbedder : public EmbeddingBackend {
 public:
  explicit HashingEmbedder(Eigen::Index dimension = 3072) : dimension_(dimension) {}

  EmbeddingBatch embed(const std::vector<std::string>& texts) override;
  std::string model_id() const override { return "hashing-" + std::to_string(dimension_); }

  EmbeddingVector embed_one(const std::string& text) const;

 private:
  Eigen::Index dimension_;
};

// Forwards to another embedder and keeps every vector it returns, so that a
// live session can be frozen into a fixture file.
class RecordingEmbedder : public EmbeddingBackend {
 public:
  explicit RecordingEmbedder(std::shared_ptr<EmbeddingBackend> inner)
      : inner_(std::move(inner)), recorded_(inner_->model_id()) {}

  EmbeddingBatch embed(const std::vector<std::string>& texts) override;
  std::string model_id() const override { return inner_->model_id(); }
  bool is_live() const override { return inner_->is_live(); }

  const FixtureEmbedder& recorded() const { return recorded_; }

 private:
  std::shared_ptr<EmbeddingBackend> inner_;
  FixtureEmbedder recorded_;
  std::mutex mutex_;
};

}  // namespace collab
