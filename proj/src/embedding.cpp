#include "collab/embedding.hpp"

#include <json.hpp>

#include <cctype>
#include <fstream>

#include "collab/rng.hpp"

namespace collab {

using nlohmann::json;

FixtureEmbedder FixtureEmbedder::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("embedding fixture not found: " + path.string());
  FixtureEmbedder out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const auto model = row.at("model_id").get<std::string>();
    if (out.model_id_.empty()) {
      out.model_id_ = model;
    } else if (model != out.model_id_) {
      throw ConfigError(path.string() + ": mixed model ids in one fixture file");
    }
    const auto values = row.at("vector").get<std::vector<double>>();
    out.add(row.at("text").get<std::string>(),
            Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return out;
}

void FixtureEmbedder::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write embedding fixture: " + path.string());
  for (const auto& [text, vec] : vectors_) {
    json row = {{"text", text},
                {"model_id", model_id_},
                {"vector", std::vector<double>(vec.data(), vec.data() + vec.size())}};
    out << row.dump() << '\n';
  }
}

void FixtureEmbedder::add(const std::string& text, const EmbeddingVector& vector) {
  if (!vectors_.empty() && vectors_.begin()->second.size() != vector.size())
    throw ContractViolation("fixture embedder: dimension mismatch for \"" + text + "\"");
  vectors_[text] = vector;
}

bool FixtureEmbedder::contains(const std::string& text) const { return vectors_.count(text) > 0; }

EmbeddingBatch FixtureEmbedder::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ContractViolation("embed: empty batch");
  EmbeddingBatch batch;
  batch.texts = texts;
  batch.model_id = model_id_;
  batch.vectors.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = vectors_.find(t);
    if (it == vectors_.end()) throw FixtureMissError("no recorded embedding for: \"" + t + "\"");
    batch.vectors.push_back(it->second);
  }
  return batch;
}

EmbeddingVector HashingEmbedder::embed_one(const std::string& text) const {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '\'') {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));

  EmbeddingVector v = EmbeddingVector::Zero(dimension_);
  auto bump = [&](const std::string& feature) {
    const std::uint64_t h = fnv1a(feature);
    const auto index = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dimension_));
    v(index) += ((h >> 63) & 1U) ? -1.0 : 1.0;
  };
  for (std::size_t i = 0; i < words.size(); ++i) {
    bump("u:" + words[i]);
    if (i + 1 < words.size()) bump("b:" + words[i] + " " + words[i + 1]);
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

EmbeddingBatch HashingEmbedder::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ContractViolation("embed: empty batch");
  EmbeddingBatch batch;
  batch.texts = texts;
  batch.model_id = model_id();
  for (const auto& t : texts) batch.vectors.push_back(embed_one(t));
  return batch;
}

EmbeddingBatch RecordingEmbedder::embed(const std::vector<std::string>& texts) {
  EmbeddingBatch batch = inner_->embed(texts);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < batch.texts.size(); ++i) recorded_.add(batch.texts[i], batch.vectors[i]);
  return batch;
}

}  // namespace collab
