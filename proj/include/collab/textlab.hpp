#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "collab/gateway.hpp"
#include "collab/orchestrator.hpp"

namespace collab {

struct SentenceRecord {
  std::string text;
  std::string run_id;
  std::string prefix_id;
  int period = 0;
  int agent = 0;
};

// List items ("- ", "* ", "1. ", "2) ") are one sentence each with the marker
// removed; other text is split after '.', '!' or '?' followed by whitespace.
std::vector<std::string> split_sentences(const std::string& text);

std::string join_as_bullets(const std::vector<std::string>& sentences);

// Every plans sentence of every agent and period.
std::vector<SentenceRecord> extract_sentences(const std::vector<RunLog>& logs);

inline const std::vector<std::string>& default_war_phrases() {
  static const std::vector<std::string> p{"price war", "pricing war"};
  return p;
}

bool contains_phrase(const std::string& text, const std::vector<std::string>& phrases);

std::vector<SentenceRecord> filter_phrase(const std::vector<SentenceRecord>& sentences,
                                          const std::vector<std::string>& phrases =
                                              default_war_phrases());

struct ReferenceVector {
  std::string label;
  std::vector<std::string> sentences;
  Eigen::VectorXd vector;
};

ReferenceVector build_reference(const std::string& label, const std::vector<std::string>& sentences,
                                Gateway& gateway);

enum class WarLabel { kAvoid, kStart };

std::string to_string(WarLabel label);

struct Classification {
  WarLabel label = WarLabel::kStart;
  double score = 0.0;  // <v, avoid - start>
};

// Throws NumericDomainError for a zero sentence vector.
Classification classify_price_war(const Eigen::VectorXd& v, const ReferenceVector& avoid,
                                  const ReferenceVector& start);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;         // rows are unit principal axes
  Eigen::VectorXd explained_ratio;    // per retained component
  double retained_ratio = 0.0;
  Eigen::MatrixXd project(const Eigen::MatrixXd& rows) const;
};

// Rows of `data` are observations. When both dimensions exceed 512 the leading
// components come from randomized subspace iteration.
PcaModel pca_fit(const Eigen::MatrixXd& data, double variance_target = 0.5, int max_components = 20);

struct KMeansResult {
  Eigen::MatrixXd centroids;            // k x dim
  std::vector<int> assignments;
  std::vector<double> inertia_history;  // after every assignment step
  double inertia = 0.0;
  int iterations = 0;
};

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iterations = 300);

inline constexpr std::string_view kSummaryInstruction =
    "Below is a list of sentences that have similar meaning. Output a 4-word summary of what all "
    "the sentences are doing. When possible use the precise words the sentences use.";

// Indices of the (up to) `limit` cluster members closest to the centroid,
// ascending distance, ties by index.
std::vector<int> closest_members(const Eigen::MatrixXd& points, const KMeansResult& km, int cluster,
                                 int limit = 10);

std::string summarize_cluster(const std::vector<std::string>& texts, const Eigen::MatrixXd& points,
                              const KMeansResult& km, int cluster, Gateway& gateway,
                              std::vector<std::string>* sent = nullptr);

struct PrevalenceRow {
  int cluster = 0;
  long size = 0;
  std::map<std::string, double> share;     // prefix -> share within cluster
  std::map<std::string, double> relative;  // share / baseline
};

// Baselines default to the corpus-wide prefix shares when empty.
std::vector<PrevalenceRow> relative_prevalence(const std::vector<int>& assignments,
                                               const std::vector<std::string>& prefixes, int k,
                                               std::map<std::string, double> baselines = {});

// Adjusted Rand index between two labelings.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& vectors);

nlohmann::json to_json(const SentenceRecord& s);

}  // namespace collab
