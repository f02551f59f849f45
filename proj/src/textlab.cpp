#include "collab/textlab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "collab/rng.hpp"

namespace collab {

namespace {

std::string trim_copy(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

// Length of a leading list marker plus its trailing whitespace, or 0.
std::size_t list_marker(std::string_view line) {
  if (line.size() >= 2 && (line[0] == '-' || line[0] == '*') &&
      std::isspace(static_cast<unsigned char>(line[1]))) {
    return 2;
  }
  if (line.rfind("•", 0) == 0 && line.size() > 3 &&
      std::isspace(static_cast<unsigned char>(line[3]))) {
    return 4;
  }
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i + 1 < line.size() && (line[i] == '.' || line[i] == ')') &&
      std::isspace(static_cast<unsigned char>(line[i + 1]))) {
    return i + 2;
  }
  return 0;
}

void split_prose(std::string_view text, std::vector<std::string>& out) {
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && i + 1 < text.size() &&
        std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      std::string s = trim_copy(text.substr(start, i + 1 - start));
      if (!s.empty()) out.push_back(std::move(s));
      start = i + 1;
    }
  }
  std::string s = trim_copy(text.substr(start));
  if (!s.empty()) out.push_back(std::move(s));
}

}  // namespace

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    const std::string line = trim_copy(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;
    if (const std::size_t m = list_marker(line); m > 0) {
      std::string item = trim_copy(std::string_view(line).substr(m));
      if (!item.empty()) out.push_back(std::move(item));
    } else {
      split_prose(line, out);
    }
  }
  return out;
}

std::string join_as_bullets(const std::vector<std::string>& sentences) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i > 0) out += "\n";
    out += "- " + sentences[i];
  }
  return out;
}

std::vector<SentenceRecord> extract_sentences(const std::vector<RunLog>& logs) {
  std::vector<SentenceRecord> out;
  for (const auto& log : logs) {
    for (const auto& r : log.records) {
      for (std::size_t i = 0; i < r.agents.size(); ++i) {
        for (auto& s : split_sentences(r.agents[i].plans)) {
          out.push_back({std::move(s), log.config.run_id, log.config.prefixes.at(i), r.period,
                         static_cast<int>(i)});
        }
      }
    }
  }
  return out;
}

bool contains_phrase(const std::string& text, const std::vector<std::string>& phrases) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& p : phrases) {
    std::string lp(p);
    std::transform(lp.begin(), lp.end(), lp.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower.find(lp) != std::string::npos) return true;
  }
  return false;
}

std::vector<SentenceRecord> filter_phrase(const std::vector<SentenceRecord>& sentences,
                                          const std::vector<std::string>& phrases) {
  std::vector<SentenceRecord> out;
  for (const auto& s : sentences) {
    if (contains_phrase(s.text, phrases)) out.push_back(s);
  }
  return out;
}

ReferenceVector build_reference(const std::string& label, const std::vector<std::string>& sentences,
                                Gateway& gateway) {
  if (sentences.empty()) throw ContractViolation("build_reference: no sentences");
  const EmbeddingBatch batch = gateway.embed(sentences);
  ReferenceVector ref;
  ref.label = label;
  ref.sentences = sentences;
  ref.vector = Eigen::VectorXd::Zero(batch.dimension());
  for (const auto& v : batch.vectors) ref.vector += v;
  ref.vector /= static_cast<double>(batch.vectors.size());
  return ref;
}

std::string to_string(WarLabel label) { return label == WarLabel::kAvoid ? "avoid" : "start"; }

Classification classify_price_war(const Eigen::VectorXd& v, const ReferenceVector& avoid,
                                  const ReferenceVector& start) {
  if (v.size() != avoid.vector.size() || v.size() != start.vector.size())
    throw ContractViolation("classify: dimension mismatch");
  if (v.squaredNorm() == 0.0) throw NumericDomainError("classify: zero sentence vector");
  Classification c;
  c.score = v.dot(avoid.vector - start.vector);
  c.label = c.score > 0.0 ? WarLabel::kAvoid : WarLabel::kStart;
  return c;
}

Eigen::MatrixXd PcaModel::project(const Eigen::MatrixXd& rows) const {
  return (rows.rowwise() - mean.transpose()) * components.transpose();
}

constexpr Eigen::Index kExactPcaLimit = 512;

PcaModel pca_fit(const Eigen::MatrixXd& data, double variance_target, int max_components) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2) throw ContractViolation("pca: need at least two vectors");
  if (!(variance_target > 0.0 && variance_target <= 1.0))
    throw ContractViolation("pca: variance target outside (0, 1]");
  if (max_components < 1) throw ContractViolation("pca: max_components must be >= 1");

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();

  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd axes;  // columns are unit axes in data space, descending
  double total = 0.0;
  if (std::min(n, d) > kExactPcaLimit) {
    // Top components only, by randomized subspace iteration; the total comes
    // from the trace so ratios stay exact.
    total = centered.squaredNorm() / static_cast<double>(n - 1);
    const Eigen::Index r = std::min<Eigen::Index>(max_components + 10, std::min(n, d));
    Rng rng(0x9e3779b97f4a7c15ULL);
    Eigen::MatrixXd q(d, r);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < r; ++j) q(i, j) = rng.normal();
    for (int it = 0; it < 12; ++it) {
      const Eigen::MatrixXd y = centered.transpose() * (centered * q);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
      q = qr.householderQ() * Eigen::MatrixXd::Identity(d, r);
    }
    const Eigen::MatrixXd b = centered * q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.transpose() * b);
    eigenvalues = es.eigenvalues().reverse().cwiseMax(0.0) / static_cast<double>(n - 1);
    axes = q * es.eigenvectors().rowwise().reverse();
  } else if (n < d) {
    // Gram trick: the nonzero spectrum of X^T X equals that of X X^T.
    const Eigen::MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const Eigen::VectorXd ev = es.eigenvalues().reverse();
    const Eigen::MatrixXd u = es.eigenvectors().rowwise().reverse();
    eigenvalues = ev.cwiseMax(0.0) / static_cast<double>(n - 1);
    axes.resize(d, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::VectorXd a = centered.transpose() * u.col(k);
      const double norm = a.norm();
      axes.col(k) = norm > 0.0 ? Eigen::VectorXd(a / norm) : Eigen::VectorXd::Zero(d);
    }
    total = eigenvalues.sum();
  } else {
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    eigenvalues = es.eigenvalues().reverse().cwiseMax(0.0);
    axes = es.eigenvectors().rowwise().reverse();
    total = eigenvalues.sum();
  }

  if (!(total > 0.0)) throw NumericDomainError("pca: data has zero variance");
  const Eigen::VectorXd ratios = eigenvalues / total;
  Eigen::Index keep = 0;
  double cumulative = 0.0;
  const Eigen::Index cap = std::min<Eigen::Index>(max_components, ratios.size());
  while (keep < cap && cumulative < variance_target - 1e-12) cumulative += ratios(keep++);

  model.components.resize(keep, d);
  for (Eigen::Index k = 0; k < keep; ++k) {
    Eigen::VectorXd axis = axes.col(k);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0.0) axis = -axis;
    model.components.row(k) = axis.transpose();
  }
  model.explained_ratio = ratios.head(keep);
  model.retained_ratio = model.explained_ratio.sum();
  return model;
}

namespace {

double assign_all(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                  std::vector<int>& assignments) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Index best = 0;
    (centroids.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
    assignments[i] = static_cast<int>(best);
    inertia += (centroids.row(best) - points.row(i)).squaredNorm();
  }
  return inertia;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iterations) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw ContractViolation("kmeans: k must be >= 1");
  if (k > n) throw ContractViolation("kmeans: k exceeds the number of points");
  Rng rng(seed);

  // k-means++ seeding.
  KMeansResult r;
  r.centroids.resize(k, points.cols());
  std::vector<bool> chosen(n, false);
  Eigen::Index first = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
  r.centroids.row(0) = points.row(first);
  chosen[first] = true;
  Eigen::VectorXd d2 = (points.rowwise() - points.row(first)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      double u = rng.uniform01() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2(i) <= 0.0) continue;
        pick = i;
        u -= d2(i);
        if (u < 0.0) break;
      }
    } else {
      for (Eigen::Index i = 0; i < n && pick < 0; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = true;
    r.centroids.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - points.row(pick)).rowwise().squaredNorm());
  }

  r.assignments.assign(n, -1);
  std::vector<int> previous;
  for (int it = 0; it < max_iterations; ++it) {
    previous = r.assignments;
    r.inertia = assign_all(points, r.centroids, r.assignments);
    r.inertia_history.push_back(r.inertia);
    r.iterations = it + 1;
    if (r.assignments == previous) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<long> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.assignments[i]) += points.row(i);
      ++counts[r.assignments[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        r.centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: restart it on the point farthest from its centroid.
      Eigen::Index far = 0;
      double best = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dist = (points.row(i) - r.centroids.row(r.assignments[i])).squaredNorm();
        if (dist > best && counts[r.assignments[i]] > 1) {
          best = dist;
          far = i;
        }
      }
      --counts[r.assignments[far]];
      r.assignments[far] = c;
      counts[c] = 1;
      r.centroids.row(c) = points.row(far);
    }
  }
  return r;
}

std::vector<int> closest_members(const Eigen::MatrixXd& points, const KMeansResult& km, int cluster,
                                 int limit) {
  std::vector<std::pair<double, int>> members;
  for (std::size_t i = 0; i < km.assignments.size(); ++i) {
    if (km.assignments[i] != cluster) continue;
    const double dist = (points.row(static_cast<Eigen::Index>(i)) - km.centroids.row(cluster)).squaredNorm();
    members.emplace_back(dist, static_cast<int>(i));
  }
  std::sort(members.begin(), members.end());
  std::vector<int> out;
  for (std::size_t i = 0; i < members.size() && static_cast<int>(i) < limit; ++i)
    out.push_back(members[i].second);
  return out;
}

std::string summarize_cluster(const std::vector<std::string>& texts, const Eigen::MatrixXd& points,
                              const KMeansResult& km, int cluster, Gateway& gateway,
                              std::vector<std::string>* sent) {
  const std::vector<int> idx = closest_members(points, km, cluster, 10);
  if (idx.empty()) throw ContractViolation("summarize_cluster: empty cluster");
  std::vector<std::string> chosen;
  for (int i : idx) chosen.push_back(texts.at(static_cast<std::size_t>(i)));
  if (sent) *sent = chosen;
  ChatRequest req;
  req.system_text = std::string(kSummaryInstruction);
  req.user_text = join_as_bullets(chosen);
  req.tag.run_id = "cluster-summary";
  req.tag.agent = cluster;
  return trim_copy(gateway.chat(req).text);
}

std::vector<PrevalenceRow> relative_prevalence(const std::vector<int>& assignments,
                                               const std::vector<std::string>& prefixes, int k,
                                               std::map<std::string, double> baselines) {
  if (assignments.size() != prefixes.size())
    throw ContractViolation("prevalence: one prefix per sentence required");
  if (assignments.empty()) throw ContractViolation("prevalence: empty corpus");
  if (baselines.empty()) {
    for (const auto& p : prefixes) baselines[p] += 1.0;
    for (auto& [p, v] : baselines) v /= static_cast<double>(prefixes.size());
  }
  std::vector<PrevalenceRow> rows(k);
  std::vector<std::map<std::string, long>> counts(k);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int c = assignments[i];
    if (c < 0 || c >= k) throw ContractViolation("prevalence: assignment out of range");
    if (!baselines.count(prefixes[i]))
      throw ContractViolation("prevalence: no baseline for prefix " + prefixes[i]);
    ++counts[c][prefixes[i]];
    ++rows[c].size;
  }
  for (int c = 0; c < k; ++c) {
    rows[c].cluster = c;
    for (const auto& [p, base] : baselines) {
      const double share = rows[c].size > 0
                               ? static_cast<double>(counts[c][p]) / static_cast<double>(rows[c].size)
                               : 0.0;
      rows[c].share[p] = share;
      rows[c].relative[p] = base > 0.0 ? share / base : 0.0;
    }
  }
  return rows;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ContractViolation("ari: labelings differ in length");
  std::map<std::pair<int, int>, long> joint;
  std::map<int, long> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto c2 = [](long x) { return static_cast<double>(x) * static_cast<double>(x - 1) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [_, v] : joint) index += c2(v);
  for (const auto& [_, v] : ra) sa += c2(v);
  for (const auto& [_, v] : rb) sb += c2(v);
  const double total = c2(static_cast<long>(a.size()));
  const double expected = total > 0.0 ? sa * sb / total : 0.0;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& vectors) {
  if (vectors.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()), vectors.front().size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != m.cols()) throw ContractViolation("stack_rows: ragged vectors");
    m.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
  }
  return m;
}

nlohmann::json to_json(const SentenceRecord& s) {
  return {{"text", s.text}, {"run_id", s.run_id}, {"prefix_id", s.prefix_id},
          {"period", s.period}, {"agent", s.agent}};
}

}  // namespace collab
