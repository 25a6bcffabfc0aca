#include "modelmux/vocab.hpp"

#include <algorithm>
#include <cmath>

#include "modelmux/util.hpp"

namespace modelmux {

double cosine_similarity(const std::vector<double>& a,
                         const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(Error::Kind::EmbeddingUnavailable,
                "embedding dimensions differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void Vocabulary::reindex() {
  member_to_canonical_.clear();
  for (const auto& [canonical, members] : clusters) {
    for (const auto& member : members) {
      member_to_canonical_[member] = canonical;
    }
  }
}

std::string Vocabulary::canonicalize(
    const std::string& normalized_label) const {
  auto it = member_to_canonical_.find(normalized_label);
  if (it != member_to_canonical_.end()) return it->second;
  return kOtherLabel;
}

Vocabulary Vocabulary::identity(const std::vector<TagOccurrence>& occurrences) {
  Vocabulary vocab;
  vocab.frequency_floor = 1;
  for (const auto& occ : occurrences) {
    ++vocab.frequencies[occ.label];
  }
  for (const auto& [label, freq] : vocab.frequencies) {
    (void)freq;
    vocab.clusters[label] = {label};
  }
  vocab.reindex();
  return vocab;
}

Vocabulary build_vocabulary(const std::vector<TagOccurrence>& occurrences,
                            EmbeddingProvider& provider, double threshold,
                            std::int64_t floor) {
  Vocabulary vocab;
  vocab.similarity_threshold = threshold;
  vocab.frequency_floor = floor;
  for (const auto& occ : occurrences) {
    ++vocab.frequencies[occ.label];
  }

  // Descending frequency, ties lexicographic. Clustering order is a
  // function of the counts only, so permuting the input changes nothing.
  std::vector<std::string> order;
  order.reserve(vocab.frequencies.size());
  for (const auto& [label, freq] : vocab.frequencies) {
    (void)freq;
    order.push_back(label);
  }
  std::sort(order.begin(), order.end(),
            [&vocab](const std::string& a, const std::string& b) {
              auto fa = vocab.frequencies.at(a);
              auto fb = vocab.frequencies.at(b);
              if (fa != fb) return fa > fb;
              return a < b;
            });

  struct Cluster {
    std::string canonical;
    std::vector<double> rep_vec;  // the canonical member's embedding
    std::vector<std::string> members;
  };
  std::vector<Cluster> clusters;

  for (const auto& label : order) {
    std::vector<double> vec;
    try {
      vec = provider.embed(label);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(Error::Kind::EmbeddingUnavailable,
                  std::string("embedding failed for '") + label +
                      "': " + e.what());
    }

    int best_cluster = -1;
    double best_sim = 0.0;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      double sim = cosine_similarity(vec, clusters[c].rep_vec);
      if (sim > threshold && (best_cluster < 0 || sim > best_sim)) {
        best_cluster = static_cast<int>(c);
        best_sim = sim;
      }
    }
    if (best_cluster >= 0) {
      clusters[static_cast<std::size_t>(best_cluster)].members.push_back(
          label);
    } else {
      clusters.push_back(Cluster{label, std::move(vec), {label}});
    }
  }

  for (auto& cluster : clusters) {
    std::int64_t total = 0;
    for (const auto& member : cluster.members) {
      total += vocab.frequencies.at(member);
    }
    if (total < floor) {
      for (auto& member : cluster.members) {
        vocab.other_members.insert(std::move(member));
      }
    } else {
      vocab.clusters.emplace(cluster.canonical, std::move(cluster.members));
    }
  }

  vocab.reindex();
  return vocab;
}

StubEmbeddingProvider::StubEmbeddingProvider(std::uint64_t seed,
                                             std::size_t dim)
    : seed_(seed), dim_(dim) {}

std::vector<double> StubEmbeddingProvider::hash_vector(
    const std::string& label) const {
  SplitMix64 rng(fnv1a64(label) ^ seed_);
  std::vector<double> vec(dim_);
  double norm_sq = 0.0;
  for (auto& v : vec) {
    v = rng.next_in(-1.0, 1.0);
    norm_sq += v * v;
  }
  const double norm = std::sqrt(norm_sq);
  for (auto& v : vec) v /= norm;
  return vec;
}

std::vector<double> StubEmbeddingProvider::embed(const std::string& label) {
  auto it = overrides_.find(label);
  if (it != overrides_.end()) return it->second;
  return hash_vector(label);
}

void StubEmbeddingProvider::set_vector(const std::string& label,
                                       std::vector<double> vec) {
  double norm_sq = 0.0;
  for (double v : vec) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  for (auto& v : vec) v /= norm;
  overrides_[label] = std::move(vec);
}

void StubEmbeddingProvider::set_pair_similarity(const std::string& a,
                                                const std::string& b,
                                                double similarity) {
  std::vector<double> va = embed(a);
  overrides_[a] = va;
  // Gram-Schmidt a hash vector against va to get an orthogonal direction,
  // then place b at the requested angle.
  std::vector<double> u = hash_vector(b + "#orth");
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * va[i];
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] -= dot * va[i];
    norm_sq += u[i] * u[i];
  }
  const double norm = std::sqrt(norm_sq);
  const double ortho = std::sqrt(std::max(0.0, 1.0 - similarity * similarity));
  std::vector<double> vb(va.size());
  for (std::size_t i = 0; i < vb.size(); ++i) {
    vb[i] = similarity * va[i] + ortho * u[i] / norm;
  }
  overrides_[b] = std::move(vb);
}

std::unique_ptr<EmbeddingProvider> make_stub_provider(std::uint64_t seed) {
  return std::make_unique<StubEmbeddingProvider>(seed);
}

}  // namespace modelmux
