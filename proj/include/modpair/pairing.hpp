#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "modpair/algebra.hpp"
#include "modpair/dsl.hpp"
#include "modpair/world.hpp"

namespace modpair {

/// A consistency link between two program subtrees on the same passage.
/// Both paths resolve to subtrees of equal template signature and output
/// kind; the trainer applies the symmetric-KL objective between their
/// denotations.
struct PairLink {
  std::string example_a;
  NodePath path_a;
  std::string example_b;
  NodePath path_b;
  std::string relation = "equality";
  std::string source;  // "found" | "template" | "generated"

  auto operator<=>(const PairLink&) const = default;
};

struct SimilarityVerdict {
  double score = 0.0;
  bool entity_match = false;
  bool equivalent = false;  // score >= tau_sim AND entity_match
};

/// Deterministic static token embeddings for the similarity matcher's
/// cosine fallback: each token's vector is drawn from a stream seeded by
/// (seed, hash(token)), matching the engine's seeded-init regime.
class ArgEmbeddings {
 public:
  explicit ArgEmbeddings(std::uint64_t seed = 0, int dim = 32) : seed_(seed), dim_(dim) {}

  const RowVector& of(const std::string& token);

 private:
  std::uint64_t seed_;
  int dim_;
  std::map<std::string, RowVector> cache_;
};

/// Greedy token-matching F1 between two argument strings: a token pair
/// matches with weight 1 when identical or synonym-linked, otherwise the
/// clipped cosine of static embeddings. entity_match compares the sets of
/// capitalized tokens.
SimilarityVerdict arg_similarity(const std::vector<std::string>& arg_a,
                                 const std::vector<std::string>& arg_b, const Lexicon& lexicon,
                                 ArgEmbeddings& embeddings, double tau_sim = 0.6);

/// Naturally occurring pairs: every unordered pair of the passage's
/// questions, every pair of find leaves, linked when the arguments are
/// semantically equivalent. Deterministic order by
/// (example_a, path_a, example_b, path_b).
std::vector<PairLink> find_natural_pairs(const WorldInstance& world, const Lexicon& lexicon,
                                         ArgEmbeddings& embeddings, double tau_sim = 0.6);

/// One constructed example plus the links that attach it to its source.
struct Construction {
  QAExample example;
  std::vector<PairLink> links;
};

/// Template constructions for one question, when its program matches one of
/// the eight families (or their min/lt versions): "What were the <arg>?"
/// grounding probes, "When did the <arg>?" date probes, and the
/// superlative-inverted full example. Non-matching programs yield an empty
/// list.
std::vector<Construction> construct_template_pairs(const QAExample& example,
                                                   const WorldInstance& world);

struct AugmentResult {
  std::vector<QAExample> new_examples;
  std::vector<PairLink> links;
};

/// Applies construct_template_pairs across a passage, deduplicating
/// identical probes so several questions share one constructed hub.
AugmentResult apply_template_constructions(const WorldInstance& world);

/// Rule-based probe generation: samples up to k number/date positions,
/// emits a probe question from the owning event's surface text, and links
/// it to every dataset question with a semantically equivalent find
/// argument. Probes that match no question are dropped.
AugmentResult generate_probe_pairs(const WorldInstance& world, std::uint64_t seed, int k,
                                   const Lexicon& lexicon, ArgEmbeddings& embeddings,
                                   double tau_sim = 0.6);

void save_pairs_jsonl(const std::string& path, const std::vector<PairLink>& links);
std::vector<PairLink> load_pairs_jsonl(const std::string& path);

/// Checks every link against the dataset: endpoints exist, paths resolve,
/// equal template signature and output kind on both sides. Throws
/// DanglingPairError.
void validate_pairs(const std::vector<WorldInstance>& worlds,
                    const std::vector<PairLink>& links);

}  // namespace modpair
