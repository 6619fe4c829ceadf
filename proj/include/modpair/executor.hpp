#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "modpair/autodiff.hpp"
#include "modpair/dsl.hpp"
#include "modpair/world.hpp"

namespace modpair {

/// Architecture and temperature settings. The paper-level objectives do not
/// pin these; defaults are chosen for stable gradients at this scale and are
/// recorded in the run config.
struct ModelConfig {
  int d_model = 64;
  int max_seq = 256;
  int c_max = 9;               // counts 0..c_max
  double beta_count = 2.0;     // sharpening power inside count
  double tau_softargmax = 1.0; // annealed towards tau_end by the trainer
  double tau_compare = 1.0;
  double alpha_span = 0.3;     // span decoding threshold
  int align_window = 16;       // hard locality window of the number/date alignment
  int value_bin_min = -80;     // composed value support for num-add/num-diff
  int value_bin_max = 160;
  int yeardiff_bin_min = 0;    // composed value support for time-diff
  int yeardiff_bin_max = 650;
  double emb_init = 0.1;
  double weight_init = 0.02;
  double gamma_dist_init = -4.0;  // initial distance-decay of the alignment
  double value_unit = 10.0;       // yards per soft-argmax logit at tau = 1
  int count_knots = 9;
};

/// Token vocabulary; id 0 is the reserved unknown token.
struct Vocab {
  std::vector<std::string> tokens;
  std::map<std::string, int> index;

  static Vocab build(const std::vector<WorldInstance>& worlds);
  static Vocab from_tokens(std::vector<std::string> tokens);
  int id(const std::string& token) const;
  int size() const { return static_cast<int>(tokens.size()); }
};

/// Joint contextual representations of one (question, passage) pair.
struct Encoding {
  ad::Value question_reps;  // |q| x d
  ad::Value passage_reps;   // |p| x d
};

/// Distribution over a typed support produced by one program node.
struct Denotation {
  ValueKind kind = ValueKind::TokenDist;
  ad::Value dist;  // 1 x support size
};

struct ExecutionTrace {
  std::map<NodePath, Denotation> nodes;

  const Denotation& at(const NodePath& path) const;
};

/// Differentiable executor: the joint encoder plus one rule per module.
/// Stateless apart from config and vocabulary; execution is read-only on
/// the parameter store, so traces may be computed concurrently against a
/// frozen store.
class Executor {
 public:
  Executor(ModelConfig config, Vocab vocab)
      : config_(std::move(config)), vocab_(std::move(vocab)) {}

  const ModelConfig& config() const { return config_; }
  ModelConfig& config() { return config_; }
  const Vocab& vocab() const { return vocab_; }

  /// Registers every parameter and fills it from the seeded init scheme.
  void init_params(ad::ParamStore& store, std::uint64_t seed) const;

  Encoding encode(ad::Tape& tape, ad::ParamStore& store,
                  const std::vector<std::string>& question_tokens,
                  const std::vector<std::string>& passage_tokens) const;

  /// Fixed input distribution for one node, used by module-level tests to
  /// feed a chosen denotation (e.g. the gold find distribution) into a
  /// parent module.
  struct DenotationOverride {
    ValueKind kind;
    Matrix dist;
  };

  ExecutionTrace execute(ad::Tape& tape, ad::ParamStore& store, const QAExample& example,
                         const WorldInstance& world, const Encoding& enc,
                         const std::map<NodePath, DenotationOverride>& overrides = {}) const;

  /// -log of the root mass on the gold outcome. Throws KindMismatch when the
  /// root kind cannot express the gold answer (wrong kind, or a value
  /// outside the support).
  ad::Value answer_loss(ad::Tape& tape, const ExecutionTrace& trace, const Program& program,
                        const GoldAnswer& gold, const WorldInstance& world) const;

  /// Decodes the root denotation to an answer (argmax value / count / year,
  /// or the maximal contiguous token segment above alpha * max for spans).
  GoldAnswer decode_answer(const ExecutionTrace& trace, const Program& program,
                           const WorldInstance& world) const;

 private:
  ModelConfig config_;
  Vocab vocab_;
};

}  // namespace modpair
