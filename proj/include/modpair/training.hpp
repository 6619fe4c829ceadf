#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "modpair/executor.hpp"
#include "modpair/pairing.hpp"
#include "modpair/world.hpp"

namespace modpair {

struct TrainConfig {
  double lambda_paired = 1.0;  // 0 reproduces the baseline exactly
  int epochs = 25;
  int batch_size = 8;
  std::string optimizer = "adam";
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double eps_kl = 1e-8;
  std::uint64_t seed = 0;
  std::set<std::string> pair_sources = {"found", "template", "generated"};
  int patience = 10;
  double tau_start = 1.0;  // soft-argmax temperature, annealed linearly
  double tau_end = 0.1;
  double clip_norm = 5.0;  // global gradient-norm clip; 0 disables
  ModelConfig model;
};

struct TrainStepReport {
  double answer_loss = 0.0;
  double paired_loss = 0.0;
  int n_pairs = 0;
  double grad_norm = 0.0;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double paired_loss = 0.0;
  double dev_f1 = 0.0;
  double dev_em = 0.0;
};

struct TrainResult {
  ad::ParamStore store;  // parameters of the best dev epoch
  Vocab vocab;
  ModelConfig model;  // with the temperature the best epoch ran at
  std::vector<EpochMetrics> history;
  std::string metrics_jsonl;  // exact bytes written per epoch
  int best_epoch = -1;
  bool diverged = false;
};

/// Symmetric consistency loss between the denotations of two shared
/// subtrees: KL(a||b) + KL(b||a). Throws KindMismatch when kinds or support
/// lengths differ.
ad::Value paired_loss(ad::Tape& tape, const ExecutionTrace& trace_a, const NodePath& path_a,
                      const ExecutionTrace& trace_b, const NodePath& path_b, double eps);

struct Batch {
  std::vector<std::string> examples;  // forward order, probes included
  std::vector<PairLink> links;
};

struct BatchSchedule {
  std::vector<Batch> batches;
  std::vector<PairLink> deferred;  // links that could not co-reside this epoch
};

/// Greedy pair-packing: links in canonical order rotated by epoch; a link
/// joins an existing batch when one endpoint is already placed and a slot
/// is free, opens a new batch when neither is placed, and is deferred
/// otherwise. Unlinked labeled examples fill the remaining slots; probes
/// enter only through links.
BatchSchedule build_batches(const std::vector<std::string>& labeled_ids,
                            const std::vector<PairLink>& links, int batch_size,
                            std::uint64_t seed, int epoch);

/// Full training loop: mean answer likelihood over labeled examples plus
/// lambda_paired times the mean paired loss over in-batch links, Adam/SGD
/// steps, per-epoch dev evaluation with early stopping on dev F1.
/// Deterministic in (worlds, split, pairs, config).
TrainResult train(const std::vector<WorldInstance>& worlds, const SplitManifest& split,
                  const std::vector<PairLink>& pairs, const TrainConfig& config,
                  const std::function<void(const TrainStepReport&)>& step_callback = nullptr);

/// Labeled question ids of one split partition ("train"/"dev"/"test"),
/// resolving passage-level manifests to their questions.
std::set<std::string> split_question_ids(const std::vector<WorldInstance>& worlds,
                                         const SplitManifest& split,
                                         const std::string& part);

}  // namespace modpair
