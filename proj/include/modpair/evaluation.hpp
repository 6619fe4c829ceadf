#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "modpair/executor.hpp"
#include "modpair/world.hpp"

namespace modpair {

struct AnswerMetrics {
  double em = 0.0;
  double f1 = 0.0;
  int n = 0;
};

/// Exact match plus bag-of-token-positions span F1 (f1 == em for non-span
/// answers). Throws LengthMismatch on unaligned lists.
AnswerMetrics answer_metrics(const std::vector<GoldAnswer>& predictions,
                             const std::vector<GoldAnswer>& golds);

/// Per-item span F1 between two token spans.
double span_f1(const GoldAnswer& pred, const GoldAnswer& gold);

/// Per-node faithfulness: -log of the total mass the node places on its
/// gold token set. Lower is better; 0 when all mass is inside the gold
/// set. Throws MissingNode when the trace lacks an annotated node.
std::map<NodePath, double> faithfulness(const ExecutionTrace& trace,
                                        const std::map<NodePath, std::vector<int>>& gold,
                                        double eps = 1e-12);

struct FaithfulnessReport {
  double overall = 0.0;  // mean over all annotated nodes of all examples
  std::map<std::string, double> per_module;
  std::map<std::string, double> grouped;  // "min-max" average
  int n_nodes = 0;
};

/// Held-out template split.
struct SplitSpec {
  std::string name;  // "complex-arithmetic" | "filter-argmax"

  static SplitSpec by_name(const std::string& name);
  bool held_out(const Program& program) const;
};

/// Question-level split: held-out questions go to test; the remainder is
/// split 90/10 into train/dev (dev never sees held-out templates). Throws
/// SplitError when either side is empty.
SplitManifest build_comp_split(const std::vector<WorldInstance>& worlds,
                               const SplitSpec& spec);

struct EvalReport {
  std::string split;
  AnswerMetrics answers;
  FaithfulnessReport faithfulness;
  int n_examples = 0;
  std::map<std::string, AnswerMetrics> by_type;  // count / min-max / other

  std::string to_json() const;
  static EvalReport from_json_text(const std::string& text);
};

/// Runs the model over every labeled question in `question_ids` and scores
/// answers and faithfulness. When `trace_dump` is non-null it receives, per
/// question, a JSON string mapping node paths to top-5 (index, probability)
/// pairs.
EvalReport evaluate_questions(const Executor& executor, ad::ParamStore& store,
                              const std::vector<WorldInstance>& worlds,
                              const std::set<std::string>& question_ids,
                              const std::string& split_name,
                              std::map<std::string, std::string>* trace_dump = nullptr,
                              int workers = 1);

/// Seed-paired comparison of two run groups on the same split.
struct RunComparison {
  std::string split;
  int n_seeds = 0;
  std::vector<double> f1_delta, em_delta, faithfulness_delta;
  double f1_mean = 0, f1_stdev = 0;
  double em_mean = 0, em_stdev = 0;
  double faithfulness_mean = 0, faithfulness_stdev = 0;

  std::string to_json() const;
};

/// Pairs baseline[i] with candidate[i]; throws SplitMismatch when splits
/// differ or group sizes differ.
RunComparison compare_runs(const std::vector<EvalReport>& baseline,
                           const std::vector<EvalReport>& candidate);

}  // namespace modpair
