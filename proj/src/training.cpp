#include "modpair/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <json.hpp>

#include "modpair/evaluation.hpp"
#include "modpair/rng.hpp"

namespace modpair {

ad::Value paired_loss(ad::Tape& tape, const ExecutionTrace& trace_a, const NodePath& path_a,
                      const ExecutionTrace& trace_b, const NodePath& path_b, double eps) {
  const Denotation& a = trace_a.at(path_a);
  const Denotation& b = trace_b.at(path_b);
  if (a.kind != b.kind) {
    throw KindMismatch("paired_loss: " + to_string(a.kind) + " vs " + to_string(b.kind));
  }
  if (a.dist.cols() != b.dist.cols()) {
    throw KindMismatch("paired_loss: support lengths " + std::to_string(a.dist.cols()) +
                       " vs " + std::to_string(b.dist.cols()));
  }
  return tape.add(tape.kl_divergence(a.dist, b.dist, eps),
                  tape.kl_divergence(b.dist, a.dist, eps));
}

BatchSchedule build_batches(const std::vector<std::string>& labeled_ids,
                            const std::vector<PairLink>& links, int batch_size,
                            std::uint64_t seed, int epoch) {
  if (batch_size < 2 && !links.empty()) {
    throw ConfigError("batch_size must be >= 2 to co-schedule pairs");
  }
  BatchSchedule schedule;
  std::map<std::string, int> assigned;

  std::vector<PairLink> ordered = links;
  std::sort(ordered.begin(), ordered.end());
  if (!ordered.empty()) {
    const std::size_t start = static_cast<std::size_t>(epoch) % ordered.size();
    std::rotate(ordered.begin(), ordered.begin() + start, ordered.end());
  }

  auto batch_has_room = [&](int b) {
    return static_cast<int>(schedule.batches[b].examples.size()) < batch_size;
  };
  auto place = [&](const std::string& id, int b) {
    schedule.batches[b].examples.push_back(id);
    assigned[id] = b;
  };

  for (const PairLink& link : ordered) {
    auto ia = assigned.find(link.example_a);
    auto ib = assigned.find(link.example_b);
    if (ia != assigned.end() && ib != assigned.end()) {
      if (ia->second == ib->second) {
        schedule.batches[ia->second].links.push_back(link);
      } else {
        schedule.deferred.push_back(link);
      }
    } else if (ia != assigned.end() || ib != assigned.end()) {
      const int b = ia != assigned.end() ? ia->second : ib->second;
      const std::string& other = ia != assigned.end() ? link.example_b : link.example_a;
      if (batch_has_room(b)) {
        place(other, b);
        schedule.batches[b].links.push_back(link);
      } else {
        schedule.deferred.push_back(link);
      }
    } else {
      if (schedule.batches.empty() ||
          static_cast<int>(schedule.batches.back().examples.size()) > batch_size - 2) {
        schedule.batches.emplace_back();
      }
      const int b = static_cast<int>(schedule.batches.size()) - 1;
      place(link.example_a, b);
      place(link.example_b, b);
      schedule.batches[b].links.push_back(link);
    }
  }

  // remaining labeled examples fill free slots in shuffled order
  std::vector<std::string> fill = labeled_ids;
  Rng rng(mix_seed(seed, 0x9a7c0 + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(fill);
  std::size_t cursor = 0;
  for (const std::string& id : fill) {
    if (assigned.count(id)) continue;
    while (cursor < schedule.batches.size() &&
           !batch_has_room(static_cast<int>(cursor))) {
      ++cursor;
    }
    if (cursor == schedule.batches.size()) schedule.batches.emplace_back();
    place(id, static_cast<int>(cursor));
  }
  return schedule;
}

std::set<std::string> split_question_ids(const std::vector<WorldInstance>& worlds,
                                         const SplitManifest& split,
                                         const std::string& part) {
  const std::vector<std::string>& list = part == "train" ? split.train
                                         : part == "dev" ? split.dev
                                                         : split.test;
  std::set<std::string> out;
  if (split.kind == "passage") {
    std::set<std::string> passages(list.begin(), list.end());
    for (const WorldInstance& w : worlds) {
      if (!passages.count(w.passage_id)) continue;
      for (const QAExample& q : w.questions) {
        if (!q.is_probe && q.answer) out.insert(q.id);
      }
    }
  } else {
    out.insert(list.begin(), list.end());
  }
  return out;
}

namespace {

struct QuestionIndex {
  std::map<std::string, std::pair<const WorldInstance*, const QAExample*>> by_id;

  explicit QuestionIndex(const std::vector<WorldInstance>& worlds) {
    for (const WorldInstance& w : worlds) {
      for (const QAExample& q : w.questions) by_id[q.id] = {&w, &q};
    }
  }

  const std::pair<const WorldInstance*, const QAExample*>& at(const std::string& id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DanglingPairError("unknown example id '" + id + "'");
    return it->second;
  }
};

Vocab build_train_vocab(const QuestionIndex& index, const std::set<std::string>& train_ids,
                        const std::set<std::string>& probe_ids) {
  std::set<std::string> tokens;
  std::set<const WorldInstance*> passages;
  for (const std::string& id : train_ids) {
    auto [w, q] = index.at(id);
    passages.insert(w);
    tokens.insert(q->question_tokens.begin(), q->question_tokens.end());
  }
  for (const std::string& id : probe_ids) {
    auto [w, q] = index.at(id);
    passages.insert(w);
    tokens.insert(q->question_tokens.begin(), q->question_tokens.end());
  }
  for (const WorldInstance* w : passages) {
    tokens.insert(w->passage_tokens.begin(), w->passage_tokens.end());
  }
  std::vector<std::string> list = {"<unk>"};
  list.insert(list.end(), tokens.begin(), tokens.end());
  return Vocab::from_tokens(std::move(list));
}

double param_grad_norm(const ad::ParamStore& store) {
  double sq = 0.0;
  for (const auto& [name, p] : store.entries()) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

}  // namespace

TrainResult train(const std::vector<WorldInstance>& worlds, const SplitManifest& split,
                  const std::vector<PairLink>& pairs, const TrainConfig& config,
                  const std::function<void(const TrainStepReport&)>& step_callback) {
  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (config.lambda_paired < 0) throw ConfigError("lambda_paired must be >= 0");
  if (config.optimizer != "adam" && config.optimizer != "sgd") {
    throw ConfigError("optimizer must be 'adam' or 'sgd'");
  }

  QuestionIndex index(worlds);
  const std::set<std::string> train_ids = split_question_ids(worlds, split, "train");
  const std::set<std::string> dev_ids = split_question_ids(worlds, split, "dev");
  if (train_ids.empty()) throw ConfigError("training split is empty");

  // usable links: enabled source, both endpoints resolvable, labeled
  // endpoints inside the training split. Probes enter only through links.
  std::vector<PairLink> links;
  std::set<std::string> probe_ids;
  if (config.lambda_paired > 0.0) {
    for (const PairLink& l : pairs) {
      if (!config.pair_sources.count(l.source)) continue;
      auto [wa, qa] = index.at(l.example_a);
      auto [wb, qb] = index.at(l.example_b);
      const bool a_ok = qa->is_probe || train_ids.count(l.example_a);
      const bool b_ok = qb->is_probe || train_ids.count(l.example_b);
      if (!a_ok || !b_ok) continue;
      if (qa->is_probe && qb->is_probe) continue;
      links.push_back(l);
      if (qa->is_probe) probe_ids.insert(l.example_a);
      if (qb->is_probe) probe_ids.insert(l.example_b);
    }
  }

  TrainResult result;
  result.vocab = build_train_vocab(index, train_ids, probe_ids);
  result.model = config.model;
  result.model.tau_softargmax = config.tau_start;

  Executor executor(result.model, result.vocab);
  ad::ParamStore store;
  executor.init_params(store, mix_seed(config.seed, 0x1217));

  const std::vector<std::string> labeled(train_ids.begin(), train_ids.end());
  ad::ParamStore best_store = store;
  double best_dev = -1.0;
  double best_tau = config.tau_start;
  int bad_epochs = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double frac = config.epochs > 1
                            ? static_cast<double>(epoch) / (config.epochs - 1)
                            : 1.0;
    const double tau = config.tau_start + (config.tau_end - config.tau_start) * frac;
    executor.config().tau_softargmax = tau;

    BatchSchedule schedule =
        build_batches(labeled, links, config.batch_size, config.seed, epoch);
    if (!schedule.deferred.empty()) {
      std::cout << "[train] epoch " << epoch << ": deferred " << schedule.deferred.size()
                << " links to a later schedule\n";
    }

    double answer_sum = 0.0;
    int answer_n = 0;
    double paired_sum = 0.0;
    int paired_n = 0;
    bool finite = true;

    for (const Batch& batch : schedule.batches) {
      ad::Tape tape;
      std::map<std::string, ExecutionTrace> traces;
      std::vector<ad::Value> answer_losses;
      for (const std::string& id : batch.examples) {
        auto [w, q] = index.at(id);
        Encoding enc = executor.encode(tape, store, q->question_tokens, w->passage_tokens);
        traces.emplace(id, executor.execute(tape, store, *q, *w, enc));
        if (!q->is_probe) {
          answer_losses.push_back(
              executor.answer_loss(tape, traces.at(id), q->program, *q->answer, *w));
        }
      }
      std::vector<ad::Value> pair_losses;
      for (const PairLink& link : batch.links) {
        pair_losses.push_back(paired_loss(tape, traces.at(link.example_a), link.path_a,
                                          traces.at(link.example_b), link.path_b,
                                          config.eps_kl));
      }

      ad::Value total;
      if (!answer_losses.empty()) {
        ad::Value s = answer_losses[0];
        for (std::size_t i = 1; i < answer_losses.size(); ++i) s = tape.add(s, answer_losses[i]);
        total = tape.scale(s, 1.0 / static_cast<double>(answer_losses.size()));
      }
      if (!pair_losses.empty()) {
        ad::Value s = pair_losses[0];
        for (std::size_t i = 1; i < pair_losses.size(); ++i) s = tape.add(s, pair_losses[i]);
        s = tape.scale(s, config.lambda_paired / static_cast<double>(pair_losses.size()));
        total = total.defined() ? tape.add(total, s) : s;
      }
      if (!total.defined()) continue;

      if (!std::isfinite(total.data()(0, 0))) {
        std::cerr << "[train] non-finite loss in epoch " << epoch << "; batch of "
                  << batch.examples.size() << " examples (first: "
                  << (batch.examples.empty() ? "-" : batch.examples.front())
                  << "); aborting run\n";
        finite = false;
        break;
      }

      tape.backward(total);
      if (config.clip_norm > 0.0) {
        const double norm = param_grad_norm(store);
        if (norm > config.clip_norm) {
          const double scale = config.clip_norm / norm;
          for (auto& [name, p] : store.entries()) p.grad *= scale;
        }
      }

      TrainStepReport report;
      for (const ad::Value& v : answer_losses) report.answer_loss += v.data()(0, 0);
      if (!answer_losses.empty()) report.answer_loss /= answer_losses.size();
      for (const ad::Value& v : pair_losses) report.paired_loss += v.data()(0, 0);
      if (!pair_losses.empty()) report.paired_loss /= pair_losses.size();
      report.n_pairs = static_cast<int>(pair_losses.size());
      report.grad_norm = param_grad_norm(store);
      if (step_callback) step_callback(report);

      for (const ad::Value& v : answer_losses) answer_sum += v.data()(0, 0);
      answer_n += static_cast<int>(answer_losses.size());
      for (const ad::Value& v : pair_losses) paired_sum += v.data()(0, 0);
      paired_n += static_cast<int>(pair_losses.size());

      if (config.optimizer == "adam") {
        ad::adam_step(store, config.lr, config.beta1, config.beta2, config.adam_eps);
      } else {
        ad::sgd_step(store, config.lr);
      }
    }

    if (!finite) {
      result.diverged = true;
      break;
    }

    EpochMetrics em;
    em.epoch = epoch;
    const double mean_answer = answer_n > 0 ? answer_sum / answer_n : 0.0;
    em.paired_loss = paired_n > 0 ? paired_sum / paired_n : 0.0;
    em.train_loss = mean_answer + config.lambda_paired * em.paired_loss;

    if (!dev_ids.empty()) {
      EvalReport dev = evaluate_questions(executor, store, worlds, dev_ids, "dev");
      em.dev_f1 = dev.answers.f1;
      em.dev_em = dev.answers.em;
    }
    result.history.push_back(em);
    nlohmann::json j;
    j["epoch"] = em.epoch;
    j["train_loss"] = em.train_loss;
    j["paired_loss"] = em.paired_loss;
    j["dev_f1"] = em.dev_f1;
    j["dev_em"] = em.dev_em;
    result.metrics_jsonl += j.dump();
    result.metrics_jsonl += '\n';

    if (dev_ids.empty()) {
      // no dev partition: keep the final parameters, never stop early
      best_store = store;
      best_tau = tau;
      result.best_epoch = epoch;
    } else if (em.dev_f1 > best_dev + 1e-12) {
      best_dev = em.dev_f1;
      best_store = store;
      best_tau = tau;
      result.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.patience) {
      break;
    }
  }

  result.store = std::move(best_store);
  result.model.tau_softargmax = best_tau;
  return result;
}

}  // namespace modpair
