// Command-line front end: deterministic, file-based pipeline from dataset
// generation through pairing, training, evaluation, and run comparison.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "modpair/checkpoint.hpp"
#include "modpair/config.hpp"
#include "modpair/dataset_io.hpp"
#include "modpair/evaluation.hpp"
#include "modpair/pairing.hpp"
#include "modpair/rng.hpp"
#include "modpair/training.hpp"
#include "modpair/world.hpp"

namespace {

using namespace modpair;
using nlohmann::json;

std::string digest_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

/// Written atomically next to the primary output of every successful
/// command.
class ManifestWriter {
 public:
  ManifestWriter(std::string command, std::uint64_t seed)
      : command_(std::move(command)), seed_(seed), start_(std::chrono::steady_clock::now()) {}

  void add_input(const std::string& path) {
    inputs_[path] = digest_hex(read_file(path));
  }
  void set_config_text(const std::string& text) { config_hash_ = digest_hex(text); }
  void add_output(const std::string& path) { outputs_.push_back(path); }

  void write(const std::string& path) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j;
    j["command"] = command_;
    j["config_hash"] = config_hash_;
    j["seed"] = seed_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["wall_time_s"] = wall;
    write_file_atomic(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string config_hash_ = "default";
  std::uint64_t seed_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string default_splits_path(const std::string& data_path) {
  std::filesystem::path p(data_path);
  p.replace_extension(".splits.json");
  return p.string();
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& config_path, std::uint64_t seed, const std::string& out,
                 const std::string& splits_out, int workers) {
  ManifestWriter manifest("gen-data", seed);
  KeyValueConfig kv;
  if (!config_path.empty()) {
    kv = KeyValueConfig::parse_file(config_path);
    manifest.add_input(config_path);
    manifest.set_config_text(read_file(config_path));
  }
  GenConfig config = gen_config_from(kv);
  Dataset ds = generate_dataset(seed, config, config.n_passages, workers);
  validate_dataset(ds.worlds);
  save_dataset_jsonl(out, ds.worlds);
  const std::string splits = splits_out.empty() ? default_splits_path(out) : splits_out;
  save_split_manifest(splits, ds.split);
  manifest.add_output(out);
  manifest.add_output(splits);
  manifest.write(out + ".manifest.json");
  int n_questions = 0;
  for (const WorldInstance& w : ds.worlds) n_questions += static_cast<int>(w.questions.size());
  std::cout << "wrote " << ds.worlds.size() << " passages / " << n_questions
            << " questions to " << out << "\n";
  return 0;
}

int cmd_find_pairs(const std::string& data, const std::string& out, double tau_sim,
                   std::uint64_t seed) {
  ManifestWriter manifest("find-pairs", seed);
  manifest.add_input(data);
  std::vector<WorldInstance> worlds = load_dataset_jsonl(data);
  validate_dataset(worlds);
  ArgEmbeddings embeddings(seed);
  std::vector<PairLink> links;
  for (const WorldInstance& w : worlds) {
    std::vector<PairLink> found = find_natural_pairs(w, default_lexicon(), embeddings, tau_sim);
    links.insert(links.end(), found.begin(), found.end());
  }
  save_pairs_jsonl(out, links);
  manifest.add_output(out);
  manifest.write(out + ".manifest.json");
  std::cout << "found " << links.size() << " natural pairs\n";
  return 0;
}

int cmd_make_pairs(const std::string& data, const std::string& out,
                   const std::string& out_data) {
  ManifestWriter manifest("make-pairs", 0);
  manifest.add_input(data);
  std::vector<WorldInstance> worlds = load_dataset_jsonl(data);
  validate_dataset(worlds);
  std::vector<PairLink> links;
  int n_new = 0;
  for (WorldInstance& w : worlds) {
    AugmentResult aug = apply_template_constructions(w);
    n_new += static_cast<int>(aug.new_examples.size());
    for (QAExample& ex : aug.new_examples) w.questions.push_back(std::move(ex));
    links.insert(links.end(), aug.links.begin(), aug.links.end());
  }
  validate_dataset(worlds);
  validate_pairs(worlds, links);
  save_dataset_jsonl(out_data, worlds);
  save_pairs_jsonl(out, links);
  manifest.add_output(out);
  manifest.add_output(out_data);
  manifest.write(out + ".manifest.json");
  std::cout << "constructed " << n_new << " examples and " << links.size()
            << " template pairs\n";
  return 0;
}

int cmd_gen_probes(const std::string& data, std::uint64_t seed, int k, const std::string& out,
                   const std::string& out_data, double tau_sim) {
  ManifestWriter manifest("gen-probes", seed);
  manifest.add_input(data);
  std::vector<WorldInstance> worlds = load_dataset_jsonl(data);
  validate_dataset(worlds);
  ArgEmbeddings embeddings(seed);
  std::vector<PairLink> links;
  int n_new = 0;
  for (std::size_t i = 0; i < worlds.size(); ++i) {
    AugmentResult aug = generate_probe_pairs(worlds[i], mix_seed(seed, i), k,
                                             default_lexicon(), embeddings, tau_sim);
    n_new += static_cast<int>(aug.new_examples.size());
    for (QAExample& ex : aug.new_examples) worlds[i].questions.push_back(std::move(ex));
    links.insert(links.end(), aug.links.begin(), aug.links.end());
  }
  validate_dataset(worlds);
  validate_pairs(worlds, links);
  save_dataset_jsonl(out_data, worlds);
  save_pairs_jsonl(out, links);
  manifest.add_output(out);
  manifest.add_output(out_data);
  manifest.write(out + ".manifest.json");
  std::cout << "generated " << n_new << " probes and " << links.size() << " pairs\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& pairs_csv,
              const std::string& config_path, const std::string& out_dir,
              const std::string& splits_path) {
  KeyValueConfig kv;
  std::string config_text;
  if (!config_path.empty()) {
    config_text = read_file(config_path);
    kv = KeyValueConfig::parse_text(config_text);
  }
  TrainConfig config = train_config_from(kv);
  ManifestWriter manifest("train", config.seed);
  manifest.set_config_text(config_text);
  manifest.add_input(data);
  if (!config_path.empty()) manifest.add_input(config_path);

  std::vector<PairLink> links;
  if (pairs_csv.empty()) {
    if (config.lambda_paired > 0.0) {
      throw ConfigError("lambda_paired > 0 requires --pairs");
    }
  } else {
    for (const std::string& path : split_list(pairs_csv)) {
      manifest.add_input(path);
      std::vector<PairLink> part = load_pairs_jsonl(path);
      links.insert(links.end(), part.begin(), part.end());
    }
  }

  std::vector<WorldInstance> worlds = load_dataset_jsonl(data);
  validate_dataset(worlds);
  validate_pairs(worlds, links);
  const std::string splits = splits_path.empty() ? default_splits_path(data) : splits_path;
  manifest.add_input(splits);
  SplitManifest split = load_split_manifest(splits);

  TrainResult result = train(worlds, split, links, config);
  if (result.diverged) {
    std::cerr << "training aborted on non-finite loss; partial metrics kept\n";
  }

  std::filesystem::create_directories(out_dir);
  const std::string ckpt_path = out_dir + "/checkpoint.json";
  const std::string metrics_path = out_dir + "/metrics.jsonl";
  save_checkpoint(ckpt_path, result.model, result.vocab, result.store);
  write_file_atomic(metrics_path, result.metrics_jsonl);
  manifest.add_output(ckpt_path);
  manifest.add_output(metrics_path);
  manifest.write(out_dir + "/manifest.json");
  std::cout << "trained " << result.history.size() << " epochs; best epoch "
            << result.best_epoch << "\n";
  return 0;
}

int cmd_eval(const std::string& data, const std::string& ckpt_path, const std::string& part,
             const std::string& out, const std::string& splits_path,
             const std::string& dump_path, int workers) {
  ManifestWriter manifest("eval", 0);
  manifest.add_input(data);
  manifest.add_input(ckpt_path);
  std::vector<WorldInstance> worlds = load_dataset_jsonl(data);
  validate_dataset(worlds);
  const std::string splits = splits_path.empty() ? default_splits_path(data) : splits_path;
  manifest.add_input(splits);
  SplitManifest split = load_split_manifest(splits);
  if (part != "train" && part != "dev" && part != "test") {
    throw ConfigError("--split must be train, dev, or test");
  }
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Executor executor(ckpt.model, ckpt.vocab);
  const std::set<std::string> ids = split_question_ids(worlds, split, part);
  std::map<std::string, std::string> dumps;
  EvalReport report = evaluate_questions(executor, ckpt.store, worlds, ids, part,
                                         dump_path.empty() ? nullptr : &dumps, workers);
  write_file_atomic(out, report.to_json());
  manifest.add_output(out);
  if (!dump_path.empty()) {
    json dj = json::object();
    for (const auto& [qid, text] : dumps) dj[qid] = json::parse(text);
    write_file_atomic(dump_path, dj.dump(2) + "\n");
    manifest.add_output(dump_path);
  }
  manifest.write(out + ".manifest.json");
  std::cout << "evaluated " << report.n_examples << " questions: f1=" << report.answers.f1
            << " em=" << report.answers.em
            << " faithfulness=" << report.faithfulness.overall << "\n";
  return 0;
}

int cmd_comp_split(const std::string& data, const std::string& spec_name,
                   const std::string& out) {
  ManifestWriter manifest("comp-split", 0);
  manifest.add_input(data);
  std::vector<WorldInstance> worlds = load_dataset_jsonl(data);
  validate_dataset(worlds);
  SplitManifest split = build_comp_split(worlds, SplitSpec::by_name(spec_name));
  save_split_manifest(out, split);
  manifest.add_output(out);
  manifest.write(out + ".manifest.json");
  std::cout << "held out " << split.test.size() << " questions; " << split.train.size()
            << " train / " << split.dev.size() << " dev remain\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& runs, const std::string& out) {
  if (runs.size() < 2 || runs.size() % 2 != 0) {
    throw ConfigError("--runs takes an even number of report files "
                      "(baseline group then candidate group)");
  }
  ManifestWriter manifest("compare", 0);
  std::vector<EvalReport> baseline, candidate;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    manifest.add_input(runs[i]);
    EvalReport r = EvalReport::from_json_text(read_file(runs[i]));
    (i < runs.size() / 2 ? baseline : candidate).push_back(std::move(r));
  }
  RunComparison cmp = compare_runs(baseline, candidate);
  write_file_atomic(out, cmp.to_json());
  manifest.add_output(out);
  manifest.write(out + ".manifest.json");
  std::cout << "f1 delta mean " << cmp.f1_mean << " +/- " << cmp.f1_stdev << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modpair: module-program QA engine with paired-consistency training"};
  app.require_subcommand(1);

  // gen-data
  std::string gd_config, gd_out, gd_splits;
  std::uint64_t gd_seed = 0;
  int gd_workers = 1;
  CLI::App* gen_data = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen_data->add_option("--seed", gd_seed, "generation seed")->capture_default_str();
  gen_data->add_option("--config", gd_config, "key=value generation config file");
  gen_data->add_option("--out", gd_out, "output dataset JSONL")->required();
  gen_data->add_option("--splits", gd_splits,
                       "split manifest path (default: <out>.splits.json)");
  gen_data->add_option("--workers", gd_workers, "parallel passage workers")
      ->capture_default_str();

  // find-pairs
  std::string fp_data, fp_out;
  double fp_tau = 0.6;
  std::uint64_t fp_seed = 0;
  CLI::App* find_pairs =
      app.add_subcommand("find-pairs", "discover naturally occurring pairs");
  find_pairs->add_option("--data", fp_data, "dataset JSONL")->required();
  find_pairs->add_option("--out", fp_out, "output pair JSONL")->required();
  find_pairs->add_option("--tau-sim", fp_tau, "similarity threshold")->capture_default_str();
  find_pairs->add_option("--seed", fp_seed, "matcher embedding seed")->capture_default_str();

  // make-pairs
  std::string mp_data, mp_out, mp_out_data;
  CLI::App* make_pairs =
      app.add_subcommand("make-pairs", "construct template probes and inversions");
  make_pairs->add_option("--data", mp_data, "dataset JSONL")->required();
  make_pairs->add_option("--out", mp_out, "output pair JSONL")->required();
  make_pairs->add_option("--out-data", mp_out_data, "augmented dataset JSONL")->required();

  // gen-probes
  std::string gp_data, gp_out, gp_out_data;
  std::uint64_t gp_seed = 0;
  int gp_k = 10;
  double gp_tau = 0.6;
  CLI::App* gen_probes = app.add_subcommand("gen-probes", "generate rule-based probe pairs");
  gen_probes->add_option("--data", gp_data, "dataset JSONL")->required();
  gen_probes->add_option("--seed", gp_seed, "sampling seed")->capture_default_str();
  gen_probes->add_option("--k", gp_k, "number/date positions per passage")
      ->capture_default_str();
  gen_probes->add_option("--out", gp_out, "output pair JSONL")->required();
  gen_probes->add_option("--out-data", gp_out_data, "augmented dataset JSONL")->required();
  gen_probes->add_option("--tau-sim", gp_tau, "similarity threshold")->capture_default_str();

  // train
  std::string tr_data, tr_pairs, tr_config, tr_out_dir, tr_splits;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--data", tr_data, "dataset JSONL")->required();
  train_cmd->add_option("--pairs", tr_pairs, "comma-separated pair JSONL files");
  train_cmd->add_option("--config", tr_config, "key=value training config file");
  train_cmd->add_option("--out-dir", tr_out_dir, "output directory")->required();
  train_cmd->add_option("--splits", tr_splits,
                        "split manifest path (default: <data>.splits.json)");

  // eval
  std::string ev_data, ev_ckpt, ev_split = "test", ev_out, ev_splits, ev_dump;
  int ev_workers = 1;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--data", ev_data, "dataset JSONL")->required();
  eval_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint JSON")->required();
  eval_cmd->add_option("--split", ev_split, "train|dev|test")->capture_default_str();
  eval_cmd->add_option("--out", ev_out, "output report JSON")->required();
  eval_cmd->add_option("--splits", ev_splits,
                       "split manifest path (default: <data>.splits.json)");
  eval_cmd->add_option("--dump-traces", ev_dump, "write per-question trace JSON here");
  eval_cmd->add_option("--workers", ev_workers, "parallel evaluation workers")
      ->capture_default_str();

  // comp-split
  std::string cs_data, cs_spec, cs_out;
  CLI::App* comp_split =
      app.add_subcommand("comp-split", "build a compositional-generalization split");
  comp_split->add_option("--data", cs_data, "dataset JSONL")->required();
  comp_split->add_option("--spec", cs_spec, "complex-arithmetic | filter-argmax")->required();
  comp_split->add_option("--out", cs_out, "output split manifest JSON")->required();

  // compare
  std::vector<std::string> cp_runs;
  std::string cp_out;
  CLI::App* compare_cmd = app.add_subcommand("compare", "compare two run groups");
  compare_cmd
      ->add_option("--runs", cp_runs,
                   "even-length list of report files: baseline group then candidate group")
      ->required()
      ->expected(-2);
  compare_cmd->add_option("--out", cp_out, "output comparison JSON")->required();

  try {
    app.parse(argc, argv);
    if (gen_data->parsed()) {
      return cmd_gen_data(gd_config, gd_seed, gd_out, gd_splits, gd_workers);
    }
    if (find_pairs->parsed()) return cmd_find_pairs(fp_data, fp_out, fp_tau, fp_seed);
    if (make_pairs->parsed()) return cmd_make_pairs(mp_data, mp_out, mp_out_data);
    if (gen_probes->parsed()) {
      return cmd_gen_probes(gp_data, gp_seed, gp_k, gp_out, gp_out_data, gp_tau);
    }
    if (train_cmd->parsed()) {
      return cmd_train(tr_data, tr_pairs, tr_config, tr_out_dir, tr_splits);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(ev_data, ev_ckpt, ev_split, ev_out, ev_splits, ev_dump, ev_workers);
    }
    if (comp_split->parsed()) return cmd_comp_split(cs_data, cs_spec, cs_out);
    if (compare_cmd->parsed()) return cmd_compare(cp_runs, cp_out);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SyntaxError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const UnresolvableArg& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DanglingPairError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SplitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SplitMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const LengthMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const KindMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
