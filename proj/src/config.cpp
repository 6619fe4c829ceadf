#include "modpair/config.hpp"

#include <set>
#include <sstream>

#include "modpair/dataset_io.hpp"

namespace modpair {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check_known(const KeyValueConfig& kv, const std::set<std::string>& known,
                 const char* what) {
  for (const auto& [key, value] : kv.values) {
    if (!known.count(key)) {
      throw ConfigError(std::string(what) + ": unknown config key '" + key + "'");
    }
  }
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_text(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    kv.values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  return parse_text(read_file(path));
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: " + it->second);
  }
}

double KeyValueConfig::get_real(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: " + it->second);
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: " + it->second);
}

GenConfig gen_config_from(const KeyValueConfig& kv) {
  check_known(kv,
              {"n_passages", "game_fraction", "events_min", "events_max", "event_kinds",
               "value_min", "value_max", "year_min", "year_max", "questions_min",
               "questions_max", "question_set", "synonym_variants"},
              "gen config");
  GenConfig c;
  c.n_passages = kv.get_int("n_passages", c.n_passages);
  c.game_fraction = kv.get_real("game_fraction", c.game_fraction);
  c.events_min = kv.get_int("events_min", c.events_min);
  c.events_max = kv.get_int("events_max", c.events_max);
  c.event_kinds = kv.get_int("event_kinds", c.event_kinds);
  c.value_min = kv.get_int("value_min", c.value_min);
  c.value_max = kv.get_int("value_max", c.value_max);
  c.year_min = kv.get_int("year_min", c.year_min);
  c.year_max = kv.get_int("year_max", c.year_max);
  c.questions_min = kv.get_int("questions_min", c.questions_min);
  c.questions_max = kv.get_int("questions_max", c.questions_max);
  c.question_set = kv.get("question_set", c.question_set);
  c.synonym_variants = kv.get_bool("synonym_variants", c.synonym_variants);
  c.validate();
  return c;
}

TrainConfig train_config_from(const KeyValueConfig& kv) {
  check_known(kv,
              {"lambda_paired", "epochs", "batch_size", "optimizer", "lr", "beta1", "beta2",
               "adam_eps", "eps_kl", "seed", "pair_sources", "patience", "tau_start", "clip_norm",
               "tau_end", "d_model", "max_seq", "c_max", "beta_count", "tau_compare",
               "alpha_span", "align_window", "value_bin_min", "value_bin_max",
               "yeardiff_bin_min", "yeardiff_bin_max", "emb_init", "weight_init",
               "gamma_dist_init", "value_unit", "count_knots"},
              "train config");
  TrainConfig c;
  c.lambda_paired = kv.get_real("lambda_paired", c.lambda_paired);
  c.epochs = kv.get_int("epochs", c.epochs);
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.optimizer = kv.get("optimizer", c.optimizer);
  c.lr = kv.get_real("lr", c.lr);
  c.beta1 = kv.get_real("beta1", c.beta1);
  c.beta2 = kv.get_real("beta2", c.beta2);
  c.adam_eps = kv.get_real("adam_eps", c.adam_eps);
  c.eps_kl = kv.get_real("eps_kl", c.eps_kl);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<int>(c.seed)));
  if (kv.has("pair_sources")) {
    c.pair_sources.clear();
    std::istringstream in(kv.get("pair_sources", ""));
    std::string part;
    while (std::getline(in, part, ',')) {
      part = trim(part);
      if (part.empty()) continue;
      if (part != "found" && part != "template" && part != "generated") {
        throw ConfigError("unknown pair source '" + part + "'");
      }
      c.pair_sources.insert(part);
    }
  }
  c.patience = kv.get_int("patience", c.patience);
  c.tau_start = kv.get_real("tau_start", c.tau_start);
  c.tau_end = kv.get_real("tau_end", c.tau_end);
  c.clip_norm = kv.get_real("clip_norm", c.clip_norm);

  ModelConfig& m = c.model;
  m.d_model = kv.get_int("d_model", m.d_model);
  m.max_seq = kv.get_int("max_seq", m.max_seq);
  m.c_max = kv.get_int("c_max", m.c_max);
  m.beta_count = kv.get_real("beta_count", m.beta_count);
  m.tau_compare = kv.get_real("tau_compare", m.tau_compare);
  m.alpha_span = kv.get_real("alpha_span", m.alpha_span);
  m.align_window = kv.get_int("align_window", m.align_window);
  m.value_bin_min = kv.get_int("value_bin_min", m.value_bin_min);
  m.value_bin_max = kv.get_int("value_bin_max", m.value_bin_max);
  m.yeardiff_bin_min = kv.get_int("yeardiff_bin_min", m.yeardiff_bin_min);
  m.yeardiff_bin_max = kv.get_int("yeardiff_bin_max", m.yeardiff_bin_max);
  m.emb_init = kv.get_real("emb_init", m.emb_init);
  m.weight_init = kv.get_real("weight_init", m.weight_init);
  m.gamma_dist_init = kv.get_real("gamma_dist_init", m.gamma_dist_init);
  m.value_unit = kv.get_real("value_unit", m.value_unit);
  m.count_knots = kv.get_int("count_knots", m.count_knots);
  m.tau_softargmax = c.tau_start;

  if (c.epochs < 1 || c.batch_size < 1 || c.lr <= 0 || c.lambda_paired < 0 ||
      c.patience < 1 || m.d_model < 4 || m.c_max < 1) {
    throw ConfigError("train config value out of range");
  }
  return c;
}

}  // namespace modpair
