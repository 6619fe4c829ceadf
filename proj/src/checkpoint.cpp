#include "modpair/checkpoint.hpp"

#include <json.hpp>

#include "modpair/dataset_io.hpp"

namespace modpair {

using nlohmann::json;

namespace {

json model_to_json(const ModelConfig& m) {
  json j;
  j["d_model"] = m.d_model;
  j["max_seq"] = m.max_seq;
  j["c_max"] = m.c_max;
  j["beta_count"] = m.beta_count;
  j["tau_softargmax"] = m.tau_softargmax;
  j["tau_compare"] = m.tau_compare;
  j["alpha_span"] = m.alpha_span;
  j["align_window"] = m.align_window;
  j["value_bin_min"] = m.value_bin_min;
  j["value_bin_max"] = m.value_bin_max;
  j["yeardiff_bin_min"] = m.yeardiff_bin_min;
  j["yeardiff_bin_max"] = m.yeardiff_bin_max;
  j["emb_init"] = m.emb_init;
  j["weight_init"] = m.weight_init;
  j["gamma_dist_init"] = m.gamma_dist_init;
  j["value_unit"] = m.value_unit;
  j["count_knots"] = m.count_knots;
  return j;
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.d_model = j.at("d_model").get<int>();
  m.max_seq = j.at("max_seq").get<int>();
  m.c_max = j.at("c_max").get<int>();
  m.beta_count = j.at("beta_count").get<double>();
  m.tau_softargmax = j.at("tau_softargmax").get<double>();
  m.tau_compare = j.at("tau_compare").get<double>();
  m.alpha_span = j.at("alpha_span").get<double>();
  m.align_window = j.at("align_window").get<int>();
  m.value_bin_min = j.at("value_bin_min").get<int>();
  m.value_bin_max = j.at("value_bin_max").get<int>();
  m.yeardiff_bin_min = j.at("yeardiff_bin_min").get<int>();
  m.yeardiff_bin_max = j.at("yeardiff_bin_max").get<int>();
  m.emb_init = j.at("emb_init").get<double>();
  m.weight_init = j.at("weight_init").get<double>();
  m.gamma_dist_init = j.at("gamma_dist_init").get<double>();
  m.value_unit = j.at("value_unit").get<double>();
  m.count_knots = j.at("count_knots").get<int>();
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& model, const Vocab& vocab,
                     const ad::ParamStore& store) {
  json j;
  j["format"] = kCheckpointFormat;
  j["model"] = model_to_json(model);
  j["vocab"] = vocab.tokens;
  j["params"] = json::parse(ad::params_to_json(store));
  write_file_atomic(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  json j = json::parse(read_file(path));
  if (!j.contains("format") || j.at("format").get<std::string>() != kCheckpointFormat) {
    throw IoError("'" + path + "' is not a " + std::string(kCheckpointFormat) + " checkpoint");
  }
  Checkpoint ckpt;
  ckpt.model = model_from_json(j.at("model"));
  ckpt.vocab = Vocab::from_tokens(j.at("vocab").get<std::vector<std::string>>());
  ad::params_from_json(j.at("params").dump(), ckpt.store);
  return ckpt;
}

}  // namespace modpair
