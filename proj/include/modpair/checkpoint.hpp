#pragma once

#include <string>

#include "modpair/autodiff.hpp"
#include "modpair/executor.hpp"

namespace modpair {

inline constexpr const char* kCheckpointFormat = "MODPAIR-CKPT-1";

struct Checkpoint {
  ModelConfig model;
  Vocab vocab;
  ad::ParamStore store;
};

/// Versioned JSON checkpoint: format header, model settings, vocabulary,
/// and the name -> shape -> row-major values parameter map.
void save_checkpoint(const std::string& path, const ModelConfig& model, const Vocab& vocab,
                     const ad::ParamStore& store);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace modpair
