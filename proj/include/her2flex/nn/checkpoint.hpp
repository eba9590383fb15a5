#pragma once

#include "her2flex/nn/params.hpp"

#include <map>
#include <string>

namespace her2flex::nn {

// Self-describing binary checkpoint: named little-endian float32 arrays with
// shape headers, plus a stage tag and the resolved run config text. Save then
// load reproduces every array bitwise.
struct Checkpoint {
  std::string stage;
  std::string config_text;
  std::map<std::string, MatrixF> arrays;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Merges a store's parameters under "<prefix>/<name>".
void add_store(Checkpoint& ckpt, const std::string& prefix, const ParamStore<float>& store);

// Copies arrays under "<prefix>/" into an already-declared store; missing
// names or shape-header mismatches are hard errors.
void load_store(const Checkpoint& ckpt, const std::string& prefix, ParamStore<float>& store);

}  // namespace her2flex::nn
