#pragma once

// Model snapshots: spec document, step counter, seed record, named f32
// parameter tensors, and an optional EMA shadow.  The on-disk format is
// little-endian and fully deterministic, so save -> load -> save is
// byte-identical.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "advlab/arch.hpp"

namespace advlab::ckpt {

inline constexpr std::uint32_t kMagic = 0x4b43'4c41u;  // "ALCK" on disk
inline constexpr std::uint32_t kVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<float> values;
};

struct Checkpoint {
  arch::ModelSpec spec;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> ema;  // empty when no shadow was tracked
};

inline Checkpoint snapshot(const arch::Model<float>& model, std::uint64_t step,
                           std::uint64_t seed) {
  Checkpoint c;
  c.spec = model.spec();
  c.step = step;
  c.seed = seed;
  for (const auto& p : model.params())
    c.params.push_back({p.name, p.tensor.data()});
  return c;
}

// pair shadow vectors (ordered like model.params()) with parameter names
inline void attach_ema(Checkpoint& c,
                       const std::vector<std::vector<float>>& shadow) {
  if (shadow.size() != c.params.size())
    throw TensorError("attach_ema: " + std::to_string(shadow.size()) +
                      " shadow tensors for " + std::to_string(c.params.size()) +
                      " parameters");
  c.ema.clear();
  for (std::size_t i = 0; i < shadow.size(); ++i) {
    if (shadow[i].size() != c.params[i].values.size())
      throw TensorError("attach_ema: shadow shape mismatch at " +
                        c.params[i].name);
    c.ema.push_back({c.params[i].name, shadow[i]});
  }
}

// write parameters (or the EMA shadow) back into a model; every stored tensor
// must match a model parameter of the same size and cover all of them
inline void restore(const Checkpoint& c, arch::Model<float>& model,
                    bool use_ema = false) {
  const auto& src = use_ema ? c.ema : c.params;
  if (use_ema && src.empty())
    throw TensorError("restore: checkpoint carries no ema shadow");
  std::unordered_map<std::string, const NamedTensor*> stored;
  for (const auto& nt : src) {
    if (!stored.emplace(nt.name, &nt).second)
      throw TensorError("restore: duplicate parameter '" + nt.name + "'");
    if (!model.has_param(nt.name))
      throw TensorError("restore: model has no parameter named '" + nt.name +
                        "'");
  }
  for (const auto& p : model.params())
    if (!stored.count(p.name))
      throw TensorError("restore: checkpoint is missing parameter '" + p.name +
                        "'");
  for (const auto& nt : src) {
    auto& t = model.param(nt.name);
    if (t.data().size() != nt.values.size())
      throw TensorError("restore: size mismatch for '" + nt.name + "': " +
                        std::to_string(nt.values.size()) + " stored vs " +
                        std::to_string(t.data().size()) + " in model");
    t.mutable_data() = nt.values;
  }
}

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace advlab::ckpt
