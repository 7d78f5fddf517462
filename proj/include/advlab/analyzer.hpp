#pragma once

// Symbolic cost model: walks a ModelSpec and reports exact parameter and
// multiply-accumulate counts per layer, without allocating tensors.
//
// Counting convention: one cost unit = one multiply-accumulate.  Convolutions
// cost k^2 * C_in/groups * C_out per output position, linears cost in*out per
// token, attention counts its four projections plus both LxL mixing matmuls;
// normalization, activations, softmax and residual adds count as zero.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "advlab/arch.hpp"

namespace advlab::analyzer {

struct CostRow {
  std::string name;
  std::vector<std::int64_t> out_shape;  // per example, batch omitted
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

struct CostReport {
  std::string model;
  std::int64_t resolution = 0;
  std::vector<CostRow> rows;
  std::int64_t total_params = 0;  // always the sum over rows
  std::int64_t total_macs = 0;
};

std::int64_t count_params(const arch::ModelSpec& spec);
std::int64_t count_macs(const arch::ModelSpec& spec, std::int64_t resolution);

CostReport analyze(const arch::ModelSpec& spec, std::int64_t resolution,
                   std::string name = "model");

// one report per preset name, all at the same resolution
std::vector<CostReport> cost_table(const std::vector<std::string>& presets,
                                   std::int64_t resolution);

// the 14 full-size presets in paired order (base, base+convstem, ...)
std::vector<std::string> fullsize_presets();

// csv: name,params,macs,params_delta_pct,macs_delta_pct -- delta columns are
// filled on "+convstem" rows whose base row appears earlier in the list.
// text: aligned table with params in millions and macs in billions.
std::string render_csv(const std::vector<CostReport>& reports);
std::string render_text(const std::vector<CostReport>& reports);

}  // namespace advlab::analyzer
