#pragma once

// Desk-scale datasets: NCHW float images in [0,1] plus integer labels.  Two
// sources — the canonical binary image batches on disk and a seeded synthetic
// generator whose classes are smooth, well-separated patterns.

#include <cstdint>
#include <string>
#include <vector>

#include "advlab/tensor.hpp"

namespace advlab::data {

struct Dataset {
  Tensor<float> images;              // [N,3,H,W], values in [0,1]
  std::vector<std::int64_t> labels;
  std::string split;                 // "train" / "test"
  std::string provenance;            // source directory or generator tag

  std::int64_t size() const {
    return images.shape().empty() ? 0 : images.shape()[0];
  }
  std::int64_t resolution() const { return images.shape()[3]; }
};

// binary batches of 3073-byte records: one label byte, then the 32x32 red
// plane, green plane, blue plane; pixels scaled by 1/255.  split selects
// data_batch_*.bin ("train") or test_batch.bin ("test").
Dataset load_cifar10(const std::string& dir, const std::string& split = "train");

// class-conditional Gaussian blobs in image space: each class is a smooth
// sinusoidal pattern around mid-gray, pairwise separated by at least `margin`
// in per-pixel rms terms, plus sigma=0.05 pixel noise, clipped to [0,1];
// labels cycle 0..classes-1
Dataset synth_blobs(std::int64_t n, std::int64_t classes,
                    std::int64_t resolution, double margin, std::uint64_t seed);

// contiguous [from, from+count) slice keeping split/provenance
Dataset slice(const Dataset& ds, std::int64_t from, std::int64_t count);

}  // namespace advlab::data
