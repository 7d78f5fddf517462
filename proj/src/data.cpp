#include "advlab/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "advlab/rng.hpp"

namespace advlab::data {

namespace {

constexpr std::int64_t kRecordBytes = 3073;  // label byte + 3 * 1024 pixels

void append_batch_file(const std::string& path, std::vector<float>& pixels,
                       std::vector<std::int64_t>& labels) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorError("load_cifar10: cannot open " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(is)),
                        std::istreambuf_iterator<char>());
  const auto size = static_cast<std::int64_t>(raw.size());
  if (size % kRecordBytes != 0)
    throw TensorError("load_cifar10: " + path + " truncated at byte offset " +
                      std::to_string(size - size % kRecordBytes) + " (" +
                      std::to_string(size) + " bytes is not a multiple of " +
                      std::to_string(kRecordBytes) + ")");
  const std::int64_t records = size / kRecordBytes;
  for (std::int64_t r = 0; r < records; ++r) {
    const auto* rec =
        reinterpret_cast<const unsigned char*>(raw.data() + r * kRecordBytes);
    if (rec[0] > 9)
      throw TensorError("load_cifar10: " + path + " record " +
                        std::to_string(r) + " has label " +
                        std::to_string(int(rec[0])) + " outside 0..9");
    labels.push_back(rec[0]);
    for (std::int64_t j = 0; j < kRecordBytes - 1; ++j)
      pixels.push_back(static_cast<float>(rec[1 + j]) / 255.0f);
  }
}

}  // namespace

Dataset load_cifar10(const std::string& dir, const std::string& split) {
  std::vector<std::string> files;
  if (split == "train") {
    for (int b = 1; b <= 5; ++b) {
      auto p = dir + "/data_batch_" + std::to_string(b) + ".bin";
      if (std::filesystem::exists(p)) files.push_back(p);
    }
  } else if (split == "test") {
    auto p = dir + "/test_batch.bin";
    if (std::filesystem::exists(p)) files.push_back(p);
  } else {
    throw TensorError("load_cifar10: split must be train or test, got " + split);
  }
  if (files.empty())
    throw TensorError("load_cifar10: no " + split + " batch files under " + dir);

  std::vector<float> pixels;
  std::vector<std::int64_t> labels;
  for (const auto& f : files) append_batch_file(f, pixels, labels);

  Dataset ds;
  const auto n = static_cast<std::int64_t>(labels.size());
  ds.images = Tensor<float>::leaf({n, 3, 32, 32}, std::move(pixels));
  ds.labels = std::move(labels);
  ds.split = split;
  ds.provenance = dir;
  return ds;
}

Dataset synth_blobs(std::int64_t n, std::int64_t classes,
                    std::int64_t resolution, double margin,
                    std::uint64_t seed) {
  if (classes < 2) throw TensorError("synth_blobs: need at least 2 classes");
  if (n < 1 || resolution < 4)
    throw TensorError("synth_blobs: need n >= 1 and resolution >= 4");
  if (!(margin > 0.0) || margin > 0.45)
    throw TensorError("synth_blobs: margin must be in (0, 0.45]");

  const std::int64_t R = resolution, d = 3 * R * R;
  Rng rng(derive_seed(seed, "blobs"));

  // one smooth pattern per class: a low-frequency sinusoid with a distinct
  // integer frequency pair and per-channel phases, normalized to unit rms
  std::vector<std::pair<int, int>> freqs;
  for (int u = 0; u <= 7 && std::int64_t(freqs.size()) < classes; ++u)
    for (int v = 0; v <= 7 && std::int64_t(freqs.size()) < classes; ++v)
      if (u + v > 0) freqs.emplace_back(u, v);
  if (std::int64_t(freqs.size()) < classes)
    throw TensorError("synth_blobs: too many classes for the pattern bank");

  const double tau = 2.0 * std::acos(-1.0);
  std::vector<std::vector<double>> mean(classes, std::vector<double>(d));
  for (std::int64_t c = 0; c < classes; ++c) {
    double phase[3] = {rng.uniform(0.0, tau), rng.uniform(0.0, tau),
                       rng.uniform(0.0, tau)};
    auto [u, v] = freqs[c];
    double ss = 0.0;
    for (std::int64_t ch = 0; ch < 3; ++ch)
      for (std::int64_t yy = 0; yy < R; ++yy)
        for (std::int64_t xx = 0; xx < R; ++xx) {
          double s = std::sin(tau * (u * double(xx) + v * double(yy)) /
                                  double(R) +
                              phase[ch]);
          mean[c][(ch * R + yy) * R + xx] = s;
          ss += s * s;
        }
    double rms = std::sqrt(ss / double(d));
    for (auto& m : mean[c]) m = 0.5 + margin * m / rms;
  }

  // distinct frequencies are orthogonal, so pairwise rms distance lands near
  // margin*sqrt(2); verify and stretch if some pair ever fell short
  double min_dist = 1e300;
  for (std::int64_t a = 0; a < classes; ++a)
    for (std::int64_t b = a + 1; b < classes; ++b) {
      double ss = 0.0;
      for (std::int64_t j = 0; j < d; ++j) {
        double dv = mean[a][j] - mean[b][j];
        ss += dv * dv;
      }
      min_dist = std::min(min_dist, std::sqrt(ss / double(d)));
    }
  if (min_dist < margin) {
    double stretch = margin / min_dist;
    for (auto& mc : mean)
      for (auto& m : mc) m = 0.5 + (m - 0.5) * stretch;
  }

  const double sigma = 0.05;
  std::vector<float> pixels(static_cast<std::size_t>(n * d));
  std::vector<std::int64_t> labels(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t c = i % classes;
    labels[i] = c;
    for (std::int64_t j = 0; j < d; ++j) {
      double v = mean[c][j] + sigma * rng.normal();
      pixels[i * d + j] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
    }
  }

  Dataset ds;
  ds.images = Tensor<float>::leaf({n, 3, R, R}, std::move(pixels));
  ds.labels = std::move(labels);
  ds.split = "train";
  ds.provenance = "synth_blobs(seed=" + std::to_string(seed) + ")";
  return ds;
}

Dataset slice(const Dataset& ds, std::int64_t from, std::int64_t count) {
  const std::int64_t n = ds.size();
  if (from < 0 || count < 0 || from + count > n)
    throw TensorError("slice: range [" + std::to_string(from) + ", " +
                      std::to_string(from + count) + ") outside dataset of " +
                      std::to_string(n));
  Shape s = ds.images.shape();
  const std::int64_t d = numel(s) / n;
  s[0] = count;
  std::vector<float> pixels(ds.images.data().begin() + from * d,
                            ds.images.data().begin() + (from + count) * d);
  Dataset out;
  out.images = Tensor<float>::leaf(std::move(s), std::move(pixels));
  out.labels.assign(ds.labels.begin() + from, ds.labels.begin() + from + count);
  out.split = ds.split;
  out.provenance = ds.provenance;
  return out;
}

}  // namespace advlab::data
