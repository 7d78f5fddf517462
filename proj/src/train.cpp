#include "advlab/train.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "advlab/attack.hpp"

namespace advlab::train {

const char* augmentation_name(Augmentation a) {
  switch (a) {
    case Augmentation::Basic: return "basic";
    case Augmentation::ThreeAug: return "3aug";
    default: return "heavy";
  }
}

Augmentation parse_augmentation(const std::string& name) {
  if (name == "basic") return Augmentation::Basic;
  if (name == "3aug") return Augmentation::ThreeAug;
  if (name == "heavy") return Augmentation::Heavy;
  throw TensorError("config: unknown augmentation '" + name +
                    "' (want basic, 3aug or heavy)");
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw TensorError("config: epochs must be >= 0");
  if (cfg.warmup_peak_epoch < 0)
    throw TensorError("config: warmup_peak_epoch must be >= 0");
  if (!(cfg.peak_lr > 0.0)) throw TensorError("config: peak_lr must be > 0");
  if (cfg.weight_decay < 0.0)
    throw TensorError("config: weight_decay must be >= 0");
  for (double b : {cfg.beta1, cfg.beta2})
    if (!(b >= 0.0 && b < 1.0))
      throw TensorError("config: betas must be in [0, 1)");
  if (cfg.batch_size < 1) throw TensorError("config: batch_size must be >= 1");
  if (!(cfg.label_smoothing >= 0.0 && cfg.label_smoothing < 1.0))
    throw TensorError("config: label_smoothing must be in [0, 1)");
  if (!(cfg.ema_decay >= 0.0 && cfg.ema_decay < 1.0))
    throw TensorError("config: ema_decay must be in [0, 1)");
  if (cfg.attack_steps < 0)
    throw TensorError("config: attack_steps must be >= 0");
  if (cfg.attack_warmup_epochs < 0)
    throw TensorError("config: attack_warmup_epochs must be >= 0");
  if (!(cfg.tm.epsilon >= 0.0))
    throw TensorError("config: threat radius must be >= 0");
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction <= 0.5))
    throw TensorError("config: val_fraction must be in [0, 0.5]");
}

namespace {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  const char* s = v.c_str();
  char* end = nullptr;
  double x = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw TensorError("config: bad number '" + v + "' for " + key);
  return x;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  double x = parse_double(key, v);
  auto i = static_cast<std::int64_t>(x);
  if (static_cast<double>(i) != x)
    throw TensorError("config: " + key + " must be an integer, got '" + v + "'");
  return i;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

TrainConfig config_from_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw TensorError("config: expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, val));
    else if (key == "warmup_peak_epoch")
      cfg.warmup_peak_epoch = static_cast<int>(parse_int(key, val));
    else if (key == "peak_lr") cfg.peak_lr = parse_double(key, val);
    else if (key == "weight_decay") cfg.weight_decay = parse_double(key, val);
    else if (key == "beta1") cfg.beta1 = parse_double(key, val);
    else if (key == "beta2") cfg.beta2 = parse_double(key, val);
    else if (key == "batch_size")
      cfg.batch_size = static_cast<int>(parse_int(key, val));
    else if (key == "label_smoothing")
      cfg.label_smoothing = parse_double(key, val);
    else if (key == "ema_decay") cfg.ema_decay = parse_double(key, val);
    else if (key == "attack_steps")
      cfg.attack_steps = static_cast<int>(parse_int(key, val));
    else if (key == "attack_warmup_epochs")
      cfg.attack_warmup_epochs = static_cast<int>(parse_int(key, val));
    else if (key == "threat") cfg.tm = threat::parse_threat(val);
    else if (key == "augmentation") cfg.augmentation = parse_augmentation(val);
    else if (key == "warm_start") cfg.warm_start = val;
    else if (key == "val_fraction") cfg.val_fraction = parse_double(key, val);
    else if (key == "seed")
      cfg.seed = static_cast<std::uint64_t>(parse_int(key, val));
    else throw TensorError("config: unknown key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

std::string config_to_text(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "epochs=" << cfg.epochs << "\n"
      << "warmup_peak_epoch=" << cfg.warmup_peak_epoch << "\n"
      << "peak_lr=" << fmt_full(cfg.peak_lr) << "\n"
      << "weight_decay=" << fmt_full(cfg.weight_decay) << "\n"
      << "beta1=" << fmt_full(cfg.beta1) << "\n"
      << "beta2=" << fmt_full(cfg.beta2) << "\n"
      << "batch_size=" << cfg.batch_size << "\n"
      << "label_smoothing=" << fmt_full(cfg.label_smoothing) << "\n"
      << "ema_decay=" << fmt_full(cfg.ema_decay) << "\n"
      << "attack_steps=" << cfg.attack_steps << "\n"
      << "attack_warmup_epochs=" << cfg.attack_warmup_epochs << "\n"
      << "threat=" << threat::norm_name(cfg.tm.p) << ":"
      << fmt_full(cfg.tm.epsilon) << "\n"
      << "augmentation=" << augmentation_name(cfg.augmentation) << "\n"
      << "warm_start=" << cfg.warm_start << "\n"
      << "val_fraction=" << fmt_full(cfg.val_fraction) << "\n"
      << "seed=" << cfg.seed << "\n";
  return out.str();
}

TrainConfig transfer_preset(const std::string& name) {
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.warmup_peak_epoch = 2;
  cfg.augmentation = Augmentation::Heavy;
  cfg.tm = {threat::Norm::Linf, 8.0 / 255.0};
  if (name == "flowers102") {
    cfg.attack_steps = 2;
    cfg.peak_lr = 4e-3;
    cfg.weight_decay = 5e-3;
    cfg.batch_size = 30;
  } else if (name == "cifar-transfer-a") {
    cfg.attack_steps = 10;
    cfg.peak_lr = 2e-4;
    cfg.weight_decay = 0.0;
    cfg.batch_size = 1024;
  } else if (name == "cifar-transfer-b") {
    cfg.attack_steps = 10;
    cfg.peak_lr = 2e-4;
    cfg.weight_decay = 5e-3;
    cfg.batch_size = 256;
  } else {
    throw TensorError("transfer_preset: unknown name '" + name +
                      "' (want flowers102, cifar-transfer-a or "
                      "cifar-transfer-b)");
  }
  return cfg;
}

namespace {

// augment one gathered image in place; shared by all three modes
void augment_image(std::vector<float>& im, std::int64_t c, std::int64_t h,
                   std::int64_t w, Augmentation mode,
                   const AugmentationConfig& aug, Rng& rng) {
  basic_augment(im, c, h, w, rng);
  if (mode == Augmentation::ThreeAug) {
    // one of grayscale / solarize / blur, then a color jitter
    switch (rng.below(3)) {
      case 0: img::color(im, c, h, w, 0.0); break;
      case 1: img::solarize(im, 0.5); break;
      default: img::sharpness(im, c, h, w, 0.0); break;
    }
    color_jitter(im, c, h, w, rng);
  } else if (mode == Augmentation::Heavy) {
    rand_augment(im, c, h, w, aug.randaugment_layers, aug.randaugment_magnitude,
                 aug.randaugment_prob, rng);
  }
}

double mean_accuracy(const std::vector<std::int64_t>& pred,
                     const std::vector<std::int64_t>& y) {
  if (y.empty()) return 0.0;
  std::int64_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace

TrainRun adv_train(arch::Model<float>& model, const data::Dataset& ds,
                   const TrainConfig& cfg) {
  validate(cfg);
  const std::int64_t n = ds.size();
  if (n < 1) throw TensorError("adv_train: empty dataset");
  const auto& is = ds.images.shape();
  const std::int64_t C = is[1], H = is[2], W = is[3], d = C * H * W;
  const std::int64_t K = model.spec().num_classes;
  for (auto y : ds.labels)
    if (y < 0 || y >= K)
      throw TensorError("adv_train: label " + std::to_string(y) +
                        " outside the model's " + std::to_string(K) +
                        " classes");

  TrainRun run;
  run.log_csv =
      "epoch,lr,train_loss,attack_feasibility_rate,clean_val_acc,"
      "quick_robust_val_acc\n";
  if (cfg.epochs == 0) return run;

  // held-out split; with val_fraction = 0 the metrics fall back to a slice
  // of the training data so the log never divides by zero
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng split_rng(derive_seed(cfg.seed, "split"));
  split_rng.shuffle(perm);
  auto n_val = static_cast<std::int64_t>(
      std::lround(cfg.val_fraction * static_cast<double>(n)));
  if (cfg.val_fraction > 0.0 && n_val == 0) n_val = 1;
  n_val = std::min(n_val, n - 1);
  std::vector<std::int64_t> val_idx(perm.begin(), perm.begin() + n_val);
  std::vector<std::int64_t> train_idx(perm.begin() + n_val, perm.end());
  const auto train_n = static_cast<std::int64_t>(train_idx.size());
  const std::vector<std::int64_t>& metric_idx =
      n_val > 0 ? val_idx : train_idx;

  // metric tensors, built once (robust eval is capped for speed)
  const std::int64_t kCleanCap = 512, kRobustCap = 64;
  auto gather = [&](const std::vector<std::int64_t>& idx, std::int64_t cap,
                    std::vector<std::int64_t>& y_out) {
    auto m = std::min<std::int64_t>(cap, static_cast<std::int64_t>(idx.size()));
    std::vector<float> v(static_cast<std::size_t>(m * d));
    y_out.resize(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
      std::copy_n(ds.images.data().begin() + idx[i] * d, d, v.begin() + i * d);
      y_out[i] = ds.labels[idx[i]];
    }
    return Tensor<float>::leaf({m, C, H, W}, std::move(v));
  };
  std::vector<std::int64_t> clean_y, robust_y;
  auto clean_x = gather(metric_idx, kCleanCap, clean_y);
  auto robust_x = gather(metric_idx, kRobustCap, robust_y);

  const std::int64_t B = cfg.batch_size;
  const std::int64_t spe = (train_n + B - 1) / B;
  const std::int64_t total_steps = static_cast<std::int64_t>(cfg.epochs) * spe;
  const std::int64_t warmup_steps =
      std::min<std::int64_t>(static_cast<std::int64_t>(cfg.warmup_peak_epoch) * spe,
                             total_steps - 1);

  AdamW<float> opt(cfg.weight_decay, cfg.beta1, cfg.beta2);
  auto ema = ema_init(model, cfg.ema_decay);
  model.set_requires_grad(true);
  attack::ForwardFn<float> f = [&model](const Tensor<float>& x) {
    return model.forward(x);
  };
  AugmentationConfig aug;
  validate(aug);

  std::int64_t global_step = 0, feas_seen = 0, feas_ok = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::string where = "epoch " + std::to_string(e + 1);
    try {
      Rng erng(derive_seed(cfg.seed, "epoch" + std::to_string(e)));
      auto order = train_idx;
      erng.shuffle(order);
      double loss_sum = 0.0, last_lr = 0.0;
      for (std::int64_t b = 0; b < spe; ++b) {
        where = "epoch " + std::to_string(e + 1) + " batch " +
                std::to_string(b + 1);
        const std::int64_t lo = b * B;
        const std::int64_t bn = std::min<std::int64_t>(B, train_n - lo);
        std::vector<float> xb(static_cast<std::size_t>(bn * d));
        std::vector<std::int64_t> yb(static_cast<std::size_t>(bn));
        std::vector<float> im(static_cast<std::size_t>(d));
        for (std::int64_t i = 0; i < bn; ++i) {
          const std::int64_t src = order[lo + i];
          std::copy_n(ds.images.data().begin() + src * d, d, im.begin());
          augment_image(im, C, H, W, cfg.augmentation, aug, erng);
          std::copy(im.begin(), im.end(), xb.begin() + i * d);
          yb[i] = ds.labels[src];
        }
        std::vector<float> tv = label_smooth<float>(yb, cfg.label_smoothing, K).data();
        if (cfg.augmentation == Augmentation::Heavy) {
          if (erng.bernoulli(aug.mix_mode_prob))
            mixup(xb, bn, d, tv, K, aug.mix_alpha, erng);
          else
            cutmix(xb, bn, C, H, W, tv, K, aug.mix_alpha, erng);
          for (std::int64_t i = 0; i < bn; ++i) {
            std::copy_n(xb.begin() + i * d, d, im.begin());
            random_erase(im, C, H, W, aug.erase_prob, erng);
            std::copy(im.begin(), im.end(), xb.begin() + i * d);
          }
        }
        auto y_hard = attack::detail_attack::argmax_rows(tv, bn, K);
        auto targets = Tensor<float>::leaf({bn, K}, tv);
        auto x_t = Tensor<float>::leaf({bn, C, H, W}, xb);

        std::vector<float> x_adv = xb;
        if (cfg.attack_steps > 0) {
          model.set_requires_grad(false);
          attack::AttackConfig ac;
          ac.kind = attack::AttackKind::Apgd;
          ac.loss = attack::AttackLoss::Ce;
          ac.iters = cfg.attack_steps;
          ac.tm = cfg.tm;
          if (cfg.attack_warmup_epochs > 0)
            ac.tm.epsilon *= std::min(
                1.0, static_cast<double>(e + 1) /
                         static_cast<double>(cfg.attack_warmup_epochs));
          ac.init = threat::InitMode::Random;
          ac.seed = derive_seed(cfg.seed, "atk.e" + std::to_string(e) + ".b" +
                                              std::to_string(b));
          auto res = attack::apgd_attack(f, x_t, y_hard, ac, {}, &targets);
          model.set_requires_grad(true);
          if (global_step % 100 == 0) {
            feas_seen += bn;
            for (char c : res.feasible) feas_ok += c != 0;
          }
          const auto& dv = res.delta.data();
          for (std::size_t j = 0; j < x_adv.size(); ++j) x_adv[j] += dv[j];
        }

        auto logits = model.forward(Tensor<float>::leaf({bn, C, H, W}, x_adv));
        auto loss = cross_entropy(logits, targets);
        model.zero_grad();
        backward(loss);
        last_lr = cosine_warmup_lr(global_step + 1, total_steps, warmup_steps,
                                   cfg.peak_lr);
        opt.step(model, last_lr);
        ema_update(ema, model);
        ++global_step;
        loss_sum += loss.item() * static_cast<double>(bn);
      }

      where = "epoch " + std::to_string(e + 1) + " validation";
      model.set_requires_grad(false);
      std::vector<std::int64_t> pred;
      {
        auto logits = model.forward(clean_x);
        pred = attack::detail_attack::argmax_rows(logits.data(), logits.shape()[0], K);
      }
      double clean_acc = mean_accuracy(pred, clean_y);
      auto rep = attack::evaluate_robust_accuracy(
          f, robust_x, robust_y, cfg.tm, attack::Protocol::Quick,
          derive_seed(cfg.seed, "val.e" + std::to_string(e)));
      model.set_requires_grad(true);

      auto c = ckpt::snapshot(model, static_cast<std::uint64_t>(global_step),
                              cfg.seed);
      ckpt::attach_ema(c, ema.shadow);
      run.checkpoints.push_back(std::move(c));

      double feas_rate = feas_seen > 0 ? static_cast<double>(feas_ok) /
                                             static_cast<double>(feas_seen)
                                       : 1.0;
      run.log_csv += std::to_string(e + 1) + "," + fmt_short(last_lr) + "," +
                     fmt_short(loss_sum / static_cast<double>(train_n)) + "," +
                     fmt_short(feas_rate) + "," + fmt_short(clean_acc) + "," +
                     fmt_short(rep.robust_acc) + "\n";
    } catch (const TensorError& err) {
      model.set_requires_grad(true);
      run.halted = true;
      run.halt_reason = where + ": " + err.what();
      return run;
    }
  }
  return run;
}

TrainConfig finetune_defaults(TrainConfig cfg,
                              const threat::ThreatModel& new_tm) {
  cfg.tm = new_tm;
  cfg.epochs = 25;
  cfg.peak_lr = 1e-4;
  cfg.warmup_peak_epoch = 5;
  return cfg;
}

TrainRun finetune_radius(arch::Model<float>& model, const data::Dataset& ds,
                         const TrainConfig& cfg,
                         const threat::ThreatModel& new_tm) {
  return adv_train(model, ds, finetune_defaults(cfg, new_tm));
}

}  // namespace advlab::train
