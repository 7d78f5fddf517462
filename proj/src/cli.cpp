#include "advlab/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advlab/analyzer.hpp"
#include "advlab/arch.hpp"
#include "advlab/attack.hpp"
#include "advlab/checkpoint.hpp"
#include "advlab/data.hpp"
#include "advlab/rng.hpp"
#include "advlab/sweep.hpp"
#include "advlab/threat.hpp"
#include "advlab/train.hpp"

namespace advlab::cli {
namespace {

// operator mistakes exit 1; everything that breaks mid-run exits 2
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream is(s);
  while (std::getline(is, tok, ',')) out.push_back(tok);
  return out;
}

std::int64_t parse_i64(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad integer '" + s + "' for " + what);
  }
}

double parse_f64(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad number '" + s + "' for " + what);
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TensorError("cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw TensorError("cannot open '" + path + "' for writing");
  f << text;
}

threat::ThreatModel tm_arg(const std::string& s) {
  try {
    return threat::parse_threat(s);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

attack::Protocol protocol_arg(const std::string& s) {
  if (s == "quick") return attack::Protocol::Quick;
  if (s == "standard") return attack::Protocol::Standard;
  throw UsageError("unknown protocol '" + s + "' (want quick or standard)");
}

struct DataOpts {
  std::string dir, synth, split;
  std::int64_t limit = 0;
};

void add_data_options(CLI::App* sub, DataOpts& o, const char* default_split) {
  o.split = default_split;
  auto* d = sub->add_option("--data", o.dir, "directory of binary image batches");
  auto* s = sub->add_option(
      "--synth", o.synth, "synthetic blobs as n,classes,resolution,margin[,seed]");
  d->excludes(s);
  s->excludes(d);
  sub->add_option("--split", o.split, "data split: train or test");
  sub->add_option("--limit", o.limit, "keep only the first N examples");
}

data::Dataset load_data(const DataOpts& o, std::uint64_t seed) {
  if (o.dir.empty() && o.synth.empty())
    throw UsageError("either --data or --synth is required");
  data::Dataset ds;
  if (!o.synth.empty()) {
    auto parts = split_csv(o.synth);
    if (parts.size() < 4 || parts.size() > 5)
      throw UsageError("--synth wants n,classes,resolution,margin[,seed]");
    const std::uint64_t s =
        parts.size() == 5
            ? static_cast<std::uint64_t>(parse_i64(parts[4], "--synth seed"))
            : derive_seed(seed, "data");
    ds = data::synth_blobs(parse_i64(parts[0], "--synth n"),
                           parse_i64(parts[1], "--synth classes"),
                           parse_i64(parts[2], "--synth resolution"),
                           parse_f64(parts[3], "--synth margin"), s);
  } else {
    ds = data::load_cifar10(o.dir, o.split);
  }
  if (o.limit > 0 && o.limit < ds.size()) ds = data::slice(ds, 0, o.limit);
  return ds;
}

// retarget a restored/ fresh model at the dataset: swap the head when the
// class count differs and move the positional table to the data resolution
void adapt_to_dataset(arch::Model<float>& model, const data::Dataset& ds,
                      std::uint64_t seed) {
  std::int64_t k = 0;
  for (auto y : ds.labels) k = std::max(k, y + 1);
  if (k >= 2 && k != model.spec().num_classes)
    arch::replace_head(model, k, derive_seed(seed, "head"));
  const std::int64_t res = ds.resolution();
  auto& spec = model.mutable_spec();
  if (spec.input_resolution == res) return;
  if (spec.pos_embed) {
    const std::int64_t stride = spec.stem.total_stride();
    if (stride < 1 || res % stride != 0)
      throw TensorError("dataset resolution " + std::to_string(res) +
                        " is not divisible by the stem stride " +
                        std::to_string(stride));
    arch::interpolate_pos_embed(model, res / stride);
  }
  spec.input_resolution = res;
}

// flat overrides mirroring every training config key
struct TrainFlags {
  std::int64_t epochs = 0, warmup = 0, batch = 0, attack_steps = 0,
               attack_warmup = 0;
  double peak_lr = 0, weight_decay = 0, beta1 = 0, beta2 = 0, smoothing = 0,
         ema_decay = 0, val_fraction = 0;
  std::string tm_s, aug, warm_start;
  std::uint64_t seed = 0;
  CLI::Option *o_epochs = nullptr, *o_warmup = nullptr, *o_batch = nullptr,
              *o_attack_steps = nullptr, *o_attack_warmup = nullptr,
              *o_peak = nullptr, *o_wd = nullptr, *o_b1 = nullptr,
              *o_b2 = nullptr, *o_smooth = nullptr, *o_ema = nullptr,
              *o_valf = nullptr, *o_tm = nullptr, *o_aug = nullptr,
              *o_warm = nullptr, *o_seed = nullptr;

  void wire(CLI::App* sub, bool with_tm) {
    o_epochs = sub->add_option("--epochs", epochs, "training epochs");
    o_warmup = sub->add_option("--warmup-peak-epoch", warmup,
                               "epoch at which the lr peaks");
    o_peak = sub->add_option("--peak-lr", peak_lr, "peak learning rate");
    o_wd = sub->add_option("--weight-decay", weight_decay, "decoupled decay");
    o_b1 = sub->add_option("--beta1", beta1, "first-moment decay");
    o_b2 = sub->add_option("--beta2", beta2, "second-moment decay");
    o_batch = sub->add_option("--batch-size", batch, "examples per step");
    o_smooth = sub->add_option("--label-smoothing", smoothing,
                               "smoothing mass spread over classes");
    o_ema = sub->add_option("--ema-decay", ema_decay, "weight-average decay");
    o_attack_steps = sub->add_option("--attack-steps", attack_steps,
                                     "inner ascent steps (0 = standard training)");
    o_attack_warmup =
        sub->add_option("--attack-warmup-epochs", attack_warmup,
                        "epochs over which the training radius ramps up");
    if (with_tm)
      o_tm = sub->add_option("--tm", tm_s, "threat as norm:radius, e.g. linf:4/255");
    o_aug = sub->add_option("--augmentation", aug, "basic, 3aug or heavy");
    o_warm = sub->add_option("--warm-start", warm_start,
                             "checkpoint to initialize weights from");
    o_valf = sub->add_option("--val-fraction", val_fraction,
                             "held-out fraction for the per-epoch metrics");
    o_seed = sub->add_option("--seed", seed, "run seed");
  }

  void apply(train::TrainConfig& cfg) const {
    if (o_epochs->count()) cfg.epochs = epochs;
    if (o_warmup->count()) cfg.warmup_peak_epoch = warmup;
    if (o_peak->count()) cfg.peak_lr = peak_lr;
    if (o_wd->count()) cfg.weight_decay = weight_decay;
    if (o_b1->count()) cfg.beta1 = beta1;
    if (o_b2->count()) cfg.beta2 = beta2;
    if (o_batch->count()) cfg.batch_size = batch;
    if (o_smooth->count()) cfg.label_smoothing = smoothing;
    if (o_ema->count()) cfg.ema_decay = ema_decay;
    if (o_attack_steps->count()) cfg.attack_steps = attack_steps;
    if (o_attack_warmup->count()) cfg.attack_warmup_epochs = attack_warmup;
    if (o_tm && o_tm->count()) cfg.tm = tm_arg(tm_s);
    if (o_aug->count()) {
      try {
        cfg.augmentation = train::parse_augmentation(aug);
      } catch (const TensorError& e) {
        throw UsageError(e.what());
      }
    }
    if (o_warm->count()) cfg.warm_start = warm_start;
    if (o_valf->count()) cfg.val_fraction = val_fraction;
    if (o_seed->count()) cfg.seed = seed;
  }
};

train::TrainConfig build_config(const std::string& preset,
                                const std::string& config_path,
                                const TrainFlags& fl,
                                train::TrainConfig cfg = {}) {
  if (!preset.empty()) {
    try {
      cfg = train::transfer_preset(preset);
    } catch (const TensorError& e) {
      throw UsageError(e.what());
    }
  }
  if (!config_path.empty()) {
    std::string text;
    try {
      text = read_text_file(config_path);
    } catch (const TensorError& e) {
      throw UsageError(e.what());
    }
    try {
      cfg = train::config_from_text(text);
    } catch (const TensorError& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
  }
  fl.apply(cfg);
  try {
    train::validate(cfg);
  } catch (const TensorError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

int finish_training_run(const train::TrainRun& run,
                        const train::TrainConfig& cfg,
                        const std::string& prefix) {
  write_text_file(prefix + ".config", train::config_to_text(cfg));
  write_text_file(prefix + ".log.csv", run.log_csv);
  char suffix[32];
  for (std::size_t i = 0; i < run.checkpoints.size(); ++i) {
    std::snprintf(suffix, sizeof suffix, ".epoch%03lu.ckpt",
                  static_cast<unsigned long>(i + 1));
    ckpt::save_checkpoint(run.checkpoints[i], prefix + suffix);
  }
  std::cout << run.log_csv;
  if (run.halted) {
    std::cerr << "training halted: " << run.halt_reason << "\n";
    return 2;
  }
  return 0;
}

int do_analyze(const std::string& presets, std::int64_t resolution,
               const std::string& format, const std::string& out) {
  if (resolution < 1) throw UsageError("--resolution must be >= 1");
  std::vector<std::string> names;
  for (const auto& tok : split_csv(presets)) {
    if (tok == "fullsize") {
      auto full = analyzer::fullsize_presets();
      names.insert(names.end(), full.begin(), full.end());
    } else {
      try {
        arch::preset_spec(tok);
      } catch (const TensorError& e) {
        throw UsageError(e.what());
      }
      names.push_back(tok);
    }
  }
  if (names.empty()) throw UsageError("--presets names no models");
  auto reports = analyzer::cost_table(names, resolution);
  const std::string text = format == "text" ? analyzer::render_text(reports)
                                            : analyzer::render_csv(reports);
  std::cout << text;
  if (!out.empty()) write_text_file(out, text);
  return 0;
}

int do_train(const std::string& model_name, const std::string& preset,
             const std::string& config_path, const std::string& prefix,
             const DataOpts& dopt, const TrainFlags& fl) {
  auto cfg = build_config(preset, config_path, fl);
  auto ds = load_data(dopt, cfg.seed);
  if (!cfg.warm_start.empty()) {
    auto c = ckpt::load_checkpoint(cfg.warm_start);
    auto model = arch::build<float>(c.spec, 0);
    ckpt::restore(c, model);
    adapt_to_dataset(model, ds, cfg.seed);
    auto run = train::adv_train(model, ds, cfg);
    return finish_training_run(run, cfg, prefix);
  }
  if (model_name.empty())
    throw UsageError("--model is required unless warm-starting");
  arch::ModelSpec spec;
  try {
    spec = arch::preset_spec(model_name);
  } catch (const TensorError& e) {
    throw UsageError(e.what());
  }
  auto model = arch::build<float>(spec, cfg.seed);
  adapt_to_dataset(model, ds, cfg.seed);
  auto run = train::adv_train(model, ds, cfg);
  return finish_training_run(run, cfg, prefix);
}

int do_finetune(const std::string& ckpt_path, const std::string& tm_s,
                const std::string& config_path, const std::string& prefix,
                const DataOpts& dopt, const TrainFlags& fl) {
  const auto new_tm = tm_arg(tm_s);
  // radius-recipe defaults form the base; an explicit config or flag wins
  auto cfg = build_config("", config_path, fl,
                          train::finetune_defaults(train::TrainConfig{}, new_tm));
  cfg.tm = new_tm;
  auto ds = load_data(dopt, cfg.seed);
  auto c = ckpt::load_checkpoint(ckpt_path);
  auto model = arch::build<float>(c.spec, 0);
  ckpt::restore(c, model);
  adapt_to_dataset(model, ds, cfg.seed);
  auto run = train::adv_train(model, ds, cfg);
  return finish_training_run(run, cfg, prefix);
}

int do_attack(const std::string& ckpt_path, const std::string& tm_s,
              const std::string& proto_s, int iters, int targets,
              std::int64_t resolution, double scale_ratio, bool ema,
              const DataOpts& dopt, std::uint64_t seed,
              const std::string& out) {
  const auto tm = tm_arg(tm_s);
  const auto protocol = protocol_arg(proto_s);
  if (iters < 1) throw UsageError("--iters must be >= 1");
  if (targets < 0) throw UsageError("--apgd-targets must be >= 0");
  if (!(scale_ratio > 0.0) || scale_ratio > 1.0)
    throw UsageError("--scale-ratio must lie in (0, 1]");
  auto c = ckpt::load_checkpoint(ckpt_path);
  auto ds = load_data(dopt, seed);
  const std::int64_t r = resolution > 0 ? resolution : ds.resolution();
  auto rep = sweep::resolution_sweep(c, ds, {r}, tm, protocol, seed, false, ema,
                                     scale_ratio, iters, targets);
  const auto& row = rep.rows.at(0);
  if (row.skipped) throw UsageError(row.note);
  const std::string csv =
      attack::eval_csv_header() + "\n" + attack::eval_csv_row(row.detail) + "\n";
  std::cout << csv;
  if (!out.empty()) write_text_file(out, csv);
  return 0;
}

int do_sweep(const std::string& ckpt_path, const std::string& resolutions,
             const std::string& tm_s, const std::string& proto_s, int iters,
             int targets, bool scale_l2, bool ema, double scale_ratio,
             const DataOpts& dopt, std::uint64_t seed,
             const std::string& out) {
  const auto tm = tm_arg(tm_s);
  const auto protocol = protocol_arg(proto_s);
  if (iters < 1) throw UsageError("--iters must be >= 1");
  if (targets < 0) throw UsageError("--apgd-targets must be >= 0");
  if (!(scale_ratio > 0.0) || scale_ratio > 1.0)
    throw UsageError("--scale-ratio must lie in (0, 1]");
  std::vector<std::int64_t> rs;
  for (const auto& tok : split_csv(resolutions))
    rs.push_back(parse_i64(tok, "--resolutions"));
  if (rs.empty()) throw UsageError("--resolutions names no sizes");
  auto c = ckpt::load_checkpoint(ckpt_path);
  auto ds = load_data(dopt, seed);
  auto rep = sweep::resolution_sweep(c, ds, rs, tm, protocol, seed, scale_l2,
                                     ema, scale_ratio, iters, targets);
  const std::string csv = sweep::sweep_csv(rep);
  std::cout << csv << "best clean resolution: " << rep.best_clean_resolution
            << "\nbest robust resolution: " << rep.best_robust_resolution
            << "\n";
  if (!out.empty()) write_text_file(out, csv);
  return 0;
}

int do_select(const std::vector<std::string>& paths, const std::string& tm_s,
              bool ema, const DataOpts& dopt, std::uint64_t seed) {
  const auto tm = tm_arg(tm_s);
  auto ds = load_data(dopt, seed);
  std::string best_path;
  double best_robust = -1.0;
  std::ostringstream os;
  os.precision(10);
  os << "checkpoint,clean_acc,robust_acc\n";
  for (const auto& p : paths) {
    auto c = ckpt::load_checkpoint(p);
    auto rep =
        sweep::resolution_sweep(c, ds, {ds.resolution()}, tm,
                                attack::Protocol::Quick, seed, false, ema,
                                1.0, /*quick_iters=*/1, /*dlr_targets=*/3);
    const auto& row = rep.rows.at(0);
    if (row.skipped) throw TensorError(p + ": " + row.note);
    os << p << "," << row.clean_acc << "," << row.robust_acc << "\n";
    if (row.robust_acc > best_robust) {
      best_robust = row.robust_acc;
      best_path = p;
    }
  }
  std::cout << os.str() << "best checkpoint: " << best_path << "\n";
  return 0;
}

int do_adapt(const std::string& in_path, const std::string& out_path,
             std::int64_t num_classes, bool have_classes, bool low_res,
             std::int64_t resolution, std::uint64_t seed) {
  if (!have_classes && !low_res && resolution <= 0)
    throw UsageError("adapt: pass --num-classes, --low-res or --resolution");
  if (have_classes && num_classes < 2)
    throw UsageError("--num-classes must be >= 2");
  auto c = ckpt::load_checkpoint(in_path);
  auto model = arch::build<float>(c.spec, 0);
  ckpt::restore(c, model);
  if (have_classes)
    arch::replace_head(model, num_classes, derive_seed(seed, "head"));
  if (low_res) arch::adapt_low_res(model);
  if (resolution > 0) {
    auto& spec = model.mutable_spec();
    if (spec.input_resolution != resolution) {
      if (spec.pos_embed) {
        const std::int64_t stride = spec.stem.total_stride();
        if (stride < 1 || resolution % stride != 0)
          throw UsageError("--resolution " + std::to_string(resolution) +
                           " is not divisible by the stem stride " +
                           std::to_string(stride));
        arch::interpolate_pos_embed(model, resolution / stride);
      }
      spec.input_resolution = resolution;
    }
  }
  ckpt::save_checkpoint(ckpt::snapshot(model, c.step, c.seed), out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"adversarially robust training and evaluation workbench"};
  app.name("advlab");
  app.require_subcommand(1);

  // analyze
  auto* analyze = app.add_subcommand(
      "analyze", "parameter and multiply-accumulate costs for model presets");
  std::string an_presets = "fullsize", an_format = "csv", an_out;
  std::int64_t an_resolution = 224;
  analyze->add_option("--presets", an_presets,
                      "comma-separated preset names; 'fullsize' expands to "
                      "the published table");
  analyze->add_option("--resolution", an_resolution, "input side length");
  analyze->add_option("--format", an_format, "csv or text")
      ->check(CLI::IsMember({"csv", "text"}));
  analyze->add_option("--out", an_out, "also write the table to this file");

  // train
  auto* train_cmd =
      app.add_subcommand("train", "adversarial training from a config");
  std::string tr_model, tr_preset, tr_config, tr_out = "run";
  DataOpts tr_data;
  TrainFlags tr_flags;
  tr_model = "";
  auto* tr_model_opt =
      train_cmd->add_option("--model", tr_model, "architecture preset name");
  (void)tr_model_opt;
  auto* tr_preset_opt = train_cmd->add_option(
      "--preset", tr_preset, "named transfer recipe to start from");
  auto* tr_config_opt =
      train_cmd->add_option("--config", tr_config, "key=value config file");
  tr_preset_opt->excludes(tr_config_opt);
  tr_config_opt->excludes(tr_preset_opt);
  train_cmd->add_option("--out", tr_out,
                        "prefix for the log, config and checkpoint files");
  add_data_options(train_cmd, tr_data, "train");
  tr_flags.wire(train_cmd, /*with_tm=*/true);

  // finetune-radius
  auto* ft = app.add_subcommand(
      "finetune-radius", "short fine-tune of a checkpoint at a new radius");
  std::string ft_ckpt, ft_tm, ft_config, ft_out = "finetune";
  DataOpts ft_data;
  TrainFlags ft_flags;
  ft->add_option("--ckpt", ft_ckpt, "checkpoint to fine-tune")->required();
  ft->add_option("--tm", ft_tm, "new threat as norm:radius")->required();
  ft->add_option("--config", ft_config, "key=value config file");
  ft->add_option("--out", ft_out,
                 "prefix for the log, config and checkpoint files");
  add_data_options(ft, ft_data, "train");
  ft_flags.wire(ft, /*with_tm=*/false);

  // attack
  auto* atk = app.add_subcommand("attack",
                                 "one robust-accuracy evaluation of a checkpoint");
  std::string atk_ckpt, atk_tm, atk_proto = "quick", atk_out;
  int atk_iters = 10, atk_targets = 3;
  std::int64_t atk_resolution = 0;
  double atk_sr = 1.0;
  bool atk_ema = false;
  std::uint64_t atk_seed = 0;
  DataOpts atk_data;
  atk->add_option("--ckpt", atk_ckpt, "checkpoint to attack")->required();
  atk->add_option("--tm", atk_tm, "threat as norm:radius")->required();
  atk->add_option("--protocol", atk_proto, "quick or standard")
      ->check(CLI::IsMember({"quick", "standard"}));
  atk->add_option("--iters", atk_iters, "iterations for the quick protocol");
  atk->add_option("--apgd-targets", atk_targets,
                  "targeted restarts in the standard protocol");
  atk->add_option("--resolution", atk_resolution,
                  "evaluate at this input side (default: native)");
  atk->add_option("--scale-ratio", atk_sr,
                  "shorter-side fraction of the resize pipeline");
  atk->add_flag("--ema", atk_ema, "evaluate the averaged weights");
  atk->add_option("--out", atk_out, "also write the report to this file");
  add_data_options(atk, atk_data, "test");
  atk->add_option("--seed", atk_seed, "run seed");

  // sweep-resolution
  auto* sw = app.add_subcommand(
      "sweep-resolution", "re-evaluate one checkpoint across input sizes");
  std::string sw_ckpt, sw_resolutions, sw_tm, sw_proto = "quick", sw_out;
  int sw_iters = 10, sw_targets = 3;
  bool sw_scale_l2 = false, sw_ema = false;
  double sw_sr = 0.875;
  std::uint64_t sw_seed = 0;
  DataOpts sw_data;
  sw->add_option("--ckpt", sw_ckpt, "checkpoint to evaluate")->required();
  sw->add_option("--resolutions", sw_resolutions,
                 "comma-separated input sides")
      ->required();
  sw->add_option("--tm", sw_tm, "threat as norm:radius")->required();
  sw->add_option("--protocol", sw_proto, "quick or standard")
      ->check(CLI::IsMember({"quick", "standard"}));
  sw->add_option("--iters", sw_iters, "iterations for the quick protocol");
  sw->add_option("--apgd-targets", sw_targets,
                 "targeted restarts in the standard protocol");
  sw->add_flag("--scale-l2", sw_scale_l2,
               "grow an l2 radius linearly with resolution");
  sw->add_flag("--ema", sw_ema, "evaluate the averaged weights");
  sw->add_option("--scale-ratio", sw_sr,
                 "shorter-side fraction of the resize pipeline");
  sw->add_option("--out", sw_out, "also write the CSV to this file");
  add_data_options(sw, sw_data, "test");
  sw->add_option("--seed", sw_seed, "run seed");

  // select-checkpoint
  auto* sel = app.add_subcommand(
      "select-checkpoint", "rank saved checkpoints by 1-step robust accuracy");
  std::vector<std::string> sel_paths;
  std::string sel_tm;
  bool sel_ema = false;
  std::uint64_t sel_seed = 0;
  DataOpts sel_data;
  sel->add_option("ckpts", sel_paths, "checkpoint files to rank")->required();
  sel->add_option("--tm", sel_tm, "threat as norm:radius")->required();
  sel->add_flag("--ema", sel_ema, "rank the averaged weights");
  add_data_options(sel, sel_data, "test");
  sel->add_option("--seed", sel_seed, "run seed");

  // adapt
  auto* ad = app.add_subcommand(
      "adapt", "rewrite a checkpoint for a new head, stride or resolution");
  std::string ad_in, ad_out;
  std::int64_t ad_classes = 0, ad_resolution = 0;
  bool ad_low_res = false;
  std::uint64_t ad_seed = 0;
  ad->add_option("--ckpt", ad_in, "checkpoint to adapt")->required();
  ad->add_option("--out", ad_out, "where to write the adapted checkpoint")
      ->required();
  auto* ad_classes_opt =
      ad->add_option("--num-classes", ad_classes, "swap in a fresh head");
  ad->add_flag("--low-res", ad_low_res,
               "run stride-2 stem convolutions and the first downsample at 1");
  ad->add_option("--resolution", ad_resolution,
                 "record (and interpolate to) a new input side");
  ad->add_option("--seed", ad_seed, "seed for the fresh head");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (analyze->parsed())
      return do_analyze(an_presets, an_resolution, an_format, an_out);
    if (train_cmd->parsed())
      return do_train(tr_model, tr_preset, tr_config, tr_out, tr_data, tr_flags);
    if (ft->parsed())
      return do_finetune(ft_ckpt, ft_tm, ft_config, ft_out, ft_data, ft_flags);
    if (atk->parsed())
      return do_attack(atk_ckpt, atk_tm, atk_proto, atk_iters, atk_targets,
                       atk_resolution, atk_sr, atk_ema, atk_data, atk_seed,
                       atk_out);
    if (sw->parsed())
      return do_sweep(sw_ckpt, sw_resolutions, sw_tm, sw_proto, sw_iters,
                      sw_targets, sw_scale_l2, sw_ema, sw_sr, sw_data, sw_seed,
                      sw_out);
    if (sel->parsed()) return do_select(sel_paths, sel_tm, sel_ema, sel_data, sel_seed);
    if (ad->parsed())
      return do_adapt(ad_in, ad_out, ad_classes, ad_classes_opt->count() > 0,
                      ad_low_res, ad_resolution, ad_seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace advlab::cli
