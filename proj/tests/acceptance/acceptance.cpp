// Acceptance suite: one PASS/FAIL line per criterion.
//
// Default scale is the smoke variant sized for a single CPU core; --full runs the toy-scale
// protocol (5 seeds per normalization mode, 20k steps each), which takes many hours on a CPU.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stegamark/config.hpp"
#include "stegamark/decoder.hpp"
#include "stegamark/log.hpp"
#include "stegamark/losses.hpp"
#include "stegamark/nn_core.hpp"
#include "stegamark/perturbation.hpp"
#include "stegamark/robustness_eval.hpp"
#include "stegamark/trainer.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace stegamark;

namespace {

struct Scale {
  std::string name;
  int seeds = 5;
  std::int64_t diagnostic_steps = 2000;
  std::int64_t window_begin = 1000;
  std::int64_t window_end = 2000;
  std::int64_t long_steps = 5000;
  std::int64_t ramp_steps = 0;  // 0 keeps the toy preset
  std::int64_t train_images = 200;
  std::int64_t heldout_images = 64;
};

Scale smoke_scale() { return {"smoke"}; }

Scale full_scale() {
  Scale s;
  s.name = "full";
  s.diagnostic_steps = 20000;
  s.window_end = 5000;
  s.long_steps = 20000;
  return s;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------------------------
// Training runs shared by criteria 3, 4 and 7.

class Runs {
 public:
  Runs(Scale scale, fs::path work_dir, bool reuse)
      : scale_(std::move(scale)), work_(std::move(work_dir)), reuse_(reuse) {
    fs::create_directories(work_);
  }

  const Scale& scale() const { return scale_; }

  const Dataset& train_set() {
    if (!train_) train_ = testing::synthetic_dataset(scale_.train_images, {64, 64}, 2024);
    return *train_;
  }

  const Dataset& heldout_set() {
    if (!heldout_) heldout_ = testing::synthetic_dataset(scale_.heldout_images, {64, 64}, 4048);
    return *heldout_;
  }

  TrainConfig base_config(std::uint64_t seed, NormMode norm) const {
    auto cfg = toy_config().train;
    cfg.seed = seed;
    cfg.model.norm = norm;
    cfg.log_every = 10;
    cfg.checkpoint_every = 1000000;
    if (scale_.ramp_steps > 0) cfg.perturb.ramp_steps = scale_.ramp_steps;
    return cfg;
  }

  /// Metrics of `cfg` trained to cfg.total_steps, continuing from `resume_from` when given.
  std::vector<MetricsRow> run(const std::string& name, TrainConfig cfg,
                              const std::optional<std::string>& resume_from = std::nullopt) {
    const auto dir = work_ / name;
    cfg.out_dir = dir.string();
    const auto ck = dir / "checkpoint.sgmk";
    const auto resolved = dir / "resolved.cfg";
    const auto text = serialize_config({cfg, {}});
    if (reuse_ && fs::exists(ck) && fs::exists(resolved)) {
      if (slurp(resolved) == text) {
        log::info("reusing " + dir.string());
        return read_metrics_csv(dir / "metrics.csv");
      }
      // A shorter run of the same configuration is continued in place.
      auto previous = parse_config(slurp(resolved)).train;
      const auto previous_steps = previous.total_steps;
      previous.total_steps = cfg.total_steps;
      if (previous == cfg && previous_steps < cfg.total_steps) {
        auto state = load_checkpoint(ck);
        state.config = cfg;
        log::info("continuing " + name + " to step " + std::to_string(cfg.total_steps));
        train(state, train_set());
        std::ofstream(resolved) << text;
        return read_metrics_csv(dir / "metrics.csv");
      }
    }
    fs::remove_all(dir);
    fs::create_directories(dir);

    TrainState state = TrainState::create(cfg);
    if (resume_from) {
      const auto src = work_ / *resume_from;
      fs::copy_file(src / "metrics.csv", dir / "metrics.csv");
      state = load_checkpoint(src / "checkpoint.sgmk");
      state.config = cfg;
    }
    log::info("training " + name + " to step " + std::to_string(cfg.total_steps));
    train(state, train_set());
    std::ofstream(resolved) << text;
    return read_metrics_csv(dir / "metrics.csv");
  }

  WatermarkModel model(const std::string& name) {
    auto state = load_checkpoint(work_ / name / "checkpoint.sgmk");
    state.model->eval();
    return state.model;
  }

  std::string diagnostic_name(NormMode norm, int seed) const {
    return "diag_" + std::string(to_string(norm)) + "_seed" + std::to_string(seed);
  }

  std::vector<MetricsRow> diagnostic(NormMode norm, int seed) {
    auto cfg = base_config(static_cast<std::uint64_t>(seed), norm);
    cfg.total_steps = scale_.diagnostic_steps;
    return run(diagnostic_name(norm, seed), cfg);
  }

  /// Instance norm, seed 0, crop on: the diagnostic run continued to long_steps.
  std::string long_run() {
    const auto base = diagnostic_name(NormMode::instance, 0);
    diagnostic(NormMode::instance, 0);
    if (scale_.long_steps <= scale_.diagnostic_steps) return base;
    auto cfg = base_config(0, NormMode::instance);
    cfg.total_steps = scale_.long_steps;
    run("long_crop", cfg, base);
    return "long_crop";
  }

  std::string long_run_without_crop() {
    auto cfg = base_config(0, NormMode::instance);
    cfg.total_steps = scale_.long_steps;
    cfg.perturb.crop_enabled = false;
    run("long_nocrop", cfg);
    return "long_nocrop";
  }

  std::vector<MetricsRow> metrics(const std::string& name) { return read_metrics_csv(work_ / name / "metrics.csv"); }

 private:
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  Scale scale_;
  fs::path work_;
  bool reuse_;
  std::optional<Dataset> train_, heldout_;
};

/// Mean of `value` over rows with step in [begin, end).
double window_mean(const std::vector<MetricsRow>& rows, std::int64_t begin, std::int64_t end,
                   const std::function<double(const MetricsRow&)>& value) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.step >= begin && r.step < end) {
      sum += value(r);
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

/// Best 1000-step trailing mean of batch bit accuracy and the first step where it reaches `threshold`.
std::pair<double, std::int64_t> trailing_accuracy(const std::vector<MetricsRow>& rows, double threshold) {
  double best = 0.0;
  std::int64_t reached = -1;
  std::size_t lo = 0;
  double sum = 0.0;
  for (std::size_t hi = 0; hi < rows.size(); ++hi) {
    sum += rows[hi].bit_acc;
    while (rows[hi].step - rows[lo].step >= 1000) sum -= rows[lo++].bit_acc;
    if (rows[hi].step + 1 < 1000) continue;
    const double mean = sum / static_cast<double>(hi - lo + 1);
    best = std::max(best, mean);
    if (reached < 0 && mean >= threshold) reached = rows[hi].step;
  }
  return {best, reached};
}

// ---------------------------------------------------------------------------------------------
// Criteria.

Verdict geometry() {
  const std::int64_t side = 400;
  const auto ones = torch::ones({1, 3, side, side});
  const auto covered = (add_frame(ones, 70)[0][0] == 0).sum().item<std::int64_t>();

  // A source pixel survives the crop iff the output depends on it.
  auto probe = torch::full({1, 3, side, side}, 0.5, torch::kFloat64).requires_grad_(true);
  center_crop_resize(probe, 30).sum().backward();
  const auto removed = (probe.grad()[0][0] == 0).sum().item<std::int64_t>();

  const double total = static_cast<double>(side * side);
  const double crop_fraction = static_cast<double>(removed) / total;
  const double frame_fraction = static_cast<double>(covered) / total;
  const bool pass = removed == side * side - 340 * 340 && covered == side * side - 260 * 260 &&
                    crop_fraction == 0.2775 && frame_fraction == 0.5775;
  return {pass, "crop(30) removes " + std::to_string(removed) + " px = " + fmt(100 * crop_fraction) +
                    "%, frame(70) covers " + std::to_string(covered) + " px = " + fmt(100 * frame_fraction) + "%"};
}

Verdict loss_formula() {
  auto weights = [](double r, double p, double m) {
    AdaptiveWeights w(0, 0, 0);
    w->to(torch::kFloat64);
    torch::NoGradGuard no_grad;
    w->log_sigma_r.fill_(r);
    w->log_sigma_p.fill_(p);
    w->log_sigma_m.fill_(m);
    return w;
  };
  auto scalar = [](double v) { return torch::tensor(v, torch::kFloat64); };

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> log_uniform(std::log(1e-3), std::log(10.0));
  bool exact = true;
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const double L[3] = {std::exp(log_uniform(rng)), std::exp(log_uniform(rng)), std::exp(log_uniform(rng))};
    const LossTriple t{scalar(L[0]), scalar(L[1]), scalar(L[2])};
    exact = exact && combine_adaptive(t, *weights(0, 0, 0)).item<double>() == L[0] + L[1] + L[2];

    auto w = weights(0, 0, 0);
    torch::optim::Adam opt(w->parameters(), torch::optim::AdamOptions(0.05));
    for (int i = 0; i < 6000; ++i) {
      opt.zero_grad();
      combine_adaptive(t, *w).backward();
      opt.step();
    }
    const torch::Tensor* s[3] = {&w->log_sigma_r, &w->log_sigma_p, &w->log_sigma_m};
    for (int i = 0; i < 3; ++i) {
      worst = std::max(worst, std::abs(std::exp(2.0 * s[i]->item<double>()) - L[i]) / L[i]);
    }
  }
  return {exact && worst < 1e-4, std::string("sigma=1 sum ") + (exact ? "exact" : "MISMATCH") +
                                     ", worst relative error of sigma^2 vs L after minimization " + fmt(worst, 3)};
}

Verdict gradient_diagnostic(Runs& runs) {
  const auto& s = runs.scale();
  int converged = 0;
  int none_ok = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  double none_best = 0.0;
  std::ostringstream per_seed;
  for (int seed = 0; seed < s.seeds; ++seed) {
    const auto inst = runs.diagnostic(NormMode::instance, seed);
    const auto none = runs.diagnostic(NormMode::none, seed);
    const auto [inst_best, inst_reached] = trailing_accuracy(inst, 0.95);
    const auto [none_acc, none_reached] = trailing_accuracy(none, 0.95);
    const auto grad = [](const MetricsRow& r) { return r.grad_dec_conv1; };
    const double g_inst = window_mean(inst, s.window_begin, s.window_end, grad);
    const double g_none = window_mean(none, s.window_begin, s.window_end, grad);
    const double ratio = g_none > 0.0 ? g_inst / g_none : std::numeric_limits<double>::infinity();
    converged += inst_reached >= 0;
    none_ok += (ratio >= 10.0 || none_reached < 0);
    worst_ratio = std::min(worst_ratio, ratio);
    none_best = std::max(none_best, none_acc);
    per_seed << " [seed " << seed << ": IN acc " << fmt(inst_best, 3) << " at " << inst_reached << ", grad IN/none "
             << fmt(ratio, 3) << "]";
  }
  const bool pass = converged >= (s.seeds * 4 + 4) / 5 && none_ok == s.seeds;
  return {pass, "instance reached 0.95 on " + std::to_string(converged) + "/" + std::to_string(s.seeds) +
                    " seeds; no-norm best trailing acc " + fmt(none_best, 3) + ", min grad ratio " +
                    fmt(worst_ratio, 3) + " (window " + std::to_string(s.window_begin) + "-" +
                    std::to_string(s.window_end) + ")" + per_seed.str()};
}

Verdict crop_resistance(Runs& runs) {
  const auto crop_name = runs.long_run();
  const auto plain_name = runs.long_run_without_crop();
  auto crop_model = runs.model(crop_name);
  auto plain_model = runs.model(plain_name);
  const std::int64_t width = 64 / 8;  // 12.5% of the side
  EvalOptions opts;
  opts.seed = 77;
  opts.batch_size = 32;
  const auto a = crop_frame_experiment(crop_model, runs.heldout_set(), {0, width}, opts);
  const auto b = crop_frame_experiment(plain_model, runs.heldout_set(), {0, width}, opts);
  // Rows: crop@0, crop@width, frame@0, frame@width.
  const double crop_gain = a.rows[1].mean - b.rows[1].mean;
  const double frame_gap = std::abs(a.rows[3].mean - b.rows[3].mean);
  const bool pass = crop_gain >= 0.10 && frame_gap <= 0.10;
  return {pass, "clean " + fmt(a.rows[0].mean, 3) + "/" + fmt(b.rows[0].mean, 3) + ", crop@" + std::to_string(width) +
                    "px " + fmt(a.rows[1].mean, 3) + " vs " + fmt(b.rows[1].mean, 3) + " (gain " + fmt(crop_gain, 3) +
                    "), frame@" + std::to_string(width) + "px " + fmt(a.rows[3].mean, 3) + " vs " +
                    fmt(b.rows[3].mean, 3) + " (gap " + fmt(frame_gap, 3) + ")"};
}

Verdict differentiability() {
  torch::manual_seed(17);
  std::vector<std::pair<std::string, double>> errors;
  auto record = [&](const std::string& name, double err) { errors.emplace_back(name, err); };

  const auto img = torch::rand({1, 3, 12, 12}, torch::kFloat64) * 0.6 + 0.2;
  const auto w = torch::randn({1, 3, 12, 12}, torch::kFloat64);
  auto op_check = [&](const std::string& name, const std::function<torch::Tensor(const torch::Tensor&)>& op) {
    record(name, fd_grad_check([&](const torch::Tensor& t) { return (op(t) * w).sum(); }, img, 1e-6));
  };
  op_check("brightness", [](const torch::Tensor& t) { return brightness(t, 1.2); });
  op_check("contrast", [](const torch::Tensor& t) { return contrast(t, 0.7); });
  op_check("saturation", [](const torch::Tensor& t) { return saturation(t, 1.4); });
  op_check("rgb_offset", [](const torch::Tensor& t) { return rgb_offset(t, {0.05, -0.05, 0.02}); });
  op_check("gaussian_noise", [](const torch::Tensor& t) { return gaussian_noise(t, 0.01, std::uint64_t{4}); });
  op_check("defocus_blur", [](const torch::Tensor& t) { return defocus_blur(t, 1.0); });
  op_check("motion_blur", [](const torch::Tensor& t) { return motion_blur(t, 3.5, 0.6); });
  const auto h = corner_homography({12, 12}, {0.5, -0.4, 0.3, 0.2, -0.6, 0.1, 0.2, -0.3});
  op_check("perspective_warp", [&](const torch::Tensor& t) { return warp_homography(t, h); });
  op_check("crop_resize", [](const torch::Tensor& t) { return crop_resize(t, {1, 2, 9, 8}, {12, 12}); });
  PerturbConfig pc;
  pc.max_corner_shift = 1.0;
  Rng draw_rng(3);
  const auto draw = draw_perturbation({12, 12}, 1.0, pc, draw_rng);
  op_check("perturbation_pipeline", [&](const torch::Tensor& t) { return apply_perturbation(t, draw); });

  const auto x = torch::randn({3, 2, 4, 4}, torch::kFloat64);
  const auto wx = torch::randn({3, 2, 4, 4}, torch::kFloat64);
  record("instance_norm", fd_grad_check([&](const torch::Tensor& t) { return (instance_norm(t) * wx).sum(); }, x, 1e-6));
  record("batch_norm", fd_grad_check(
                           [&](const torch::Tensor& t) {
                             auto mean = torch::zeros({2}, torch::kFloat64), var = torch::ones({2}, torch::kFloat64);
                             return (batch_norm(t, mean, var, true) * wx).sum();
                           },
                           x, 1e-6));

  const auto losses = torch::tensor({0.4, 0.9, 1.3}, torch::kFloat64);
  record("combine_fixed", fd_grad_check(
                              [](const torch::Tensor& l) { return combine_fixed({l[0], l[1], l[2]}, {0.7, 1.1, 1.0}); },
                              losses, 1e-6));
  record("combine_adaptive", fd_grad_check(
                                 [](const torch::Tensor& s) {
                                   AdaptiveWeightsImpl a(0, 0, 0);
                                   a.log_sigma_r = s[0];
                                   a.log_sigma_p = s[1];
                                   a.log_sigma_m = s[2];
                                   const auto c = [](double v) { return torch::tensor(v, torch::kFloat64); };
                                   return combine_adaptive({c(0.4), c(0.9), c(1.3)}, a);
                                 },
                                 torch::tensor({0.3, -0.2, 0.5}, torch::kFloat64), 1e-6));

  // Small float64 model with randomized weights and a near-identity spatial transformer.
  ModelConfig mc;
  mc.image = {32, 32};
  mc.n_bits = 8;
  mc.encoder_channels = 4;
  mc.decoder_channels = 4;
  WatermarkModel model(mc);
  model->to(torch::kFloat64);
  {
    torch::NoGradGuard no_grad;
    for (auto& p : model->parameters()) p.copy_(torch::randn_like(p) * 0.2);
    model->decoder->stn->head->weight.mul_(0.1);
    model->decoder->stn->head->bias.copy_(torch::tensor({1.0, 0.0, 0.0, 0.0, 1.0, 0.0}, torch::kFloat64));
  }
  const auto image = torch::rand({1, 3, 32, 32}, torch::kFloat64) * 0.6 + 0.2;
  const auto wi = torch::randn({1, 3, 32, 32}, torch::kFloat64);
  record("stn", fd_grad_check([&](const torch::Tensor& t) { return (model->decoder->stn_rectify(t) * wi).sum(); },
                              image, 1e-6));

  const auto message = torch::tensor({{1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0}}, torch::kFloat64);
  Rng e2e_rng(8);
  PerturbConfig e2e;
  e2e.max_corner_shift = 2.0;
  const auto e2e_draw = draw_perturbation({32, 32}, 1.0, e2e, e2e_rng);
  PyramidPerceptual pyr;
  record("end_to_end", fd_grad_check(
                           [&](const torch::Tensor& t) {
                             auto enc = model->encode(t, message);
                             auto logits = model->decode(apply_perturbation(enc.encoded, e2e_draw));
                             LossTriple l{residual_loss(enc.residual), perceptual_loss(enc.encoded, t, pyr),
                                          message_loss(logits, message)};
                             return combine_adaptive(l, *model->loss_weights);
                           },
                           image, 1e-6));

  double worst = 0.0;
  std::string worst_name;
  bool pass = true;
  for (const auto& [name, err] : errors) {
    pass = pass && err < 1e-3;
    if (err >= worst) {
      worst = err;
      worst_name = name;
    }
  }
  return {pass, std::to_string(errors.size()) + " checks, worst relative error " + fmt(worst, 3) + " (" + worst_name +
                    ")"};
}

Verdict identities(const fs::path& work) {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  torch::manual_seed(23);
  const auto imgs = torch::rand({4, 3, 64, 64});

  Rng rng(1);
  const auto zero = perturb_pipeline(imgs, 0.0, toy_config().train.perturb, rng);
  expect((zero - imgs).abs().max().item<double>() < 1e-6, "strength-0 identity");

  auto mc = toy_config().train.model;
  WatermarkModel model(mc);
  {
    torch::NoGradGuard no_grad;
    for (auto& p : model->encoder->parameters()) p.add_(torch::randn_like(p) * 0.05);
  }
  const auto msgs = torch::randint(0, 2, {4, mc.n_bits}).to(torch::kFloat32);
  const auto enc = model->encode(imgs, msgs).encoded;
  expect(enc.min().item<float>() > 0.0f && enc.max().item<float>() < 1.0f, "sigmoid output in (0,1)");

  const auto dithered = one_bit_dither(imgs);
  expect(((dithered == 0) | (dithered == 1)).all().item<bool>(), "dither binarity");

  const auto gray = saturation(imgs, 0.0);
  expect(torch::equal(gray.select(1, 0), gray.select(1, 1)) && torch::equal(gray.select(1, 1), gray.select(1, 2)),
         "saturation 0 equal channels");

  expect(torch::equal(center_crop_resize(imgs, 0), imgs) && torch::equal(add_frame(imgs, 0), imgs),
         "width-0 crop/frame identity");

  const auto bce = message_loss(torch::zeros({4, 16}, torch::kFloat64), msgs.to(torch::kFloat64)).item<double>();
  expect(std::abs(bce - std::log(2.0)) < 1e-9, "BCE(0) = ln 2");

  auto cfg = toy_config().train;
  cfg.batch_size = 2;
  auto state = TrainState::create(cfg);
  const auto ds = testing::synthetic_dataset(4, {64, 64}, 9);
  const auto perceptual = make_perceptual_backend("pyramid");
  for (int i = 0; i < 2; ++i) train_step(state, sample_batch(ds, 2, 16, state.rng), *perceptual);
  const auto path = work / "identity_roundtrip.sgmk";
  save_checkpoint(state, path);
  expect(states_equal(load_checkpoint(path), state), "checkpoint round trip");

  std::string detail = "7 invariants";
  if (!failed.empty()) {
    detail += ", failed:";
    for (const auto& f : failed) detail += " " + f + ";";
  }
  return {failed.empty(), detail};
}

Verdict weight_dynamics(Runs& runs) {
  const auto name = runs.long_run();
  const auto rows = runs.metrics(name);
  const auto ramp = runs.base_config(0, NormMode::instance).perturb.ramp_steps;
  const auto last = rows.back().step;
  const auto ratio = [](const MetricsRow& r) { return r.ratio_r; };

  const std::int64_t tenth = std::max<std::int64_t>(ramp / 10, 10);
  const double ramp_start = window_mean(rows, 0, tenth, ratio);
  const double ramp_end = window_mean(rows, ramp - tenth, ramp, ratio);
  const auto peak = std::max_element(rows.begin(), rows.end(),
                                     [](const MetricsRow& a, const MetricsRow& b) { return a.ratio_r < b.ratio_r; });
  const double final_mean = window_mean(rows, last + 1 - 1000, last + 1, ratio);
  const bool rises = ramp_end > ramp_start;
  const bool falls = peak->ratio_r > final_mean && peak->step <= last - 1000;
  return {rises && falls, "ratio_R " + fmt(ramp_start, 3) + " -> " + fmt(ramp_end, 3) + " over the ramp, peak " +
                              fmt(peak->ratio_r, 3) + " at step " + std::to_string(peak->step) +
                              ", final 1k mean " + fmt(final_mean, 3) + " (last logged step " +
                              std::to_string(last) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the watermarking library"};
  bool full = false;
  bool reuse = false;
  std::string work_dir;
  std::vector<int> only;
  std::vector<int> expected_failures;
  std::optional<int> seeds;
  std::optional<std::int64_t> diagnostic_steps, long_steps, ramp_steps;
  app.add_flag("--full", full, "toy-scale protocol (5 seeds x 20k steps per mode); hours of CPU time");
  app.add_flag("--reuse", reuse, "reuse finished training runs found in the work directory");
  app.add_option("--work-dir", work_dir, "where training runs are written");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_option("--expect-fail", expected_failures,
                 "criteria known to fail; the exit status ignores them but reports an unexpected pass")
      ->delimiter(',');
  app.add_option("--seeds", seeds, "seeds per normalization mode");
  app.add_option("--diagnostic-steps", diagnostic_steps, "steps of each normalization run");
  app.add_option("--long-steps", long_steps, "steps of the crop and weight-dynamics runs");
  app.add_option("--ramp-steps", ramp_steps, "perturbation ramp length");
  CLI11_PARSE(app, argc, argv);

  Scale scale = full ? full_scale() : smoke_scale();
  if (seeds) scale.seeds = *seeds;
  if (diagnostic_steps) scale.diagnostic_steps = *diagnostic_steps;
  if (long_steps) scale.long_steps = *long_steps;
  if (ramp_steps) scale.ramp_steps = *ramp_steps;
  scale.window_end = std::min(scale.window_end, scale.diagnostic_steps);
  if (work_dir.empty()) work_dir = (fs::temp_directory_path() / ("stegamark_acceptance_" + scale.name)).string();

  torch::set_num_threads(1);
  Runs runs(scale, work_dir, reuse);
  const std::set<int> selected(only.begin(), only.end());

  struct Criterion {
    int id;
    std::string title;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "geometry exactness", [] { return geometry(); }},
      {2, "loss formula fidelity", [] { return loss_formula(); }},
      {3, "vanishing-gradient diagnostic", [&] { return gradient_diagnostic(runs); }},
      {4, "crop resistance", [&] { return crop_resistance(runs); }},
      {5, "differentiability suite", [] { return differentiability(); }},
      {6, "identity/invariant suite", [&] { return identities(work_dir); }},
      {7, "self-adaptive weight dynamics", [&] { return weight_dynamics(runs); }},
  };

  std::cout << "acceptance (" << scale.name << " scale, work dir " << work_dir << ")" << std::endl;
  const std::set<int> expected(expected_failures.begin(), expected_failures.end());
  int unexpected = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (v.pass == (expected.count(c.id) > 0)) ++unexpected;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.title << ": " << v.detail << " ["
              << fmt(secs, 3) << " s]" << std::endl;
    if (expected.count(c.id)) {
      std::cout << "  criterion " << c.id << (v.pass ? " passed but was expected to fail" : " failure is expected")
                << std::endl;
    }
  }
  return unexpected == 0 ? 0 : 1;
}
