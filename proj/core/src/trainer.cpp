#include "stegamark/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "stegamark/decoder.hpp"
#include "stegamark/log.hpp"
#include "stegamark/perturbation.hpp"

namespace stegamark {

namespace fs = std::filesystem;

TrainState TrainState::create(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.config = config;
  torch::manual_seed(config.seed);
  s.model = WatermarkModel(config.model);
  s.optimizer = std::make_unique<torch::optim::Adam>(
      s.model->parameters(), torch::optim::AdamOptions(config.learning_rate)
                                 .betas({config.adam_beta1, config.adam_beta2})
                                 .eps(config.adam_eps));
  s.rng.seed(config.seed);
  return s;
}

namespace {

struct Forward {
  LossTriple losses;
  torch::Tensor total;
  torch::Tensor logits;
  torch::Tensor encoded;
  torch::Tensor residual;
  double strength = 0.0;
  LossWeights fixed;
};

Forward forward(TrainState& state, const Batch& batch, const PerceptualBackend& perceptual, Rng& rng) {
  const auto& cfg = state.config;
  Forward f;
  f.strength = cfg.perturb.enabled ? strength_schedule(state.step, cfg.perturb.ramp_steps) : 0.0;
  auto enc = state.model->encode(batch.images, batch.messages);
  f.encoded = enc.encoded;
  f.residual = enc.residual;
  auto perturbed = perturb_pipeline(enc.encoded, f.strength, cfg.perturb, rng);
  f.logits = state.model->decode(perturbed);
  f.losses = {residual_loss(enc.residual), perceptual_loss(enc.encoded, batch.images, perceptual),
              message_loss(f.logits, batch.messages)};
  if (cfg.loss_mode == LossMode::fixed) {
    f.fixed = fixed_weight_at(state.step, cfg.fixed_weights);
    f.total = combine_fixed(f.losses, f.fixed);
  } else {
    f.total = combine_adaptive(f.losses, *state.model->loss_weights);
  }
  return f;
}

std::int64_t first_bad_sample(const Forward& f) {
  torch::NoGradGuard no_grad;
  auto per_sample = f.residual.pow(2).flatten(1).mean(1) + f.encoded.flatten(1).sum(1) + f.logits.sum(1);
  auto bad = torch::nonzero(~torch::isfinite(per_sample));
  return bad.numel() == 0 ? -1 : bad[0][0].item<std::int64_t>();
}

}  // namespace

MetricsRow train_step(TrainState& state, const Batch& batch, const PerceptualBackend& perceptual) {
  state.model->train();
  auto f = forward(state, batch, perceptual, state.rng);
  const double total = f.total.item<double>();
  if (!std::isfinite(total)) {
    const auto idx = first_bad_sample(f);
    throw TrainingAborted("non-finite loss at step " + std::to_string(state.step) + " (batch index " +
                              std::to_string(idx) + ")",
                          state.step, idx);
  }

  MetricsRow row;
  row.step = state.step;
  row.strength = f.strength;
  row.loss_r = f.losses.residual.item<double>();
  row.loss_p = f.losses.perceptual.item<double>();
  row.loss_m = f.losses.message.item<double>();
  row.loss = total;
  row.bit_acc = bit_accuracy(logits_to_bit_tensor(f.logits.detach()), batch.messages);

  const auto probes = probe_gradients(*state.model, f.total, default_probe_layers());
  row.grad_enc_fc = probes.at("encoder.message_fc");
  row.grad_dec_conv1 = probes.at("decoder.decrypt.conv1");

  torch::nn::utils::clip_grad_norm_(state.model->parameters(), state.config.grad_clip);
  state.optimizer->step();

  if (state.config.loss_mode == LossMode::fixed) {
    if (f.fixed.m != 0.0) {
      std::tie(row.ratio_r, row.ratio_p) = weight_ratio(f.fixed);
    } else {
      row.ratio_r = row.ratio_p = std::numeric_limits<double>::quiet_NaN();
    }
  } else {
    std::tie(row.ratio_r, row.ratio_p) = weight_ratio(*state.model->loss_weights);
  }
  ++state.step;
  return row;
}

std::map<std::string, double> probe_gradients(torch::nn::Module& module, const torch::Tensor& loss,
                                              const std::map<std::string, std::string>& layers) {
  module.zero_grad();
  loss.backward();
  const auto params = module.named_parameters(/*recurse=*/true);
  std::map<std::string, double> out;
  for (const auto& [probe, param_name] : layers) {
    const auto* p = params.find(param_name);
    if (p == nullptr) throw std::invalid_argument("unknown probe parameter: " + param_name);
    out[probe] = mean_abs_grad(*p);
  }
  return out;
}

std::map<std::string, double> grad_probe(TrainState& state, const Batch& batch, const PerceptualBackend& perceptual,
                                         const std::map<std::string, std::string>& layers) {
  state.model->train();
  auto rng = state.rng;
  // Batch-norm running statistics are buffers; keep them untouched as well.
  std::vector<torch::Tensor> saved_buffers;
  for (const auto& b : state.model->buffers()) saved_buffers.push_back(b.clone());
  auto f = forward(state, batch, perceptual, rng);
  auto out = probe_gradients(*state.model, f.total, layers);
  state.model->zero_grad();
  torch::NoGradGuard no_grad;
  auto buffers = state.model->buffers();
  for (std::size_t i = 0; i < buffers.size(); ++i) buffers[i].copy_(saved_buffers[i]);
  return out;
}

std::string to_csv_line(const MetricsRow& r) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << r.step << ',' << r.loss_r << ',' << r.loss_p << ',' << r.loss_m << ',' << r.loss << ',' << r.bit_acc << ','
     << r.strength << ',' << r.ratio_r << ',' << r.ratio_p << ',' << r.grad_enc_fc << ',' << r.grad_dec_conv1;
  return os.str();
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error("unexpected metrics header in " + path.string());
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 11) throw std::runtime_error("malformed metrics row in " + path.string());
    rows.push_back({static_cast<std::int64_t>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]});
  }
  return rows;
}

TrainResult train(TrainState& state, const Dataset& dataset) {
  const auto& cfg = state.config;
  if (dataset.target_size != cfg.model.image) throw std::invalid_argument("dataset size does not match the model");
  const auto perceptual = make_perceptual_backend(cfg.perceptual_backend, cfg.perceptual_weights);
  const fs::path out_dir = cfg.out_dir;
  fs::create_directories(out_dir);

  TrainResult result;
  result.metrics_csv = out_dir / "metrics.csv";
  result.checkpoint = out_dir / "checkpoint.sgmk";

  const bool append = state.step > 0 && fs::exists(result.metrics_csv);
  std::ofstream csv(result.metrics_csv, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + result.metrics_csv.string());
  if (!append) csv << kMetricsHeader << '\n';

  while (state.step < cfg.total_steps) {
    const auto batch = sample_batch(dataset, static_cast<std::size_t>(cfg.batch_size),
                                    static_cast<std::size_t>(cfg.model.n_bits), state.rng);
    const auto row = train_step(state, batch, *perceptual);
    if (row.step % cfg.log_every == 0) {
      if (cfg.loss_mode == LossMode::adaptive) {
        const auto& w = *state.model->loss_weights;
        for (const auto* p : {&w.log_sigma_r, &w.log_sigma_p, &w.log_sigma_m}) {
          if (!std::isfinite(std::exp(p->item<double>()))) {
            throw TrainingAborted("adaptive loss sigma left the finite positive range", row.step, -1);
          }
        }
      }
      csv << to_csv_line(row) << '\n';
      if (!csv) throw std::runtime_error("failed writing " + result.metrics_csv.string());
      result.rows.push_back(row);
      if (row.step % (cfg.log_every * 100) == 0) {
        std::ostringstream msg;
        msg.precision(4);
        msg << "step " << row.step << " L_M " << row.loss_m << " bit_acc " << row.bit_acc << " strength "
            << row.strength;
        log::info(msg.str());
      }
    }
    if (state.step % cfg.checkpoint_every == 0 && state.step < cfg.total_steps) {
      csv.flush();
      save_checkpoint(state, result.checkpoint);
    }
  }
  csv.flush();
  save_checkpoint(state, result.checkpoint);
  return result;
}

TrainResult train(const TrainConfig& config, const std::optional<fs::path>& resume) {
  if (config.data_dir.empty()) throw std::invalid_argument("train.data_dir is not set");
  const auto dataset = load_image_dir(config.data_dir, config.model.image);
  if (resume) {
    auto state = load_checkpoint(*resume);
    state.config.total_steps = config.total_steps;
    state.config.out_dir = config.out_dir;
    return train(state, dataset);
  }
  auto state = TrainState::create(config);
  return train(state, dataset);
}

}  // namespace stegamark
