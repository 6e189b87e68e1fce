#include "stegamark/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace stegamark {

namespace F = torch::nn::functional;

torch::Tensor residual_loss(const torch::Tensor& residual) { return residual.pow(2).mean(); }

torch::Tensor PyramidPerceptual::operator()(const torch::Tensor& a, const torch::Tensor& b) const {
  auto x = a;
  auto y = b;
  auto total = (x - y).pow(2).mean();
  for (int k = 1; k < kScales; ++k) {
    x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
    y = F::avg_pool2d(y, F::AvgPool2dFuncOptions(2));
    total = total + (x - y).pow(2).mean();
  }
  return total;
}

ScriptedPerceptual::ScriptedPerceptual(const std::filesystem::path& module_path) {
  try {
    module_ = torch::jit::load(module_path.string());
  } catch (const c10::Error& e) {
    throw std::runtime_error("cannot load perceptual module " + module_path.string() + ": " + e.what_without_backtrace());
  }
  module_.eval();
}

torch::Tensor ScriptedPerceptual::operator()(const torch::Tensor& a, const torch::Tensor& b) const {
  return module_.forward({a, b}).toTensor().mean();
}

std::shared_ptr<PerceptualBackend> make_perceptual_backend(std::string_view name, const std::filesystem::path& weights) {
  if (name == "pyramid") return std::make_shared<PyramidPerceptual>();
  if (name == "lpips") {
    if (weights.empty()) throw std::invalid_argument("lpips backend needs a TorchScript weights file");
    return std::make_shared<ScriptedPerceptual>(weights);
  }
  throw std::invalid_argument("unknown perceptual backend: " + std::string(name));
}

torch::Tensor perceptual_loss(const torch::Tensor& a, const torch::Tensor& b, const PerceptualBackend& backend) {
  if (!a.sizes().equals(b.sizes())) throw std::invalid_argument("perceptual_loss: shape mismatch");
  return backend(a, b);
}

torch::Tensor message_loss(const torch::Tensor& logits, const torch::Tensor& targets) {
  if (!logits.sizes().equals(targets.sizes())) throw std::invalid_argument("message_loss: shape mismatch");
  return (F::softplus(logits) - targets.to(logits.scalar_type()) * logits).mean();
}

void FixedWeightSchedule::validate() const {
  if (ramp_start < 0 || ramp_end < ramp_start) {
    throw std::invalid_argument("fixed weight schedule needs 0 <= ramp_start <= ramp_end");
  }
}

LossWeights fixed_weight_at(std::int64_t step, const FixedWeightSchedule& s) {
  if (step < 0) throw std::invalid_argument("step must be >= 0");
  double t = 0.0;
  if (step >= s.ramp_end) {
    t = 1.0;
  } else if (step > s.ramp_start) {
    t = static_cast<double>(step - s.ramp_start) / static_cast<double>(s.ramp_end - s.ramp_start);
  }
  return {t * s.lambda_r_max, t * s.lambda_p_max, s.lambda_m};
}

torch::Tensor combine_fixed(const LossTriple& t, const LossWeights& w) {
  return w.r * t.residual + w.p * t.perceptual + w.m * t.message;
}

AdaptiveWeightsImpl::AdaptiveWeightsImpl(double log_sigma_r_init, double log_sigma_p_init, double log_sigma_m_init) {
  auto scalar = [](double v) { return torch::tensor(v, torch::kFloat32); };
  log_sigma_r = register_parameter("log_sigma_r", scalar(log_sigma_r_init));
  log_sigma_p = register_parameter("log_sigma_p", scalar(log_sigma_p_init));
  log_sigma_m = register_parameter("log_sigma_m", scalar(log_sigma_m_init));
}

torch::Tensor combine_adaptive(const LossTriple& t, const AdaptiveWeightsImpl& w) {
  // 1/s^2 = exp(-2 log s); 2 log(s_R s_P s_M) = 2 (log s_R + log s_P + log s_M).
  return t.residual * torch::exp(-2.0 * w.log_sigma_r) + t.perceptual * torch::exp(-2.0 * w.log_sigma_p) +
         t.message * torch::exp(-2.0 * w.log_sigma_m) + 2.0 * (w.log_sigma_r + w.log_sigma_p + w.log_sigma_m);
}

std::pair<double, double> weight_ratio(const AdaptiveWeightsImpl& w) {
  const double lm = w.log_sigma_m.item<double>();
  return {std::exp(2.0 * (lm - w.log_sigma_r.item<double>())), std::exp(2.0 * (lm - w.log_sigma_p.item<double>()))};
}

std::pair<double, double> weight_ratio(const LossWeights& w) {
  if (w.m == 0.0) throw std::invalid_argument("weight_ratio: secret weight is zero");
  return {w.r / w.m, w.p / w.m};
}

}  // namespace stegamark
