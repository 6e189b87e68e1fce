#include "stegamark/nn_core.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace stegamark {

std::string_view to_string(NormMode mode) {
  switch (mode) {
    case NormMode::none: return "none";
    case NormMode::batch: return "batch";
    case NormMode::instance: return "instance";
  }
  return "none";
}

NormMode parse_norm_mode(std::string_view text) {
  if (text == "none") return NormMode::none;
  if (text == "batch") return NormMode::batch;
  if (text == "instance") return NormMode::instance;
  throw std::invalid_argument("unknown norm mode: " + std::string(text));
}

torch::Tensor instance_norm(const torch::Tensor& x, double eps) {
  TORCH_CHECK(x.dim() >= 3, "instance_norm expects [B,C,spatial...]");
  // One group per channel: group statistics are exactly the per-instance, per-channel ones.
  return torch::group_norm(x, x.size(1), {}, {}, eps);
}

torch::Tensor batch_norm(const torch::Tensor& x, torch::Tensor& running_mean, torch::Tensor& running_var, bool train,
                         double eps, double momentum) {
  TORCH_CHECK(x.dim() >= 2, "batch_norm expects [B,C,...]");
  if (train && x.size(0) < 2) throw std::invalid_argument("batch_norm in train mode needs a batch of at least 2");
  return torch::batch_norm(x, {}, {}, running_mean, running_var, train, momentum, eps, /*cudnn_enabled=*/false);
}

NormImpl::NormImpl(NormMode mode, std::int64_t channels, bool affine, double eps) : mode_(mode), eps_(eps) {
  if (affine && mode != NormMode::none) {
    weight_ = register_parameter("weight", torch::ones({channels}));
    bias_ = register_parameter("bias", torch::zeros({channels}));
  }
  if (mode == NormMode::batch) {
    running_mean_ = register_buffer("running_mean", torch::zeros({channels}));
    running_var_ = register_buffer("running_var", torch::ones({channels}));
  }
}

torch::Tensor NormImpl::forward(const torch::Tensor& x) {
  if (mode_ == NormMode::none) return x;
  torch::Tensor y;
  if (mode_ == NormMode::instance) {
    // Feature vectors are standardized across their features.
    y = x.dim() == 2 ? instance_norm(x.unsqueeze(1), eps_).squeeze(1) : instance_norm(x, eps_);
  } else {
    y = batch_norm(x, running_mean_, running_var_, is_training(), eps_);
  }
  if (weight_.defined()) {
    std::vector<std::int64_t> shape(x.dim(), 1);
    shape[1] = x.size(1);
    y = y * weight_.view(shape) + bias_.view(shape);
  }
  return y;
}

ConvBlockImpl::ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
                             std::int64_t stride, NormMode mode, bool affine) {
  conv = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, kernel).stride(stride).padding(
                  kernel / 2)));
  norm = register_module("norm", Norm(mode, out_channels, affine));
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) { return torch::relu(norm(conv(x))); }

double fd_grad_check(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x, double h) {
  auto point = x.detach().clone().requires_grad_(true);
  auto value = f(point);
  TORCH_CHECK(value.numel() == 1, "fd_grad_check needs a scalar-valued function");
  if (!std::isfinite(value.item<double>())) throw std::runtime_error("fd_grad_check: f is not finite at x");
  auto grads = torch::autograd::grad({value}, {point}, {}, /*retain_graph=*/false, /*create_graph=*/false,
                                     /*allow_unused=*/true);
  auto g_ad = grads[0].defined() ? grads[0].detach().to(torch::kFloat64).flatten() : torch::zeros({x.numel()},
                                                                                                   torch::kFloat64);

  torch::NoGradGuard no_grad;
  auto probe = x.detach().clone().contiguous();
  auto flat = probe.view({-1});
  double worst = 0.0;
  for (std::int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + h;
    const double up = f(probe).item<double>();
    flat[i] = orig - h;
    const double down = f(probe).item<double>();
    flat[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) throw std::runtime_error("fd_grad_check: f is not finite near x");
    const double fd = (up - down) / (2.0 * h);
    const double ad = g_ad[i].item<double>();
    const double denom = std::max({std::abs(ad), std::abs(fd), 1e-8});
    worst = std::max(worst, std::abs(ad - fd) / denom);
  }
  return worst;
}

double mean_abs_grad(const torch::Tensor& param) {
  const auto& g = param.grad();
  if (!g.defined()) return 0.0;
  return g.abs().mean().item<double>();
}

}  // namespace stegamark
