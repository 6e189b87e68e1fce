#pragma once

#include <functional>
#include <string>
#include <string_view>

#include <torch/torch.h>

namespace stegamark {

enum class NormMode { none, batch, instance };

std::string_view to_string(NormMode mode);
NormMode parse_norm_mode(std::string_view text);

inline constexpr double kNormEps = 1e-5;

/// Per-(instance, channel) standardization over every trailing (spatial) dimension.
/// Expects x of shape [B,C,...] with at least one spatial dimension.
torch::Tensor instance_norm(const torch::Tensor& x, double eps = kNormEps);

/// Per-channel standardization over (instance, spatial). In train mode the batch statistics are used
/// and the running statistics are updated in place; in eval mode the running statistics are used.
/// Throws std::invalid_argument for train mode with a batch of one.
torch::Tensor batch_norm(const torch::Tensor& x, torch::Tensor& running_mean, torch::Tensor& running_var, bool train,
                         double eps = kNormEps, double momentum = 0.1);

/// Normalization placed in front of an activation, selected by NormMode.
///
/// Inputs are [B,C,H,W] feature maps or [B,F] feature vectors. For vectors, instance mode
/// standardizes each row across its F features and batch mode standardizes each feature
/// across the batch.
class NormImpl : public torch::nn::Module {
 public:
  NormImpl(NormMode mode, std::int64_t channels, bool affine = false, double eps = kNormEps);

  torch::Tensor forward(const torch::Tensor& x);

  NormMode mode() const { return mode_; }

 private:
  NormMode mode_;
  double eps_;
  torch::Tensor weight_, bias_;
  torch::Tensor running_mean_, running_var_;
};
TORCH_MODULE(Norm);

/// conv -> norm -> relu.
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel, std::int64_t stride,
                NormMode mode, bool affine);

  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  Norm norm{nullptr};
};
TORCH_MODULE(ConvBlock);

/// Compares the autograd gradient of scalar-valued `f` at `x` to central differences with step `h`.
/// Returns max_i |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8). Throws std::runtime_error if f is not finite.
double fd_grad_check(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x, double h);

/// Mean absolute value of a tensor's gradient; 0 if the gradient is undefined.
double mean_abs_grad(const torch::Tensor& param);

}  // namespace stegamark
