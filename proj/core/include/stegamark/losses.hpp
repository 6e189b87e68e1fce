#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include <torch/script.h>
#include <torch/torch.h>

namespace stegamark {

/// Scalar loss tensors (0-d). The combiners keep them differentiable.
struct LossTriple {
  torch::Tensor residual;    // L_R
  torch::Tensor perceptual;  // L_P
  torch::Tensor message;     // L_M
};

/// Mean of squared residual entries.
torch::Tensor residual_loss(const torch::Tensor& residual);

/// Image-similarity backend. Implementations must be >= 0 and differentiable in both arguments.
class PerceptualBackend {
 public:
  virtual ~PerceptualBackend() = default;
  virtual torch::Tensor operator()(const torch::Tensor& a, const torch::Tensor& b) const = 0;
  virtual std::string name() const = 0;
};

/// Sum over four dyadic scales (1, 1/2, 1/4, 1/8, via 2x2 average pooling) of the mean squared difference.
class PyramidPerceptual final : public PerceptualBackend {
 public:
  static constexpr int kScales = 4;
  torch::Tensor operator()(const torch::Tensor& a, const torch::Tensor& b) const override;
  std::string name() const override { return "pyramid"; }
};

/// Learned perceptual metric loaded from a TorchScript module whose forward(a, b) returns per-image or
/// scalar distances for images in [0,1]. The module is expected to wrap the pretrained LPIPS network.
class ScriptedPerceptual final : public PerceptualBackend {
 public:
  explicit ScriptedPerceptual(const std::filesystem::path& module_path);
  torch::Tensor operator()(const torch::Tensor& a, const torch::Tensor& b) const override;
  std::string name() const override { return "lpips"; }

 private:
  mutable torch::jit::script::Module module_;
};

/// "pyramid" or "lpips" (the latter needs `weights`, a TorchScript file).
std::shared_ptr<PerceptualBackend> make_perceptual_backend(std::string_view name,
                                                           const std::filesystem::path& weights = {});

/// Throws std::invalid_argument on shape mismatch.
torch::Tensor perceptual_loss(const torch::Tensor& a, const torch::Tensor& b, const PerceptualBackend& backend);

/// Mean binary cross-entropy with logits, softplus(z) - t z.
torch::Tensor message_loss(const torch::Tensor& logits, const torch::Tensor& targets);

struct FixedWeightSchedule {
  double lambda_r_max = 1.5;
  double lambda_p_max = 1.5;
  double lambda_m = 1.0;
  std::int64_t ramp_start = 1500;
  std::int64_t ramp_end = 15000;

  void validate() const;
  friend bool operator==(const FixedWeightSchedule&, const FixedWeightSchedule&) = default;
};

struct LossWeights {
  double r = 0.0;
  double p = 0.0;
  double m = 0.0;
};

/// Image weights are zero before ramp_start, linear up to their maxima at ramp_end, constant after.
LossWeights fixed_weight_at(std::int64_t step, const FixedWeightSchedule& schedule);

torch::Tensor combine_fixed(const LossTriple& losses, const LossWeights& weights);

/// Learnable log sigmas of the self-balancing combination.
class AdaptiveWeightsImpl : public torch::nn::Module {
 public:
  AdaptiveWeightsImpl(double log_sigma_r, double log_sigma_p, double log_sigma_m);

  torch::Tensor log_sigma_r, log_sigma_p, log_sigma_m;
};
TORCH_MODULE(AdaptiveWeights);

/// L_R / s_R^2 + L_P / s_P^2 + L_M / s_M^2 + 2 log(s_R s_P s_M), with s = exp(log_sigma).
torch::Tensor combine_adaptive(const LossTriple& losses, const AdaptiveWeightsImpl& weights);

/// Image-to-secret weight ratios (ratio_R, ratio_P).
std::pair<double, double> weight_ratio(const AdaptiveWeightsImpl& weights);
std::pair<double, double> weight_ratio(const LossWeights& weights);

}  // namespace stegamark
