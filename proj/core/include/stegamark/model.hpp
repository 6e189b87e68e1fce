#pragma once

#include <map>
#include <string>

#include <torch/torch.h>

#include "stegamark/decoder.hpp"
#include "stegamark/encoder.hpp"
#include "stegamark/losses.hpp"

namespace stegamark {

/// Architecture choices that must match between training and inference; stored in checkpoints.
struct ModelConfig {
  ImageSize image{400, 400};
  std::int64_t n_bits = 100;
  std::int64_t encoder_channels = 32;
  std::int64_t decoder_channels = 32;
  NormMode norm = NormMode::instance;
  bool norm_affine = false;
  bool norm_before_decoder_sigmoid = true;
  OutputMode output = OutputMode::sigmoid;
  /// Initial log sigmas for adaptive loss weighting.
  double init_log_sigma_r = 1.1512925464970229;  // ln(sqrt(10))
  double init_log_sigma_p = 1.1512925464970229;
  double init_log_sigma_m = 0.0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Encoder, decoder and loss-weight parameters under one module tree.
class WatermarkModelImpl : public torch::nn::Module {
 public:
  explicit WatermarkModelImpl(const ModelConfig& config);

  EncodeResult encode(const torch::Tensor& images, const torch::Tensor& messages);
  torch::Tensor decode(const torch::Tensor& images);

  const ModelConfig& config() const { return config_; }

  Encoder encoder{nullptr};
  Decoder decoder{nullptr};
  AdaptiveWeights loss_weights{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(WatermarkModel);

/// Probe name -> parameter name whose mean |gradient| is reported.
const std::map<std::string, std::string>& default_probe_layers();

}  // namespace stegamark
