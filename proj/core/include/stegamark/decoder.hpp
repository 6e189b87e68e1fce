#pragma once

#include <torch/torch.h>

#include "stegamark/data_io.hpp"
#include "stegamark/nn_core.hpp"

namespace stegamark {

struct DecoderOptions {
  std::int64_t n_bits = 100;
  ImageSize image{400, 400};
  std::int64_t base_channels = 32;
  NormMode norm = NormMode::instance;
  bool norm_affine = false;
  /// Normalize the logits before the final sigmoid. Ignored when norm is none.
  bool norm_before_sigmoid = true;
};

/// Spatial transformer front end: a small conv stack regresses a 2x3 affine used to resample the input.
/// The regression head starts at zero weights with an identity bias.
class LocalizerImpl : public torch::nn::Module {
 public:
  LocalizerImpl(std::int64_t base_channels, NormMode norm, bool affine);

  /// [B,3,H,W] -> [B,2,3]
  torch::Tensor forward(const torch::Tensor& images);

  torch::nn::Linear head{nullptr};

 private:
  ConvBlock conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
  torch::nn::Linear fc_{nullptr};
  Norm fc_norm_{nullptr};
};
TORCH_MODULE(Localizer);

/// Seven conv blocks (stride 2 on conv1, conv3, conv5, conv7) then two dense layers.
class DecryptNetImpl : public torch::nn::Module {
 public:
  explicit DecryptNetImpl(const DecoderOptions& options);

  /// [B,3,H,W] -> [B,n_bits] logits
  torch::Tensor forward(const torch::Tensor& images);

  ConvBlock conv1{nullptr};

 private:
  std::vector<ConvBlock> convs_;
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
  Norm fc1_norm_{nullptr};
  Norm logit_norm_{nullptr};
};
TORCH_MODULE(DecryptNet);

class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const DecoderOptions& options);

  /// Predicted affine, [B,2,3].
  torch::Tensor predict_affine(const torch::Tensor& images);
  torch::Tensor stn_rectify(const torch::Tensor& images);
  /// Pre-sigmoid logits, [B,n_bits].
  torch::Tensor decode(const torch::Tensor& images);

  const DecoderOptions& options() const { return options_; }

  Localizer stn{nullptr};
  DecryptNet decrypt{nullptr};

 private:
  DecoderOptions options_;
};
TORCH_MODULE(Decoder);

/// Resamples images with normalized-coordinate affines (align_corners = false, zero padding).
torch::Tensor affine_resample(const torch::Tensor& images, const torch::Tensor& theta);

/// bit = 1 where logit >= 0. Throws std::invalid_argument on NaN.
Message logits_to_bits(const torch::Tensor& logits);
/// Batched variant: [B,n] logits -> [B,n] float 0/1.
torch::Tensor logits_to_bit_tensor(const torch::Tensor& logits);

}  // namespace stegamark
