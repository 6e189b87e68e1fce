#pragma once

#include <string_view>

#include <torch/torch.h>

#include "stegamark/data_io.hpp"
#include "stegamark/nn_core.hpp"

namespace stegamark {

/// How the residual is combined with the cover image.
enum class OutputMode {
  additive,  ///< encoded = image + R (unbounded)
  sigmoid,   ///< encoded = sigmoid(image - 0.5 + R), always inside (0,1)
};

std::string_view to_string(OutputMode mode);
OutputMode parse_output_mode(std::string_view text);

/// Factor between the message tensor side and the image side.
inline constexpr std::int64_t kMessageUpsample = 8;

struct EncoderOptions {
  std::int64_t n_bits = 100;
  ImageSize image{400, 400};
  /// Width of the first U-Net level; deeper levels use 2x, 4x, 8x.
  std::int64_t base_channels = 32;
  NormMode norm = NormMode::instance;
  bool norm_affine = false;
};

/// Four-level U-Net: stride-2 downsampling, nearest upsampling, skip concatenation.
/// The 1x1 output projection starts at zero so the initial residual is zero.
class UNetImpl : public torch::nn::Module {
 public:
  UNetImpl(std::int64_t in_channels, std::int64_t out_channels, std::int64_t base_channels, NormMode norm,
           bool affine);

  torch::Tensor forward(const torch::Tensor& x);

 private:
  static constexpr int kLevels = 4;
  ConvBlock down_in_[kLevels]{nullptr, nullptr, nullptr, nullptr};
  ConvBlock down_mid_[kLevels]{nullptr, nullptr, nullptr, nullptr};
  ConvBlock up_reduce_[kLevels - 1]{nullptr, nullptr, nullptr};
  ConvBlock up_merge_[kLevels - 1]{nullptr, nullptr, nullptr};
  torch::nn::Conv2d project_{nullptr};
};
TORCH_MODULE(UNet);

struct EncodeResult {
  torch::Tensor encoded;   // [B,3,H,W]
  torch::Tensor residual;  // [B,3,H,W], pre-combination R
};

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const EncoderOptions& options);

  /// [B,n_bits] -> [B,3,H,W]: dense layer to an (H/8)x(W/8)x3 grid, then nearest-neighbour x8.
  torch::Tensor embed_message(const torch::Tensor& messages);

  /// images [B,3,H,W] in [0,1], messages [B,n_bits] in {0,1}.
  EncodeResult encode(const torch::Tensor& images, const torch::Tensor& messages, OutputMode mode);

  const EncoderOptions& options() const { return options_; }

  torch::nn::Linear message_fc{nullptr};
  UNet unet{nullptr};

 private:
  EncoderOptions options_;
};
TORCH_MODULE(Encoder);

/// Applies the output combination to an image and a residual.
torch::Tensor combine_residual(const torch::Tensor& images, const torch::Tensor& residual, OutputMode mode);

}  // namespace stegamark
