#include "stegamark/encoder.hpp"

#include <stdexcept>
#include <string>

namespace stegamark {

namespace F = torch::nn::functional;

std::string_view to_string(OutputMode mode) { return mode == OutputMode::additive ? "additive" : "sigmoid"; }

OutputMode parse_output_mode(std::string_view text) {
  if (text == "additive") return OutputMode::additive;
  if (text == "sigmoid") return OutputMode::sigmoid;
  throw std::invalid_argument("unknown output mode: " + std::string(text));
}

UNetImpl::UNetImpl(std::int64_t in_channels, std::int64_t out_channels, std::int64_t base_channels, NormMode norm,
                   bool affine) {
  std::int64_t widths[kLevels];
  for (int i = 0; i < kLevels; ++i) widths[i] = base_channels << i;

  for (int i = 0; i < kLevels; ++i) {
    const auto in = i == 0 ? in_channels : widths[i - 1];
    const auto stride = i == 0 ? 1 : 2;
    down_in_[i] = register_module("down" + std::to_string(i) + "_in", ConvBlock(in, widths[i], 3, stride, norm, affine));
    down_mid_[i] =
        register_module("down" + std::to_string(i) + "_mid", ConvBlock(widths[i], widths[i], 3, 1, norm, affine));
  }
  for (int i = 0; i < kLevels - 1; ++i) {
    up_reduce_[i] = register_module("up" + std::to_string(i) + "_reduce",
                                    ConvBlock(widths[i + 1], widths[i], 3, 1, norm, affine));
    up_merge_[i] = register_module("up" + std::to_string(i) + "_merge",
                                   ConvBlock(2 * widths[i], widths[i], 3, 1, norm, affine));
  }
  project_ = register_module("project", torch::nn::Conv2d(torch::nn::Conv2dOptions(widths[0], out_channels, 1)));
  torch::NoGradGuard no_grad;
  project_->weight.zero_();
  project_->bias.zero_();
}

torch::Tensor UNetImpl::forward(const torch::Tensor& x) {
  torch::Tensor skips[kLevels];
  auto h = x;
  for (int i = 0; i < kLevels; ++i) {
    h = down_mid_[i](down_in_[i](h));
    skips[i] = h;
  }
  for (int i = kLevels - 2; i >= 0; --i) {
    auto up = F::interpolate(h, F::InterpolateFuncOptions()
                                    .size(std::vector<std::int64_t>{skips[i].size(2), skips[i].size(3)})
                                    .mode(torch::kNearest));
    h = up_merge_[i](torch::cat({skips[i], up_reduce_[i](up)}, 1));
  }
  return project_(h);
}

EncoderImpl::EncoderImpl(const EncoderOptions& options) : options_(options) {
  const auto& img = options_.image;
  if (img.height % kMessageUpsample != 0 || img.width % kMessageUpsample != 0) {
    throw std::invalid_argument("encoder image sides must be divisible by 8");
  }
  if (options_.n_bits < 1) throw std::invalid_argument("encoder needs n_bits >= 1");
  const auto cells = (img.height / kMessageUpsample) * (img.width / kMessageUpsample) * 3;
  message_fc = register_module("message_fc", torch::nn::Linear(options_.n_bits, cells));
  unet = register_module("unet", UNet(6, 3, options_.base_channels, options_.norm, options_.norm_affine));
}

torch::Tensor EncoderImpl::embed_message(const torch::Tensor& messages) {
  if (messages.dim() != 2 || messages.size(1) != options_.n_bits) {
    throw std::invalid_argument("embed_message: expected [B," + std::to_string(options_.n_bits) + "] messages");
  }
  const auto gh = options_.image.height / kMessageUpsample;
  const auto gw = options_.image.width / kMessageUpsample;
  auto grid = message_fc(messages).view({messages.size(0), 3, gh, gw});
  return grid.repeat_interleave(kMessageUpsample, 2).repeat_interleave(kMessageUpsample, 3);
}

EncodeResult EncoderImpl::encode(const torch::Tensor& images, const torch::Tensor& messages, OutputMode mode) {
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != options_.image.height ||
      images.size(3) != options_.image.width) {
    throw std::invalid_argument("encode: image does not match the configured size");
  }
  if (images.size(0) != messages.size(0)) throw std::invalid_argument("encode: batch sizes differ");
  auto residual = unet(torch::cat({embed_message(messages), images}, 1));
  return {combine_residual(images, residual, mode), residual};
}

torch::Tensor combine_residual(const torch::Tensor& images, const torch::Tensor& residual, OutputMode mode) {
  if (mode == OutputMode::additive) return images + residual;
  return torch::sigmoid(images - 0.5 + residual);
}

}  // namespace stegamark
