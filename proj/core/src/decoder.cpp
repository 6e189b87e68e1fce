#include "stegamark/decoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stegamark {

namespace F = torch::nn::functional;

namespace {
constexpr std::int64_t kLocalizerPool = 4;
constexpr std::int64_t kLocalizerHidden = 128;
constexpr std::int64_t kDecryptHidden = 512;
}  // namespace

LocalizerImpl::LocalizerImpl(std::int64_t base_channels, NormMode norm, bool affine) {
  const auto b = base_channels;
  conv1_ = register_module("conv1", ConvBlock(3, b, 3, 2, norm, affine));
  conv2_ = register_module("conv2", ConvBlock(b, 2 * b, 3, 2, norm, affine));
  conv3_ = register_module("conv3", ConvBlock(2 * b, 4 * b, 3, 2, norm, affine));
  fc_ = register_module("fc", torch::nn::Linear(4 * b * kLocalizerPool * kLocalizerPool, kLocalizerHidden));
  fc_norm_ = register_module("fc_norm", Norm(norm, kLocalizerHidden, affine));
  head = register_module("head", torch::nn::Linear(kLocalizerHidden, 6));
  torch::NoGradGuard no_grad;
  head->weight.zero_();
  head->bias.copy_(torch::tensor({1.0f, 0.0f, 0.0f, 0.0f, 1.0f, 0.0f}));
}

torch::Tensor LocalizerImpl::forward(const torch::Tensor& images) {
  auto h = conv3_(conv2_(conv1_(images)));
  h = F::adaptive_avg_pool2d(h, F::AdaptiveAvgPool2dFuncOptions({kLocalizerPool, kLocalizerPool}));
  h = torch::relu(fc_norm_(fc_(h.flatten(1))));
  return head(h).view({-1, 2, 3});
}

DecryptNetImpl::DecryptNetImpl(const DecoderOptions& o) {
  const auto b = o.base_channels;
  const std::int64_t widths[7] = {b, b, 2 * b, 2 * b, 2 * b, 4 * b, 4 * b};
  std::int64_t in = 3;
  std::int64_t h = o.image.height, w = o.image.width;
  for (int i = 0; i < 7; ++i) {
    const std::int64_t stride = i % 2 == 0 ? 2 : 1;
    convs_.push_back(
        register_module("conv" + std::to_string(i + 1), ConvBlock(in, widths[i], 3, stride, o.norm, o.norm_affine)));
    in = widths[i];
    if (stride == 2) {
      h = (h - 1) / 2 + 1;
      w = (w - 1) / 2 + 1;
    }
  }
  conv1 = convs_.front();
  fc1_ = register_module("fc1", torch::nn::Linear(in * h * w, kDecryptHidden));
  fc1_norm_ = register_module("fc1_norm", Norm(o.norm, kDecryptHidden, o.norm_affine));
  fc2_ = register_module("fc2", torch::nn::Linear(kDecryptHidden, o.n_bits));
  const auto logit_mode = o.norm_before_sigmoid ? o.norm : NormMode::none;
  logit_norm_ = register_module("logit_norm", Norm(logit_mode, o.n_bits, /*affine=*/true));
}

torch::Tensor DecryptNetImpl::forward(const torch::Tensor& images) {
  auto h = images;
  for (auto& c : convs_) h = c(h);
  h = torch::relu(fc1_norm_(fc1_(h.flatten(1))));
  return logit_norm_(fc2_(h));
}

DecoderImpl::DecoderImpl(const DecoderOptions& options) : options_(options) {
  if (options_.n_bits < 1) throw std::invalid_argument("decoder needs n_bits >= 1");
  stn = register_module("stn", Localizer(options_.base_channels, options_.norm, options_.norm_affine));
  decrypt = register_module("decrypt", DecryptNet(options_));
}

torch::Tensor affine_resample(const torch::Tensor& images, const torch::Tensor& theta) {
  auto grid = F::affine_grid(theta.to(images.scalar_type()), images.sizes(), /*align_corners=*/false);
  return F::grid_sample(images, grid,
                        F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(
                            false));
}

torch::Tensor DecoderImpl::predict_affine(const torch::Tensor& images) { return stn(images); }

torch::Tensor DecoderImpl::stn_rectify(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(2) != options_.image.height || images.size(3) != options_.image.width) {
    throw std::invalid_argument("decoder: image does not match the configured size");
  }
  return affine_resample(images, predict_affine(images));
}

torch::Tensor DecoderImpl::decode(const torch::Tensor& images) { return decrypt(stn_rectify(images)); }

torch::Tensor logits_to_bit_tensor(const torch::Tensor& logits) {
  if (torch::isnan(logits).any().item<bool>()) throw std::invalid_argument("NaN logit");
  return (logits >= 0).to(torch::kFloat32);
}

Message logits_to_bits(const torch::Tensor& logits) {
  TORCH_CHECK(logits.dim() == 1, "logits_to_bits expects a 1-D tensor");
  return Message::from_tensor(logits_to_bit_tensor(logits.detach()));
}

}  // namespace stegamark
