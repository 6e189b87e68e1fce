#include "stegamark/model.hpp"

#include <stdexcept>

namespace stegamark {

void ModelConfig::validate() const {
  if (image.height < ImageBuffer::kMinSide || image.width < ImageBuffer::kMinSide) {
    throw std::invalid_argument("image sides must be at least 16");
  }
  if (image.height % kMessageUpsample != 0 || image.width % kMessageUpsample != 0) {
    throw std::invalid_argument("image sides must be divisible by 8");
  }
  if (n_bits < 1) throw std::invalid_argument("n_bits must be >= 1");
  if (encoder_channels < 1 || decoder_channels < 1) throw std::invalid_argument("channel widths must be >= 1");
}

WatermarkModelImpl::WatermarkModelImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  encoder = register_module(
      "encoder", Encoder(EncoderOptions{config_.n_bits, config_.image, config_.encoder_channels, config_.norm,
                                        config_.norm_affine}));
  decoder = register_module(
      "decoder", Decoder(DecoderOptions{config_.n_bits, config_.image, config_.decoder_channels, config_.norm,
                                        config_.norm_affine, config_.norm_before_decoder_sigmoid}));
  loss_weights = register_module(
      "loss_weights", AdaptiveWeights(config_.init_log_sigma_r, config_.init_log_sigma_p, config_.init_log_sigma_m));
}

EncodeResult WatermarkModelImpl::encode(const torch::Tensor& images, const torch::Tensor& messages) {
  return encoder->encode(images, messages, config_.output);
}

torch::Tensor WatermarkModelImpl::decode(const torch::Tensor& images) { return decoder->decode(images); }

const std::map<std::string, std::string>& default_probe_layers() {
  static const std::map<std::string, std::string> layers{
      {"encoder.message_fc", "encoder.message_fc.weight"},
      {"decoder.decrypt.conv1", "decoder.decrypt.conv1.conv.weight"},
  };
  return layers;
}

}  // namespace stegamark
