#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace stegamark {

/// Every random draw in the library goes through an explicit engine of this type.
using Rng = std::mt19937_64;

struct ImageSize {
  std::int64_t height = 0;
  std::int64_t width = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Fixed-length payload of 0/1 bits.
class Message {
 public:
  Message() = default;
  explicit Message(std::vector<std::uint8_t> bits);

  /// Parses an ASCII string of '0'/'1' characters.
  static Message from_string(std::string_view text);
  /// Thresholds a 1-D tensor at 0.5.
  static Message from_tensor(const torch::Tensor& bits);

  std::size_t size() const { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  Message complement() const;
  std::string to_string() const;
  /// Float32 tensor of shape [n_bits] holding 0.0/1.0.
  torch::Tensor to_tensor() const;

  friend bool operator==(const Message&, const Message&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Single RGB image with values in [0,1]; stored channel-major as a float32 [3,H,W] tensor.
class ImageBuffer {
 public:
  static constexpr std::int64_t kMinSide = 16;

  ImageBuffer() = default;
  /// Validates shape, minimum size and range; the tensor is converted to contiguous float32.
  explicit ImageBuffer(torch::Tensor chw);

  std::int64_t height() const { return pixels_.size(1); }
  std::int64_t width() const { return pixels_.size(2); }
  ImageSize size() const { return {height(), width()}; }
  const torch::Tensor& tensor() const { return pixels_; }

 private:
  torch::Tensor pixels_;
};

struct Dataset {
  std::vector<ImageBuffer> items;
  /// File name (without directory) of each item, in load order.
  std::vector<std::string> names;
  ImageSize target_size;

  std::size_t size() const { return items.size(); }
};

struct Batch {
  torch::Tensor images;    // [B,3,H,W]
  torch::Tensor messages;  // [B,n_bits], values 0/1

  std::int64_t size() const { return images.size(0); }
};

/// Decodes one PNG/JPEG file; throws std::runtime_error if it cannot be decoded.
ImageBuffer load_image(const std::filesystem::path& path);
/// Decodes and bilinearly resizes to `target`.
ImageBuffer load_image(const std::filesystem::path& path, ImageSize target);

/// Loads every decodable image in `dir` (sorted by file name), resized to `target`.
/// Undecodable files are skipped with a warning; an empty result throws.
Dataset load_image_dir(const std::filesystem::path& dir, ImageSize target);

/// Clamps to [0,1] and quantizes to 8 bits with round-half-up.
torch::Tensor quantize_8bit(const torch::Tensor& image);
/// Writes an 8-bit PNG. Accepts [3,H,W] or [1,3,H,W].
void save_png(const torch::Tensor& image, const std::filesystem::path& path);

Message random_message(std::size_t n_bits, Rng& rng);

/// Draws `batch_size` images uniformly with replacement, each with a fresh message.
Batch sample_batch(const Dataset& dataset, std::size_t batch_size, std::size_t n_bits, Rng& rng);

/// Fraction of matching positions.
double bit_accuracy(const Message& a, const Message& b);
/// Per-row bit accuracy between two [B,n] 0/1 tensors, averaged over the batch.
double bit_accuracy(const torch::Tensor& predicted_bits, const torch::Tensor& target_bits);

}  // namespace stegamark
