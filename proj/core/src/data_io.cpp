#include "stegamark/data_io.hpp"

#include <algorithm>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "stegamark/log.hpp"

namespace stegamark {

namespace fs = std::filesystem;

Message::Message(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_) {
    if (b > 1) throw std::invalid_argument("Message bits must be 0 or 1");
  }
}

Message Message::from_string(std::string_view text) {
  std::vector<std::uint8_t> bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1') {
      throw std::invalid_argument("message string may only contain '0' and '1'");
    }
    bits.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return Message(std::move(bits));
}

Message Message::from_tensor(const torch::Tensor& bits) {
  TORCH_CHECK(bits.dim() == 1, "Message::from_tensor expects a 1-D tensor");
  auto flat = (bits.to(torch::kCPU, torch::kFloat64) >= 0.5).to(torch::kUInt8).contiguous();
  const auto* p = flat.data_ptr<std::uint8_t>();
  return Message(std::vector<std::uint8_t>(p, p + flat.numel()));
}

Message Message::complement() const {
  std::vector<std::uint8_t> out(bits_.size());
  std::transform(bits_.begin(), bits_.end(), out.begin(), [](auto b) { return static_cast<std::uint8_t>(1 - b); });
  return Message(std::move(out));
}

std::string Message::to_string() const {
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
  return s;
}

torch::Tensor Message::to_tensor() const {
  auto t = torch::empty({static_cast<std::int64_t>(bits_.size())}, torch::kFloat32);
  auto* p = t.data_ptr<float>();
  for (std::size_t i = 0; i < bits_.size(); ++i) p[i] = bits_[i];
  return t;
}

ImageBuffer::ImageBuffer(torch::Tensor chw) {
  if (chw.dim() != 3 || chw.size(0) != 3) {
    throw std::invalid_argument("ImageBuffer expects a [3,H,W] tensor");
  }
  if (chw.size(1) < kMinSide || chw.size(2) < kMinSide) {
    throw std::invalid_argument("ImageBuffer sides must be at least 16 pixels");
  }
  pixels_ = chw.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (pixels_.min().item<float>() < 0.0f || pixels_.max().item<float>() > 1.0f) {
    throw std::invalid_argument("ImageBuffer values must lie in [0,1]");
  }
}

namespace {

cv::Mat decode_rgb(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot decode image: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

ImageBuffer from_rgb8(const cv::Mat& rgb) {
  auto hwc = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8);
  return ImageBuffer(hwc.permute({2, 0, 1}).to(torch::kFloat32).div(255.0));
}

bool has_image_extension(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

ImageBuffer load_image(const fs::path& path) { return from_rgb8(decode_rgb(path)); }

ImageBuffer load_image(const fs::path& path, ImageSize target) {
  cv::Mat rgb = decode_rgb(path);
  if (rgb.rows != target.height || rgb.cols != target.width) {
    cv::Mat resized;
    cv::resize(rgb, resized, cv::Size(static_cast<int>(target.width), static_cast<int>(target.height)), 0, 0,
               cv::INTER_LINEAR);
    rgb = resized;
  }
  return from_rgb8(rgb);
}

Dataset load_image_dir(const fs::path& dir, ImageSize target) {
  if (!fs::is_directory(dir)) throw std::runtime_error("image directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Dataset ds;
  ds.target_size = target;
  for (const auto& f : files) {
    if (!has_image_extension(f)) continue;
    try {
      ds.items.push_back(load_image(f, target));
      ds.names.push_back(f.filename().string());
    } catch (const std::exception& e) {
      log::warn("skipping " + f.string() + ": " + e.what());
    }
  }
  if (ds.items.empty()) throw std::runtime_error("no decodable images in " + dir.string());
  return ds;
}

torch::Tensor quantize_8bit(const torch::Tensor& image) {
  return torch::floor(image.detach().to(torch::kFloat32).clamp(0.0, 1.0) * 255.0 + 0.5).div(255.0);
}

void save_png(const torch::Tensor& image, const fs::path& path) {
  auto chw = image.dim() == 4 ? image.squeeze(0) : image;
  TORCH_CHECK(chw.dim() == 3 && chw.size(0) == 3, "save_png expects [3,H,W]");
  auto hwc = torch::floor(chw.detach().to(torch::kCPU, torch::kFloat32).clamp(0.0, 1.0) * 255.0 + 0.5)
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .contiguous();
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3, hwc.data_ptr<std::uint8_t>());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("failed to write " + path.string());
}

Message random_message(std::size_t n_bits, Rng& rng) {
  if (n_bits == 0) throw std::invalid_argument("n_bits must be at least 1");
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<std::uint8_t> bits(n_bits);
  for (auto& b : bits) b = static_cast<std::uint8_t>(coin(rng));
  return Message(std::move(bits));
}

Batch sample_batch(const Dataset& dataset, std::size_t batch_size, std::size_t n_bits, Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  if (dataset.items.empty()) throw std::invalid_argument("cannot sample from an empty dataset");
  std::uniform_int_distribution<std::size_t> pick(0, dataset.items.size() - 1);
  std::vector<torch::Tensor> images;
  std::vector<torch::Tensor> messages;
  images.reserve(batch_size);
  messages.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    images.push_back(dataset.items[pick(rng)].tensor());
    messages.push_back(random_message(n_bits, rng).to_tensor());
  }
  return {torch::stack(images), torch::stack(messages)};
}

double bit_accuracy(const Message& a, const Message& b) {
  if (a.size() != b.size()) throw std::invalid_argument("bit_accuracy: length mismatch");
  if (a.size() == 0) throw std::invalid_argument("bit_accuracy: empty messages");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

double bit_accuracy(const torch::Tensor& predicted_bits, const torch::Tensor& target_bits) {
  if (!predicted_bits.sizes().equals(target_bits.sizes())) {
    throw std::invalid_argument("bit_accuracy: shape mismatch");
  }
  return (predicted_bits.round() == target_bits.round()).to(torch::kFloat64).mean().item<double>();
}

}  // namespace stegamark
