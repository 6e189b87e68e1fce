#include "stegamark/robustness_eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "stegamark/decoder.hpp"
#include "stegamark/log.hpp"
#include "stegamark/perturbation.hpp"

namespace stegamark {

namespace fs = std::filesystem;

namespace {

void check_width(const torch::Tensor& img, std::int64_t width) {
  TORCH_CHECK(img.dim() == 4 && img.size(1) == 3, "expected [N,3,H,W] image tensor");
  if (width < 0 || 2 * width >= std::min(img.size(2), img.size(3))) {
    throw std::invalid_argument("edge width " + std::to_string(width) + " is too large for the image");
  }
}

}  // namespace

torch::Tensor center_crop_resize(const torch::Tensor& img, std::int64_t width) {
  check_width(img, width);
  if (width == 0) return img;
  const ImageSize size{img.size(2), img.size(3)};
  return crop_resize(img, CropRect{width, width, size.width - 2 * width, size.height - 2 * width}, size);
}

torch::Tensor add_frame(const torch::Tensor& img, std::int64_t width) {
  check_width(img, width);
  if (width == 0) return img;
  auto out = img.clone();
  const auto h = img.size(2);
  const auto w = img.size(3);
  out.slice(2, 0, width).zero_();
  out.slice(2, h - width, h).zero_();
  out.slice(3, 0, width).zero_();
  out.slice(3, w - width, w).zero_();
  return out;
}

torch::Tensor grayscale(const torch::Tensor& img) { return luma(img).expand_as(img).contiguous(); }

torch::Tensor one_bit_dither(const torch::Tensor& img) {
  auto gray = luma(img).detach().to(torch::kCPU, torch::kFloat64).contiguous();
  const auto n = gray.size(0);
  const auto h = gray.size(2);
  const auto w = gray.size(3);
  auto out = torch::zeros_like(gray);
  for (std::int64_t b = 0; b < n; ++b) {
    auto work = gray[b][0].clone();
    auto px = work.accessor<double, 2>();
    auto dst = out[b][0];
    auto o = dst.accessor<double, 2>();
    for (std::int64_t y = 0; y < h; ++y) {
      const bool forward = y % 2 == 0;
      const std::int64_t dir = forward ? 1 : -1;
      for (std::int64_t i = 0; i < w; ++i) {
        const auto x = forward ? i : w - 1 - i;
        const double v = px[y][x];
        const double q = v >= 0.5 ? 1.0 : 0.0;
        o[y][x] = q;
        const double err = v - q;
        const auto xn = x + dir;
        const auto xp = x - dir;
        if (xn >= 0 && xn < w) px[y][xn] += err * 7.0 / 16.0;
        if (y + 1 < h) {
          if (xp >= 0 && xp < w) px[y + 1][xp] += err * 3.0 / 16.0;
          px[y + 1][x] += err * 5.0 / 16.0;
          if (xn >= 0 && xn < w) px[y + 1][xn] += err * 1.0 / 16.0;
        }
      }
    }
  }
  return out.expand({n, 3, h, w}).to(img.options()).contiguous();
}

torch::Tensor hist_equalize(const torch::Tensor& img) {
  auto levels = torch::round(img.detach().to(torch::kCPU, torch::kFloat64).clamp(0.0, 1.0) * 255.0)
                    .to(torch::kInt64)
                    .contiguous();
  auto out = torch::empty(levels.sizes(), torch::kFloat64);
  const auto n = levels.size(0);
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t c = 0; c < 3; ++c) {
      auto channel = levels[b][c].flatten();
      auto hist = torch::bincount(channel, {}, 256);
      auto cdf = hist.cumsum(0);
      const auto total = channel.numel();
      const auto cdf_min = cdf.index({hist > 0}).min().item<std::int64_t>();
      torch::Tensor mapped;
      if (total == cdf_min) {
        mapped = channel.to(torch::kFloat64) / 255.0;
      } else {
        auto lut = torch::round((cdf - cdf_min).to(torch::kFloat64) / static_cast<double>(total - cdf_min) * 255.0)
                       .clamp(0.0, 255.0) /
                   255.0;
        mapped = lut.index_select(0, channel);
      }
      out[b][c].copy_(mapped.view({levels.size(2), levels.size(3)}));
    }
  }
  return out.to(img.options());
}

torch::Tensor edge_enhance(const torch::Tensor& img) {
  return torch::clamp(img + 0.5 * (img - defocus_blur(img, 1.0)), 0.0, 1.0);
}

std::string_view to_string(EditKind kind) {
  switch (kind) {
    case EditKind::brightness: return "brightness";
    case EditKind::contrast: return "contrast";
    case EditKind::saturation: return "saturation";
    case EditKind::grayscale: return "grayscale";
    case EditKind::one_bit: return "one_bit";
    case EditKind::hist_equalize: return "hist_equalize";
    case EditKind::edge_enhance: return "edge_enhance";
    case EditKind::center_crop: return "center_crop";
    case EditKind::frame: return "frame";
    case EditKind::external_dir: return "external_dir";
  }
  return "unknown";
}

EditKind parse_edit_kind(std::string_view text) {
  for (auto k : {EditKind::brightness, EditKind::contrast, EditKind::saturation, EditKind::grayscale,
                 EditKind::one_bit, EditKind::hist_equalize, EditKind::edge_enhance, EditKind::center_crop,
                 EditKind::frame, EditKind::external_dir}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown edit kind: " + std::string(text));
}

bool is_parametric(EditKind kind) {
  switch (kind) {
    case EditKind::brightness:
    case EditKind::contrast:
    case EditKind::saturation:
    case EditKind::center_crop:
    case EditKind::frame:
      return true;
    default:
      return false;
  }
}

torch::Tensor apply_edit(const torch::Tensor& img, EditKind kind, double level) {
  switch (kind) {
    case EditKind::brightness: return brightness(img, level);
    case EditKind::contrast: return contrast(img, level);
    case EditKind::saturation: return saturation(img, level);
    case EditKind::grayscale: return grayscale(img);
    case EditKind::one_bit: return one_bit_dither(img);
    case EditKind::hist_equalize: return hist_equalize(img);
    case EditKind::edge_enhance: return edge_enhance(img);
    case EditKind::center_crop: return center_crop_resize(img, std::llround(level));
    case EditKind::frame: return add_frame(img, std::llround(level));
    case EditKind::external_dir: break;
  }
  throw std::invalid_argument("external_dir edits are read from disk, not applied");
}

namespace {

double percentile(std::vector<double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::int64_t image_count(const Dataset& dataset, const EvalOptions& options) {
  const auto n = static_cast<std::int64_t>(dataset.size());
  if (n == 0) throw std::invalid_argument("evaluation dataset is empty");
  return options.max_images > 0 ? std::min(n, options.max_images) : n;
}

std::vector<Message> draw_messages(std::int64_t count, std::int64_t n_bits, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Message> out;
  out.reserve(count);
  for (std::int64_t i = 0; i < count; ++i) out.push_back(random_message(static_cast<std::size_t>(n_bits), rng));
  return out;
}

void check_dataset(const WatermarkModel& model, const Dataset& dataset) {
  if (dataset.target_size != model->config().image) {
    throw std::invalid_argument("dataset image size does not match the model");
  }
}

/// Per-image accuracy of decoding `images` against rows of `messages`.
std::vector<double> decode_accuracies(WatermarkModel& model, const torch::Tensor& images, const torch::Tensor& messages) {
  auto bits = logits_to_bit_tensor(model->decode(images));
  auto per_image = (bits == messages).to(torch::kFloat64).mean(1).contiguous();
  const auto* p = per_image.data_ptr<double>();
  return std::vector<double>(p, p + per_image.numel());
}

/// Encodes the dataset chunk by chunk and hands (encoded 8-bit images, messages, first index) to `visit`.
void for_each_encoded_chunk(WatermarkModel& model, const Dataset& dataset, const EvalOptions& options,
                            const std::function<void(const torch::Tensor&, const torch::Tensor&, std::int64_t)>& visit) {
  check_dataset(model, dataset);
  if (options.batch_size < 1) throw std::invalid_argument("eval batch size must be >= 1");
  const auto count = image_count(dataset, options);
  const auto messages = draw_messages(count, model->config().n_bits, options.seed);
  model->eval();
  torch::NoGradGuard no_grad;
  for (std::int64_t start = 0; start < count; start += options.batch_size) {
    const auto end = std::min(count, start + options.batch_size);
    std::vector<torch::Tensor> imgs, msgs;
    for (auto i = start; i < end; ++i) {
      imgs.push_back(dataset.items[i].tensor());
      msgs.push_back(messages[i].to_tensor());
    }
    auto images = torch::stack(imgs);
    auto message_batch = torch::stack(msgs);
    auto encoded = quantize_8bit(model->encode(images, message_batch).encoded);
    visit(encoded, message_batch, start);
  }
}

}  // namespace

SweepRow summarize(std::string kind, double level, const std::vector<double>& accuracies) {
  if (accuracies.empty()) throw std::invalid_argument("cannot summarize zero accuracies");
  std::vector<double> sorted = accuracies;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double a : accuracies) sum += a;
  return {std::move(kind),
          level,
          sum / static_cast<double>(accuracies.size()),
          percentile(sorted, 0.1),
          percentile(sorted, 0.5),
          percentile(sorted, 0.9),
          static_cast<std::int64_t>(accuracies.size())};
}

namespace {

struct EditSpec {
  EditKind kind;
  double level;
};

SweepTable run_edits(WatermarkModel& model, const Dataset& dataset, const std::vector<EditSpec>& edits,
                     const EvalOptions& options, std::string name) {
  std::vector<std::vector<double>> acc(edits.size());
  for_each_encoded_chunk(model, dataset, options,
                         [&](const torch::Tensor& encoded, const torch::Tensor& messages, std::int64_t) {
                           for (std::size_t e = 0; e < edits.size(); ++e) {
                             auto edited = apply_edit(encoded, edits[e].kind, edits[e].level);
                             auto a = decode_accuracies(model, edited, messages);
                             acc[e].insert(acc[e].end(), a.begin(), a.end());
                           }
                         });
  SweepTable table{std::move(name), {}};
  for (std::size_t e = 0; e < edits.size(); ++e) {
    table.rows.push_back(summarize(std::string(to_string(edits[e].kind)), edits[e].level, acc[e]));
  }
  return table;
}

}  // namespace

SweepTable evaluate_sweep(WatermarkModel& model, const Dataset& dataset, EditKind kind, const std::vector<double>& levels,
                          const EvalOptions& options) {
  if (kind == EditKind::external_dir) throw std::invalid_argument("use evaluate_external for external_dir edits");
  std::vector<EditSpec> edits;
  if (is_parametric(kind)) {
    if (levels.empty()) throw std::invalid_argument("a parametric sweep needs at least one level");
    for (double l : levels) edits.push_back({kind, l});
  } else {
    edits.push_back({kind, 1.0});
  }
  return run_edits(model, dataset, edits, options, std::string(to_string(kind)));
}

SweepTable crop_frame_experiment(WatermarkModel& model, const Dataset& dataset, const std::vector<std::int64_t>& widths,
                                 const EvalOptions& options) {
  if (widths.empty()) throw std::invalid_argument("crop/frame experiment needs at least one width");
  const auto side = std::min(model->config().image.height, model->config().image.width);
  std::vector<EditSpec> edits;
  for (auto w : widths) {
    if (w < 0 || 2 * w >= side) throw std::invalid_argument("width " + std::to_string(w) + " is too large");
    edits.push_back({EditKind::center_crop, static_cast<double>(w)});
  }
  for (auto w : widths) edits.push_back({EditKind::frame, static_cast<double>(w)});
  return run_edits(model, dataset, edits, options, "crop_frame");
}

std::vector<Message> export_encoded(WatermarkModel& model, const Dataset& dataset, const fs::path& out_dir,
                                    const EvalOptions& options) {
  fs::create_directories(out_dir);
  std::vector<Message> messages;
  for_each_encoded_chunk(model, dataset, options,
                         [&](const torch::Tensor& encoded, const torch::Tensor& msgs, std::int64_t start) {
                           for (std::int64_t i = 0; i < encoded.size(0); ++i) {
                             auto name = fs::path(dataset.names[start + i]).replace_extension(".png");
                             save_png(encoded[i], out_dir / name);
                             messages.push_back(Message::from_tensor(msgs[i]));
                           }
                         });
  return messages;
}

SweepTable evaluate_external(WatermarkModel& model, const Dataset& dataset, const fs::path& edited_dir,
                             const EvalOptions& options) {
  check_dataset(model, dataset);
  const auto count = image_count(dataset, options);
  const auto messages = draw_messages(count, model->config().n_bits, options.seed);
  const auto size = model->config().image;
  model->eval();
  torch::NoGradGuard no_grad;
  std::vector<double> acc;
  for (std::int64_t i = 0; i < count; ++i) {
    auto path = edited_dir / fs::path(dataset.names[i]).replace_extension(".png");
    if (!fs::exists(path)) {
      log::warn("no edited counterpart for " + dataset.names[i]);
      continue;
    }
    auto img = load_image(path);
    if (img.size() != size) {
      log::warn(path.string() + " does not match the model size; resizing");
      img = load_image(path, size);
    }
    auto a = decode_accuracies(model, img.tensor().unsqueeze(0), messages[i].to_tensor().unsqueeze(0));
    acc.push_back(a.front());
  }
  if (acc.empty()) throw std::runtime_error("no edited images found in " + edited_dir.string());
  return SweepTable{"external_dir", {summarize("external_dir", 1.0, acc)}};
}

}  // namespace stegamark
