#include "stegamark/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <ATen/CPUGeneratorImpl.h>

namespace stegamark {

namespace F = torch::nn::functional;

namespace {

void require_factor(double f, const char* what) {
  if (!(f >= 0.0)) throw std::invalid_argument(std::string(what) + " factor must be >= 0");
}

double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

torch::Tensor channel_vector(const torch::Tensor& like, const std::array<double, 3>& v) {
  return torch::tensor({v[0], v[1], v[2]}, like.options()).view({1, 3, 1, 1});
}

}  // namespace

torch::Tensor luma(const torch::Tensor& img) {
  TORCH_CHECK(img.dim() == 4 && img.size(1) == 3, "expected [N,3,H,W] image tensor");
  auto w = channel_vector(img, {0.299, 0.587, 0.114});
  return (img * w).sum(1, /*keepdim=*/true);
}

torch::Tensor brightness(const torch::Tensor& img, double factor) {
  require_factor(factor, "brightness");
  return torch::clamp(img * factor, 0.0, 1.0);
}

torch::Tensor contrast(const torch::Tensor& img, double factor) {
  require_factor(factor, "contrast");
  auto mean = luma(img).mean({1, 2, 3}, /*keepdim=*/true);
  return torch::clamp(mean + factor * (img - mean), 0.0, 1.0);
}

torch::Tensor saturation(const torch::Tensor& img, double factor) {
  require_factor(factor, "saturation");
  auto gray = luma(img);
  return torch::clamp(gray + factor * (img - gray), 0.0, 1.0);
}

torch::Tensor rgb_offset(const torch::Tensor& img, const std::array<double, 3>& offset) {
  for (double o : offset) {
    if (std::abs(o) > 1.0) throw std::invalid_argument("rgb offsets must lie in [-1,1]");
  }
  return torch::clamp(img + channel_vector(img, offset), 0.0, 1.0);
}

torch::Tensor gaussian_noise(const torch::Tensor& img, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma == 0.0) return img;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  auto noise = torch::randn(img.sizes(), gen, img.options().requires_grad(false)) * sigma;
  return torch::clamp(img + noise, 0.0, 1.0);
}

torch::Tensor gaussian_noise(const torch::Tensor& img, double sigma, Rng& rng) {
  return gaussian_noise(img, sigma, static_cast<std::uint64_t>(rng()));
}

torch::Tensor gaussian_kernel(double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("defocus sigma must be >= 0");
  if (sigma == 0.0) return torch::ones({1, 1}, torch::kFloat64);
  const auto radius = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
  auto x = torch::arange(-radius, radius + 1, torch::kFloat64);
  auto g = torch::exp(-(x * x) / (2.0 * sigma * sigma));
  g = g / g.sum();
  return torch::outer(g, g);
}

torch::Tensor motion_kernel(double length, double angle) {
  if (length < 1.0) throw std::invalid_argument("motion blur length must be >= 1");
  const auto samples = std::max<std::int64_t>(1, std::llround(length));
  const double half = (length - 1.0) / 2.0;
  const auto radius = static_cast<std::int64_t>(std::ceil(half)) + 1;
  const auto size = 2 * radius + 1;
  auto kernel = torch::zeros({size, size}, torch::kFloat64);
  auto k = kernel.accessor<double, 2>();
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::int64_t i = 0; i < samples; ++i) {
    const double t = samples == 1 ? 0.0 : -half + (length - 1.0) * static_cast<double>(i) / (samples - 1);
    const double px = t * c + static_cast<double>(radius);
    const double py = t * s + static_cast<double>(radius);
    const double x0 = std::floor(px);
    const double y0 = std::floor(py);
    const double fx = px - x0;
    const double fy = py - y0;
    const auto ix = static_cast<std::int64_t>(x0);
    const auto iy = static_cast<std::int64_t>(y0);
    k[iy][ix] += (1 - fx) * (1 - fy);
    if (fx > 0) k[iy][ix + 1] += fx * (1 - fy);
    if (fy > 0) k[iy + 1][ix] += (1 - fx) * fy;
    if (fx > 0 && fy > 0) k[iy + 1][ix + 1] += fx * fy;
  }
  return kernel / kernel.sum();
}

torch::Tensor filter2d(const torch::Tensor& img, const torch::Tensor& kernel) {
  TORCH_CHECK(kernel.dim() == 2 && kernel.size(0) == kernel.size(1) && kernel.size(0) % 2 == 1,
              "filter2d expects an odd square kernel");
  if (kernel.size(0) == 1) return img * kernel.item<double>();
  const auto r = kernel.size(0) / 2;
  const auto c = img.size(1);
  auto weight = kernel.to(img.options().requires_grad(false)).expand({c, 1, kernel.size(0), kernel.size(1)});
  auto padded = F::pad(img, F::PadFuncOptions({r, r, r, r}).mode(torch::kReflect));
  return F::conv2d(padded, weight.contiguous(), F::Conv2dFuncOptions().groups(c));
}

torch::Tensor defocus_blur(const torch::Tensor& img, double sigma) {
  if (sigma == 0.0) return img;
  return filter2d(img, gaussian_kernel(sigma));
}

torch::Tensor motion_blur(const torch::Tensor& img, double length, double angle) {
  if (length == 1.0) {
    return img;
  }
  return filter2d(img, motion_kernel(length, angle));
}

Homography fit_homography(const std::array<Point2, 4>& from, const std::array<Point2, 4>& to) {
  auto a = torch::zeros({8, 8}, torch::kFloat64);
  auto b = torch::zeros({8}, torch::kFloat64);
  auto A = a.accessor<double, 2>();
  auto B = b.accessor<double, 1>();
  for (int i = 0; i < 4; ++i) {
    const double x = from[i].x, y = from[i].y, u = to[i].x, v = to[i].y;
    const double r0[8] = {x, y, 1, 0, 0, 0, -u * x, -u * y};
    const double r1[8] = {0, 0, 0, x, y, 1, -v * x, -v * y};
    for (int j = 0; j < 8; ++j) {
      A[2 * i][j] = r0[j];
      A[2 * i + 1][j] = r1[j];
    }
    B[2 * i] = u;
    B[2 * i + 1] = v;
  }
  if (std::abs(torch::linalg_det(a).item<double>()) < 1e-12) {
    throw std::runtime_error("degenerate corner correspondence");
  }
  auto h = torch::linalg_solve(a, b);
  Homography out{};
  for (int i = 0; i < 8; ++i) out[i] = h[i].item<double>();
  out[8] = 1.0;
  return out;
}

Homography invert_homography(const Homography& h) {
  auto m = torch::tensor(std::vector<double>(h.begin(), h.end()), torch::kFloat64).view({3, 3});
  if (std::abs(torch::linalg_det(m).item<double>()) < 1e-12) throw std::runtime_error("homography is singular");
  auto inv = torch::linalg_inv(m);
  inv = inv / inv[2][2];
  Homography out{};
  auto flat = inv.flatten();
  for (int i = 0; i < 9; ++i) out[i] = flat[i].item<double>();
  return out;
}

torch::Tensor warp_homography(const torch::Tensor& img, const Homography& h) {
  const auto n = img.size(0);
  const auto height = img.size(2);
  const auto width = img.size(3);
  const auto inv = invert_homography(h);
  auto ys = torch::arange(height, torch::kFloat64).view({height, 1}).expand({height, width});
  auto xs = torch::arange(width, torch::kFloat64).view({1, width}).expand({height, width});
  auto w = inv[6] * xs + inv[7] * ys + inv[8];
  auto sx = (inv[0] * xs + inv[1] * ys + inv[2]) / w;
  auto sy = (inv[3] * xs + inv[4] * ys + inv[5]) / w;
  auto gx = sx * (2.0 / static_cast<double>(width - 1)) - 1.0;
  auto gy = sy * (2.0 / static_cast<double>(height - 1)) - 1.0;
  auto grid = torch::stack({gx, gy}, -1).unsqueeze(0).expand({n, height, width, 2}).to(img.scalar_type());
  return F::grid_sample(img, grid,
                        F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(
                            true));
}

Homography corner_homography(ImageSize size, const std::array<double, 8>& offsets) {
  const double w = static_cast<double>(size.width - 1);
  const double h = static_cast<double>(size.height - 1);
  const std::array<Point2, 4> from{{{0, 0}, {w, 0}, {w, h}, {0, h}}};
  std::array<Point2, 4> to{};
  for (int i = 0; i < 4; ++i) to[i] = {from[i].x + offsets[2 * i], from[i].y + offsets[2 * i + 1]};
  return fit_homography(from, to);
}

namespace {

bool convex_quad(ImageSize size, const std::array<double, 8>& offsets) {
  const double w = static_cast<double>(size.width - 1);
  const double h = static_cast<double>(size.height - 1);
  const double base[8] = {0, 0, w, 0, w, h, 0, h};
  double sign = 0.0;
  for (int i = 0; i < 4; ++i) {
    const int j = (i + 1) % 4, k = (i + 2) % 4;
    const double ax = base[2 * j] + offsets[2 * j] - base[2 * i] - offsets[2 * i];
    const double ay = base[2 * j + 1] + offsets[2 * j + 1] - base[2 * i + 1] - offsets[2 * i + 1];
    const double bx = base[2 * k] + offsets[2 * k] - base[2 * j] - offsets[2 * j];
    const double by = base[2 * k + 1] + offsets[2 * k + 1] - base[2 * j + 1] - offsets[2 * j + 1];
    const double cross = ax * by - ay * bx;
    if (cross == 0.0 || (sign != 0.0 && (cross > 0) != (sign > 0))) return false;
    sign = cross;
  }
  return true;
}

std::array<double, 8> draw_corner_offsets(ImageSize size, double max_shift, Rng& rng) {
  std::array<double, 8> offsets{};
  if (max_shift == 0.0) return offsets;
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (auto& o : offsets) o = uniform(rng, -max_shift, max_shift);
    if (convex_quad(size, offsets)) return offsets;
  }
  throw std::runtime_error("could not draw a non-degenerate perspective warp");
}

void check_shift(ImageSize size, double max_shift) {
  if (max_shift < 0.0 || max_shift >= static_cast<double>(std::min(size.height, size.width)) / 4.0) {
    throw std::invalid_argument("max corner shift must lie in [0, min(H,W)/4)");
  }
}

ImageSize image_size(const torch::Tensor& img) { return {img.size(2), img.size(3)}; }

}  // namespace

WarpResult perspective_warp(const torch::Tensor& img, double max_shift, Rng& rng) {
  const auto size = image_size(img);
  check_shift(size, max_shift);
  if (max_shift == 0.0) return {img, Homography{1, 0, 0, 0, 1, 0, 0, 0, 1}};
  const auto offsets = draw_corner_offsets(size, max_shift, rng);
  const auto h = corner_homography(size, offsets);
  return {warp_homography(img, h), h};
}

CropRect sample_crop_rect(ImageSize size, Range area, Range ratio, Rng& rng) {
  if (!area.valid() || area.min <= 0.0 || area.max > 1.0) {
    throw std::invalid_argument("crop area range must satisfy 0 < min <= max <= 1");
  }
  if (!ratio.valid() || ratio.min <= 0.0) throw std::invalid_argument("crop ratio range must satisfy 0 < min <= max");
  const double total = static_cast<double>(size.height * size.width);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double a = uniform(rng, area.min, area.max);
    const double r = std::exp(uniform(rng, std::log(ratio.min), std::log(ratio.max)));
    const auto w = std::llround(std::sqrt(a * total * r));
    const auto h = std::llround(std::sqrt(a * total / r));
    if (w < 1 || h < 1 || w > size.width || h > size.height) continue;
    std::uniform_int_distribution<std::int64_t> px(0, size.width - w);
    std::uniform_int_distribution<std::int64_t> py(0, size.height - h);
    const auto x = px(rng);
    const auto y = py(rng);
    return {x, y, w, h};
  }
  // Largest centred rectangle whose aspect lies in the ratio range.
  const double aspect = static_cast<double>(size.width) / static_cast<double>(size.height);
  std::int64_t w = size.width, h = size.height;
  if (aspect < ratio.min) {
    h = std::llround(static_cast<double>(w) / ratio.min);
  } else if (aspect > ratio.max) {
    w = std::llround(static_cast<double>(h) * ratio.max);
  }
  const double frac = static_cast<double>(w * h) / total;
  const double slack = (static_cast<double>(w + h) + 1.0) / total;  // one pixel of rounding on each side
  if (frac < area.min - slack || frac > area.max + slack) {
    throw std::runtime_error("crop area and aspect ranges cannot be satisfied for this image size");
  }
  return {(size.width - w) / 2, (size.height - h) / 2, w, h};
}

torch::Tensor crop_resize(const torch::Tensor& img, const CropRect& rect, ImageSize out) {
  const auto size = image_size(img);
  if (rect.x < 0 || rect.y < 0 || rect.width < 1 || rect.height < 1 || rect.x + rect.width > size.width ||
      rect.y + rect.height > size.height) {
    throw std::invalid_argument("crop rectangle lies outside the image");
  }
  auto cropped = img.slice(2, rect.y, rect.y + rect.height).slice(3, rect.x, rect.x + rect.width);
  if (rect.height == out.height && rect.width == out.width) return cropped;
  return F::interpolate(cropped, F::InterpolateFuncOptions()
                                     .size(std::vector<std::int64_t>{out.height, out.width})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
}

CropResult random_crop_resize(const torch::Tensor& img, Range area, Range ratio, ImageSize out, Rng& rng) {
  const auto rect = sample_crop_rect(image_size(img), area, ratio, rng);
  return {crop_resize(img, rect, out), rect};
}

double strength_schedule(std::int64_t step, std::int64_t ramp_steps) {
  if (step < 0) throw std::invalid_argument("step must be >= 0");
  if (ramp_steps < 1) throw std::invalid_argument("ramp_steps must be >= 1");
  return std::min(static_cast<double>(step) / static_cast<double>(ramp_steps), 1.0);
}

void PerturbConfig::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string("perturb.") + name + " must be >= 0");
  };
  nonneg(max_corner_shift, "max_corner_shift");
  if (!(blur_kernel >= 1.0)) throw std::invalid_argument("perturb.blur_kernel must be >= 1");
  nonneg(defocus_sigma_max, "defocus_sigma_max");
  nonneg(brightness_delta, "brightness_delta");
  nonneg(contrast_delta, "contrast_delta");
  nonneg(saturation_delta, "saturation_delta");
  nonneg(noise_sigma_max, "noise_sigma_max");
  if (!(rgb_offset_max >= 0.0 && rgb_offset_max <= 1.0)) {
    throw std::invalid_argument("perturb.rgb_offset_max must lie in [0,1]");
  }
  if (brightness_delta > 1.0 || contrast_delta > 1.0 || saturation_delta > 1.0) {
    throw std::invalid_argument("perturb brightness/contrast/saturation deltas must be <= 1");
  }
  if (!crop_area.valid() || crop_area.min <= 0.0 || crop_area.max > 1.0) {
    throw std::invalid_argument("perturb.crop_area must satisfy 0 < min <= max <= 1");
  }
  if (!crop_ratio.valid() || crop_ratio.min <= 0.0 || crop_ratio.min > 1.0 || crop_ratio.max < 1.0) {
    throw std::invalid_argument("perturb.crop_ratio must satisfy 0 < min <= 1 <= max");
  }
  if (ramp_steps < 1) throw std::invalid_argument("perturb.ramp_steps must be >= 1");
}

StrengthedDraw draw_perturbation(ImageSize size, double strength, const PerturbConfig& config, Rng& rng) {
  if (!(strength >= 0.0 && strength <= 1.0)) throw std::invalid_argument("strength must lie in [0,1]");
  check_shift(size, config.max_corner_shift);
  const double s = strength;
  StrengthedDraw d;
  d.corner_offsets = draw_corner_offsets(size, s * config.max_corner_shift, rng);
  d.motion = std::bernoulli_distribution(0.5)(rng);
  d.motion_length = uniform(rng, 1.0, 1.0 + s * (config.blur_kernel - 1.0));
  d.motion_angle = uniform(rng, 0.0, std::numbers::pi);
  d.defocus_sigma = uniform(rng, 0.0, s * config.defocus_sigma_max);
  for (auto& o : d.rgb_offset) o = uniform(rng, -s * config.rgb_offset_max, s * config.rgb_offset_max);
  d.brightness = uniform(rng, 1.0 - s * config.brightness_delta, 1.0 + s * config.brightness_delta);
  d.contrast = uniform(rng, 1.0 - s * config.contrast_delta, 1.0 + s * config.contrast_delta);
  d.saturation = uniform(rng, 1.0 - s * config.saturation_delta, 1.0 + s * config.saturation_delta);
  d.noise_sigma = uniform(rng, 0.0, s * config.noise_sigma_max);
  d.noise_seed = rng();
  d.crop = config.crop_enabled && s > 0.0;
  if (d.crop) {
    const Range area{1.0 - s * (1.0 - config.crop_area.min), config.crop_area.max};
    const Range ratio{1.0 - s * (1.0 - config.crop_ratio.min), 1.0 + s * (config.crop_ratio.max - 1.0)};
    d.crop_rect = sample_crop_rect(size, area, ratio, rng);
  }
  return d;
}

torch::Tensor apply_perturbation(const torch::Tensor& img, const StrengthedDraw& d) {
  const auto size = image_size(img);
  auto out = img;
  if (std::any_of(d.corner_offsets.begin(), d.corner_offsets.end(), [](double o) { return o != 0.0; })) {
    out = warp_homography(out, corner_homography(size, d.corner_offsets));
  }
  out = d.motion ? motion_blur(out, d.motion_length, d.motion_angle) : defocus_blur(out, d.defocus_sigma);
  if (std::any_of(d.rgb_offset.begin(), d.rgb_offset.end(), [](double o) { return o != 0.0; })) {
    out = rgb_offset(out, d.rgb_offset);
  }
  if (d.brightness != 1.0) out = brightness(out, d.brightness);
  if (d.contrast != 1.0) out = contrast(out, d.contrast);
  if (d.saturation != 1.0) out = saturation(out, d.saturation);
  out = gaussian_noise(out, d.noise_sigma, d.noise_seed);
  if (d.crop) out = crop_resize(out, d.crop_rect, size);
  return out;
}

torch::Tensor perturb_pipeline(const torch::Tensor& images, double strength, const PerturbConfig& config, Rng& rng) {
  TORCH_CHECK(images.dim() == 4 && images.size(1) == 3, "perturb_pipeline expects [B,3,H,W]");
  if (!config.enabled) return images;
  const auto size = image_size(images);
  std::vector<torch::Tensor> out;
  out.reserve(images.size(0));
  for (std::int64_t i = 0; i < images.size(0); ++i) {
    const auto draw = draw_perturbation(size, strength, config, rng);
    out.push_back(apply_perturbation(images.slice(0, i, i + 1), draw));
  }
  return torch::cat(out, 0);
}

}  // namespace stegamark
