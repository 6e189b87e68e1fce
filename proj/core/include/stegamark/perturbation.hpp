#pragma once

#include <array>
#include <cstdint>

#include <torch/torch.h>

#include "stegamark/data_io.hpp"

// Differentiable image corruptions applied between encoder and decoder.
//
// Image arguments are [N,3,H,W] tensors (any floating dtype); scalar parameters apply to every image
// in the tensor. All ops are differentiable w.r.t. pixel values; clamps have zero gradient outside [0,1].

namespace stegamark {

struct Range {
  double min = 0.0;
  double max = 0.0;

  bool valid() const { return min <= max; }
  friend bool operator==(const Range&, const Range&) = default;
};

torch::Tensor brightness(const torch::Tensor& img, double factor);
/// Scales the deviation from each image's mean luma.
torch::Tensor contrast(const torch::Tensor& img, double factor);
/// Scales the deviation from the per-pixel luma.
torch::Tensor saturation(const torch::Tensor& img, double factor);
torch::Tensor rgb_offset(const torch::Tensor& img, const std::array<double, 3>& offset);
/// Additive N(0, sigma^2) noise; the noise is a constant w.r.t. the input.
torch::Tensor gaussian_noise(const torch::Tensor& img, double sigma, Rng& rng);
torch::Tensor gaussian_noise(const torch::Tensor& img, double sigma, std::uint64_t seed);

/// Luma 0.299 R + 0.587 G + 0.114 B, shape [N,1,H,W].
torch::Tensor luma(const torch::Tensor& img);

/// Normalized square Gaussian kernel of radius ceil(3 sigma), float64.
torch::Tensor gaussian_kernel(double sigma);
/// Normalized line kernel: `length` samples spaced along the direction `angle` (radians),
/// each splatted with bilinear weights. float64, odd square size.
torch::Tensor motion_kernel(double length, double angle);
/// Depthwise convolution with a square kernel and reflect padding.
torch::Tensor filter2d(const torch::Tensor& img, const torch::Tensor& kernel);
torch::Tensor defocus_blur(const torch::Tensor& img, double sigma);
torch::Tensor motion_blur(const torch::Tensor& img, double length, double angle);

/// Row-major 3x3 matrix mapping homogeneous pixel coordinates (x, y, 1).
using Homography = std::array<double, 9>;
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Exact homography through four point correspondences. Throws std::runtime_error when singular.
Homography fit_homography(const std::array<Point2, 4>& from, const std::array<Point2, 4>& to);
Homography invert_homography(const Homography& h);
/// out(p) = img(h^-1 p) with bilinear sampling and zero fill; pixel centres sit at integer coordinates.
torch::Tensor warp_homography(const torch::Tensor& img, const Homography& h);

struct WarpResult {
  torch::Tensor image;
  Homography homography;
};
/// Displaces each image corner uniformly in [-max_shift, max_shift]^2 and warps accordingly.
WarpResult perspective_warp(const torch::Tensor& img, double max_shift, Rng& rng);
/// Corner displacements (dx0,dy0,...,dx3,dy3) in the order TL, TR, BR, BL.
Homography corner_homography(ImageSize size, const std::array<double, 8>& offsets);

struct CropRect {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;

  friend bool operator==(const CropRect&, const CropRect&) = default;
};

/// Samples a rectangle with area fraction in `area` and aspect (w/h) in `ratio`, placed uniformly.
/// After ten misses it falls back to the largest centred rectangle with an admissible aspect.
CropRect sample_crop_rect(ImageSize size, Range area, Range ratio, Rng& rng);
/// Crops `rect` and bilinearly resizes it to `out` (identity when rect is the full image and out matches).
torch::Tensor crop_resize(const torch::Tensor& img, const CropRect& rect, ImageSize out);

struct CropResult {
  torch::Tensor image;
  CropRect rect;
};
CropResult random_crop_resize(const torch::Tensor& img, Range area, Range ratio, ImageSize out, Rng& rng);

/// min(step / ramp_steps, 1).
double strength_schedule(std::int64_t step, std::int64_t ramp_steps);

struct PerturbConfig {
  bool enabled = true;
  double max_corner_shift = 20.0;  // pixels
  double blur_kernel = 7.0;        // maximum motion-blur length, pixels
  double defocus_sigma_max = 3.0;  // pixels
  double brightness_delta = 0.3;
  double contrast_delta = 0.5;
  double saturation_delta = 1.0;
  double rgb_offset_max = 0.1;
  double noise_sigma_max = 0.02;
  bool crop_enabled = true;
  Range crop_area{0.35, 1.0};
  Range crop_ratio{3.0 / 4.0, 4.0 / 3.0};
  std::int64_t ramp_steps = 10000;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  friend bool operator==(const PerturbConfig&, const PerturbConfig&) = default;
};

/// Concrete parameters for one image at one strength.
struct StrengthedDraw {
  std::array<double, 8> corner_offsets{};
  bool motion = false;
  double motion_length = 1.0;
  double motion_angle = 0.0;
  double defocus_sigma = 0.0;
  std::array<double, 3> rgb_offset{};
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  bool crop = false;
  CropRect crop_rect;
};

StrengthedDraw draw_perturbation(ImageSize size, double strength, const PerturbConfig& config, Rng& rng);
/// Deterministic given the draw; output has the input's size.
torch::Tensor apply_perturbation(const torch::Tensor& img, const StrengthedDraw& draw);

/// Perspective warp, motion or defocus blur, rgb offset, brightness, contrast, saturation, noise, crop;
/// each image in the batch gets its own draw.
torch::Tensor perturb_pipeline(const torch::Tensor& images, double strength, const PerturbConfig& config, Rng& rng);

}  // namespace stegamark
