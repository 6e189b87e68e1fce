#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "stegamark/data_io.hpp"
#include "stegamark/model.hpp"

namespace stegamark {

// Evaluation-time image edits. Inputs are [N,3,H,W] tensors with values in [0,1]; outputs keep the size.

/// Removes `width` pixels from every edge and resizes back to the original size (bilinear).
torch::Tensor center_crop_resize(const torch::Tensor& img, std::int64_t width);
/// Blacks out every pixel within `width` of an edge.
torch::Tensor add_frame(const torch::Tensor& img, std::int64_t width);
/// Luma replicated to three channels.
torch::Tensor grayscale(const torch::Tensor& img);
/// Serpentine Floyd-Steinberg on the luma; output values are exactly 0 or 1.
torch::Tensor one_bit_dither(const torch::Tensor& img);
/// Per-channel 256-bin CDF remapping.
torch::Tensor hist_equalize(const torch::Tensor& img);
/// img + 0.5 (img - gaussian_blur(img, 1)), clamped.
torch::Tensor edge_enhance(const torch::Tensor& img);

enum class EditKind {
  brightness,
  contrast,
  saturation,
  grayscale,
  one_bit,
  hist_equalize,
  edge_enhance,
  center_crop,
  frame,
  external_dir,
};

std::string_view to_string(EditKind kind);
EditKind parse_edit_kind(std::string_view text);
/// Kinds that take a level (factor or width).
bool is_parametric(EditKind kind);

/// Applies a built-in edit; `level` is a factor for colour edits, a pixel width for crop/frame and
/// ignored otherwise. external_dir is not applicable here.
torch::Tensor apply_edit(const torch::Tensor& img, EditKind kind, double level);

struct SweepRow {
  std::string kind;
  double level = 0.0;
  double mean = 0.0;
  double p10 = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  std::int64_t n = 0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepTable {
  std::string name;
  std::vector<SweepRow> rows;

  friend bool operator==(const SweepTable&, const SweepTable&) = default;
};

struct EvalOptions {
  std::uint64_t seed = 0;
  std::int64_t batch_size = 16;
  /// Use only the first N images (0 = all).
  std::int64_t max_images = 0;
};

/// Aggregates per-image accuracies into one row (linear-interpolated percentiles).
SweepRow summarize(std::string kind, double level, const std::vector<double>& accuracies);

/// Encodes every image once with a fresh random message, quantizes to 8 bits, applies the edit at
/// each level, decodes and aggregates the bit accuracy per level.
SweepTable evaluate_sweep(WatermarkModel& model, const Dataset& dataset, EditKind kind, const std::vector<double>& levels,
                          const EvalOptions& options);

/// Crop rows followed by frame rows over the same widths.
SweepTable crop_frame_experiment(WatermarkModel& model, const Dataset& dataset, const std::vector<std::int64_t>& widths,
                                 const EvalOptions& options);

/// Writes the encoded (8-bit PNG) version of every dataset image under `out_dir`, using the same
/// messages evaluate_sweep would draw for `options.seed`. Returns the messages.
std::vector<Message> export_encoded(WatermarkModel& model, const Dataset& dataset, const std::filesystem::path& out_dir,
                                    const EvalOptions& options);

/// Decodes externally edited copies of the exported images, paired by file name.
SweepTable evaluate_external(WatermarkModel& model, const Dataset& dataset, const std::filesystem::path& edited_dir,
                             const EvalOptions& options);

/// One CSV (kind,level,mean,p10,p50,p90,n) and one accuracy-vs-level PNG per table.
/// Returns the written paths. Throws on an empty table or write failure.
std::vector<std::filesystem::path> emit_report(const std::vector<SweepTable>& tables,
                                               const std::filesystem::path& out_dir);

SweepTable read_sweep_csv(const std::filesystem::path& path);

}  // namespace stegamark
