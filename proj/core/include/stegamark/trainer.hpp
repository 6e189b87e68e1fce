#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "stegamark/config.hpp"
#include "stegamark/data_io.hpp"
#include "stegamark/model.hpp"

namespace stegamark {

/// Everything needed to continue training bit-for-bit.
struct TrainState {
  TrainConfig config;
  WatermarkModel model{nullptr};
  std::unique_ptr<torch::optim::Adam> optimizer;
  std::int64_t step = 0;
  Rng rng;

  /// Fresh state: parameters initialized from config.seed.
  static TrainState create(const TrainConfig& config);
};

struct MetricsRow {
  std::int64_t step = 0;
  double loss_r = 0.0;
  double loss_p = 0.0;
  double loss_m = 0.0;
  double loss = 0.0;
  double bit_acc = 0.0;
  double strength = 0.0;
  double ratio_r = 0.0;
  double ratio_p = 0.0;
  double grad_enc_fc = 0.0;
  double grad_dec_conv1 = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr const char* kMetricsHeader =
    "step,L_R,L_P,L_M,loss,bit_acc,strength,ratio_R,ratio_P,grad_enc_fc,grad_dec_conv1";
std::string to_csv_line(const MetricsRow& row);
/// Parses a metrics CSV written by `train` (header required).
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// Raised when the training loss becomes non-finite.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::int64_t step, std::int64_t batch_index)
      : std::runtime_error(what), step(step), batch_index(batch_index) {}
  std::int64_t step;
  /// First batch element with a non-finite loss, or -1 when none can be singled out.
  std::int64_t batch_index;
};

/// Forward (encode, perturb at the scheduled strength, decode), loss, Adam update with global-norm
/// clipping; advances state.step and draws perturbations from state.rng.
MetricsRow train_step(TrainState& state, const Batch& batch, const PerceptualBackend& perceptual);

/// Zeroes gradients, backpropagates `loss`, and reports mean |grad| for each named parameter.
std::map<std::string, double> probe_gradients(torch::nn::Module& module, const torch::Tensor& loss,
                                              const std::map<std::string, std::string>& layers);

/// Full loss at the current step without updating parameters, optimizer or rng.
std::map<std::string, double> grad_probe(TrainState& state, const Batch& batch, const PerceptualBackend& perceptual,
                                         const std::map<std::string, std::string>& layers = default_probe_layers());

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_csv;
  std::vector<MetricsRow> rows;
};

/// Runs from `state.step` to config.total_steps, appending to <out_dir>/metrics.csv and checkpointing to
/// <out_dir>/checkpoint.sgmk every checkpoint_every steps and at the end.
TrainResult train(TrainState& state, const Dataset& dataset);
/// Loads config.data_dir and trains from scratch; resumes if `resume` names a checkpoint.
TrainResult train(const TrainConfig& config, const std::optional<std::filesystem::path>& resume = std::nullopt);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'S', 'G', 'M', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
/// Throws CheckpointError on bad magic, version mismatch, truncation or checksum failure.
TrainState load_checkpoint(const std::filesystem::path& path);

/// Field-by-field comparison (config, step, rng, parameters, buffers, optimizer moments).
bool states_equal(const TrainState& a, const TrainState& b);

}  // namespace stegamark
