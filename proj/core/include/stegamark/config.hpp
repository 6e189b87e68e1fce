#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stegamark/losses.hpp"
#include "stegamark/model.hpp"
#include "stegamark/perturbation.hpp"

namespace stegamark {

enum class LossMode { fixed, adaptive };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view text);

struct TrainConfig {
  ModelConfig model;
  std::int64_t batch_size = 8;
  std::int64_t total_steps = 1000;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 10.0;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::adaptive;
  PerturbConfig perturb;
  FixedWeightSchedule fixed_weights;
  std::string perceptual_backend = "pyramid";
  std::string perceptual_weights;
  std::int64_t log_every = 100;
  std::int64_t checkpoint_every = 1000;
  std::string data_dir;
  std::string out_dir = "run";

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Settings for the robustness sweeps.
struct EvalConfig {
  std::uint64_t seed = 0;
  std::string data_dir;
  std::string kind = "brightness";
  std::vector<double> levels{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
  std::vector<std::int64_t> widths{0, 10, 20, 30, 40, 50, 60, 70};
  std::int64_t batch_size = 16;
  std::int64_t max_images = 0;  // 0 = all
  std::string edited_dir;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct RunConfig {
  TrainConfig train;
  EvalConfig eval;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Unknown key, malformed value or failed validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sets one `section.key` entry. Throws ConfigError naming the key when unknown or malformed.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Parses `key = value` lines (blank lines and `#` comments ignored) on top of `base`.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

/// Every key, one per line, in a stable order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Desk-scale preset: 64x64 images, 16 bits, narrow networks, perturbation magnitudes scaled to the image.
RunConfig toy_config();

}  // namespace stegamark
