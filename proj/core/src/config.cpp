#include "stegamark/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

namespace stegamark {

std::string_view to_string(LossMode mode) { return mode == LossMode::fixed ? "fixed" : "adaptive"; }

LossMode parse_loss_mode(std::string_view text) {
  if (text == "fixed") return LossMode::fixed;
  if (text == "adaptive") return LossMode::adaptive;
  throw std::invalid_argument("unknown loss mode: " + std::string(text));
}

void TrainConfig::validate() const {
  model.validate();
  perturb.validate();
  fixed_weights.validate();
  if (total_steps < 1) throw std::invalid_argument("train.total_steps must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (model.norm == NormMode::batch && batch_size < 2) {
    throw std::invalid_argument("train.batch_size must be >= 2 with batch normalization");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be > 0");
  if (log_every < 1 || checkpoint_every < 1) throw std::invalid_argument("log/checkpoint intervals must be >= 1");
  if (!(grad_clip > 0.0)) throw std::invalid_argument("train.grad_clip must be > 0");
  const double max_shift = static_cast<double>(std::min(model.image.height, model.image.width)) / 4.0;
  if (perturb.max_corner_shift >= max_shift) {
    throw std::invalid_argument("perturb.max_corner_shift must be below min(H,W)/4");
  }
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("invalid value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    auto piece = text.substr(start, comma - start);
    while (!piece.empty() && piece.front() == ' ') piece.remove_prefix(1);
    while (!piece.empty() && piece.back() == ' ') piece.remove_suffix(1);
    if (!piece.empty()) parts.push_back(piece);
    start = comma + 1;
  }
  return parts;
}

template <class T>
std::string to_text(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, double>) {
    return format_double(v);
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, ImageSize>) {
    return std::to_string(v.height) + "x" + std::to_string(v.width);
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
    return out;
  } else if constexpr (std::is_same_v<T, std::vector<std::int64_t>>) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
  } else {
    return std::string(to_string(v));
  }
}

template <class T>
T from_text(std::string_view key, std::string_view text) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ConfigError("invalid boolean for " + std::string(key) + ": '" + std::string(text) + "'");
    } else if constexpr (std::is_arithmetic_v<T>) {
      return parse_number<T>(key, text);
    } else if constexpr (std::is_same_v<T, std::string>) {
      return std::string(text);
    } else if constexpr (std::is_same_v<T, ImageSize>) {
      const auto x = text.find('x');
      if (x == std::string_view::npos) {
        const auto side = parse_number<std::int64_t>(key, text);
        return ImageSize{side, side};
      }
      return ImageSize{parse_number<std::int64_t>(key, text.substr(0, x)),
                       parse_number<std::int64_t>(key, text.substr(x + 1))};
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      std::vector<double> out;
      for (auto p : split_list(text)) out.push_back(parse_number<double>(key, p));
      return out;
    } else if constexpr (std::is_same_v<T, std::vector<std::int64_t>>) {
      std::vector<std::int64_t> out;
      for (auto p : split_list(text)) out.push_back(parse_number<std::int64_t>(key, p));
      return out;
    } else if constexpr (std::is_same_v<T, NormMode>) {
      return parse_norm_mode(text);
    } else if constexpr (std::is_same_v<T, OutputMode>) {
      return parse_output_mode(text);
    } else {
      return parse_loss_mode(text);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

struct Field {
  std::string_view key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <class Access>
Field field(std::string_view key, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  return Field{key,
               [access](const RunConfig& c) { return to_text<T>(access(const_cast<RunConfig&>(c))); },
               [access, key](RunConfig& c, std::string_view v) { access(c) = from_text<T>(key, v); }};
}

#define SGMK_FIELD(key, expr) field(key, [](RunConfig& c) -> auto& { return c.expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      SGMK_FIELD("train.data_dir", train.data_dir),
      SGMK_FIELD("train.out_dir", train.out_dir),
      SGMK_FIELD("train.image_size", train.model.image),
      SGMK_FIELD("train.n_bits", train.model.n_bits),
      SGMK_FIELD("train.encoder_channels", train.model.encoder_channels),
      SGMK_FIELD("train.decoder_channels", train.model.decoder_channels),
      SGMK_FIELD("train.norm_mode", train.model.norm),
      SGMK_FIELD("train.norm_affine", train.model.norm_affine),
      SGMK_FIELD("train.norm_before_decoder_sigmoid", train.model.norm_before_decoder_sigmoid),
      SGMK_FIELD("train.output_mode", train.model.output),
      SGMK_FIELD("train.init_log_sigma_r", train.model.init_log_sigma_r),
      SGMK_FIELD("train.init_log_sigma_p", train.model.init_log_sigma_p),
      SGMK_FIELD("train.init_log_sigma_m", train.model.init_log_sigma_m),
      SGMK_FIELD("train.batch_size", train.batch_size),
      SGMK_FIELD("train.total_steps", train.total_steps),
      SGMK_FIELD("train.learning_rate", train.learning_rate),
      SGMK_FIELD("train.adam_beta1", train.adam_beta1),
      SGMK_FIELD("train.adam_beta2", train.adam_beta2),
      SGMK_FIELD("train.adam_eps", train.adam_eps),
      SGMK_FIELD("train.grad_clip", train.grad_clip),
      SGMK_FIELD("train.seed", train.seed),
      SGMK_FIELD("train.loss_mode", train.loss_mode),
      SGMK_FIELD("train.lambda_r_max", train.fixed_weights.lambda_r_max),
      SGMK_FIELD("train.lambda_p_max", train.fixed_weights.lambda_p_max),
      SGMK_FIELD("train.lambda_m", train.fixed_weights.lambda_m),
      SGMK_FIELD("train.weight_ramp_start", train.fixed_weights.ramp_start),
      SGMK_FIELD("train.weight_ramp_end", train.fixed_weights.ramp_end),
      SGMK_FIELD("train.perceptual_backend", train.perceptual_backend),
      SGMK_FIELD("train.perceptual_weights", train.perceptual_weights),
      SGMK_FIELD("train.log_every", train.log_every),
      SGMK_FIELD("train.checkpoint_every", train.checkpoint_every),
      SGMK_FIELD("perturb.enabled", train.perturb.enabled),
      SGMK_FIELD("perturb.max_corner_shift", train.perturb.max_corner_shift),
      SGMK_FIELD("perturb.blur_kernel", train.perturb.blur_kernel),
      SGMK_FIELD("perturb.defocus_sigma_max", train.perturb.defocus_sigma_max),
      SGMK_FIELD("perturb.brightness_delta", train.perturb.brightness_delta),
      SGMK_FIELD("perturb.contrast_delta", train.perturb.contrast_delta),
      SGMK_FIELD("perturb.saturation_delta", train.perturb.saturation_delta),
      SGMK_FIELD("perturb.rgb_offset_max", train.perturb.rgb_offset_max),
      SGMK_FIELD("perturb.noise_sigma_max", train.perturb.noise_sigma_max),
      SGMK_FIELD("perturb.crop_enabled", train.perturb.crop_enabled),
      SGMK_FIELD("perturb.crop_area_min", train.perturb.crop_area.min),
      SGMK_FIELD("perturb.crop_area_max", train.perturb.crop_area.max),
      SGMK_FIELD("perturb.crop_ratio_min", train.perturb.crop_ratio.min),
      SGMK_FIELD("perturb.crop_ratio_max", train.perturb.crop_ratio.max),
      SGMK_FIELD("perturb.ramp_steps", train.perturb.ramp_steps),
      SGMK_FIELD("eval.seed", eval.seed),
      SGMK_FIELD("eval.data_dir", eval.data_dir),
      SGMK_FIELD("eval.kind", eval.kind),
      SGMK_FIELD("eval.levels", eval.levels),
      SGMK_FIELD("eval.widths", eval.widths),
      SGMK_FIELD("eval.batch_size", eval.batch_size),
      SGMK_FIELD("eval.max_images", eval.max_images),
      SGMK_FIELD("eval.edited_dir", eval.edited_dir),
  };
  return table;
}

#undef SGMK_FIELD

}  // namespace

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key: " + std::string(key));
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(base, trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
  }
  return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    out += std::string(f.key) + " = " + f.get(config) + "\n";
  }
  return out;
}

RunConfig toy_config() {
  RunConfig c;
  auto& t = c.train;
  t.model.image = {64, 64};
  t.model.n_bits = 16;
  t.model.encoder_channels = 8;
  t.model.decoder_channels = 8;
  t.batch_size = 8;
  t.total_steps = 20000;
  t.learning_rate = 1e-3;
  t.log_every = 10;
  t.checkpoint_every = 5000;
  auto& p = t.perturb;
  p.max_corner_shift = 20.0 * 64.0 / 400.0;
  p.blur_kernel = 3.0;
  p.defocus_sigma_max = 1.0;
  p.ramp_steps = 5000;
  c.eval.widths = {0, 2, 4, 6, 8, 10, 12};
  c.eval.batch_size = 32;
  return c;
}

}  // namespace stegamark
