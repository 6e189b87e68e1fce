#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "stegamark/config.hpp"
#include "stegamark/data_io.hpp"
#include "stegamark/decoder.hpp"
#include "stegamark/robustness_eval.hpp"
#include "stegamark/trainer.hpp"

namespace stegamark::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kResolvedConfigName = "resolved.cfg";

// Bad inputs (missing files, wrong lengths) map to exit code 1 like config errors do.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool toy = false;
};

struct TrainOptions {
  std::optional<std::int64_t> total_steps;
  std::string data_dir;
  std::string resume;
};

struct CodecOptions {
  std::string checkpoint;
  std::string image;
  std::string message;
  bool random = false;
  std::string out;
  std::string truth;
};

struct EvalCliOptions {
  std::string checkpoint;
  std::string data_dir;
  std::string kind;
  std::vector<double> levels;
  std::vector<std::int64_t> widths;
  std::string export_dir;
  std::string edited_dir;
  std::vector<std::string> csv_files;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig config = g.toy ? toy_config() : RunConfig{};
  if (!g.config_path.empty()) config = load_config_file(g.config_path, config);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + kv);
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) {
    config.train.seed = *g.seed;
    config.eval.seed = *g.seed;
  }
  if (!g.out_dir.empty()) config.train.out_dir = g.out_dir;
  return config;
}

void write_resolved(const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / kResolvedConfigName, std::ios::trunc);
  out << serialize_config(config);
  if (!out) throw std::runtime_error("cannot write " + (dir / kResolvedConfigName).string());
}

TrainState load_model_state(const std::string& checkpoint) {
  if (checkpoint.empty()) throw InputError("--checkpoint is required");
  try {
    auto state = load_checkpoint(checkpoint);
    state.model->eval();
    return state;
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

ImageBuffer load_for_model(const std::string& path, ImageSize size, std::ostream& err) {
  try {
    const auto native = load_image(path);
    if (native.height() == size.height && native.width() == size.width) return native;
    err << "warning: " << path << " is " << native.height() << "x" << native.width() << ", resizing to "
        << size.height << "x" << size.width << "\n";
    return load_image(path, size);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

Dataset load_dataset(const std::string& dir, ImageSize size) {
  if (dir.empty()) throw InputError("a data directory is required");
  try {
    return load_image_dir(dir, size);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

Message parse_message(const std::string& text, std::int64_t n_bits, const char* what) {
  Message m;
  try {
    m = Message::from_string(text);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string(what) + ": " + e.what());
  }
  if (static_cast<std::int64_t>(m.size()) != n_bits) {
    throw InputError(std::string(what) + " has " + std::to_string(m.size()) + " bits but the model expects " +
                     std::to_string(n_bits));
  }
  return m;
}

EvalOptions eval_options(const EvalConfig& e) { return {e.seed, e.batch_size, e.max_images}; }

int cmd_train(const GlobalOptions& g, const TrainOptions& t, std::ostream& out) {
  auto config = resolve_config(g);
  if (t.total_steps) config.train.total_steps = *t.total_steps;
  if (!t.data_dir.empty()) config.train.data_dir = t.data_dir;
  try {
    config.train.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  if (config.train.data_dir.empty()) throw ConfigError("train.data_dir is not set");
  if (!fs::is_directory(config.train.data_dir)) throw InputError("data directory not found: " + config.train.data_dir);
  if (!t.resume.empty() && !fs::exists(t.resume)) throw InputError("checkpoint not found: " + t.resume);

  write_resolved(config, config.train.out_dir);
  std::optional<fs::path> resume;
  if (!t.resume.empty()) resume = t.resume;
  const auto result = train(config.train, resume);
  out << "checkpoint " << result.checkpoint.string() << "\n";
  out << "metrics " << result.metrics_csv.string() << "\n";
  if (!result.rows.empty()) out << "final bit_acc " << result.rows.back().bit_acc << "\n";
  return kOk;
}

int cmd_encode(const GlobalOptions& g, const CodecOptions& c, std::ostream& out, std::ostream& err) {
  const auto config = resolve_config(g);
  if (c.out.empty()) throw InputError("--out is required");
  if (c.random == !c.message.empty()) throw InputError("pass exactly one of --message or --random");
  auto state = load_model_state(c.checkpoint);
  const auto& mc = state.model->config();
  const auto image = load_for_model(c.image, mc.image, err);

  Message message;
  if (c.random) {
    Rng rng(config.eval.seed);
    message = random_message(static_cast<std::size_t>(mc.n_bits), rng);
  } else {
    message = parse_message(c.message, mc.n_bits, "--message");
  }

  torch::NoGradGuard no_grad;
  const auto encoded = state.model->encode(image.tensor().unsqueeze(0), message.to_tensor().unsqueeze(0)).encoded;
  save_png(encoded[0], c.out);
  out << message.to_string() << "\n";
  return kOk;
}

int cmd_decode(const GlobalOptions& g, const CodecOptions& c, std::ostream& out, std::ostream& err) {
  resolve_config(g);
  auto state = load_model_state(c.checkpoint);
  const auto& mc = state.model->config();
  std::optional<Message> truth;
  if (!c.truth.empty()) truth = parse_message(c.truth, mc.n_bits, "--truth");
  const auto image = load_for_model(c.image, mc.image, err);

  torch::NoGradGuard no_grad;
  const auto bits = logits_to_bits(state.model->decode(image.tensor().unsqueeze(0))[0]);
  out << bits.to_string() << "\n";
  if (truth) out << "bit_accuracy " << bit_accuracy(bits, *truth) << "\n";
  return kOk;
}

fs::path eval_out_dir(const GlobalOptions& g) { return g.out_dir.empty() ? fs::path("eval") : fs::path(g.out_dir); }

int cmd_sweep(const GlobalOptions& g, const EvalCliOptions& e, std::ostream& out) {
  auto config = resolve_config(g);
  if (!e.kind.empty()) config.eval.kind = e.kind;
  if (!e.levels.empty()) config.eval.levels = e.levels;
  if (!e.data_dir.empty()) config.eval.data_dir = e.data_dir;
  if (!e.edited_dir.empty()) config.eval.edited_dir = e.edited_dir;
  EditKind kind;
  try {
    kind = parse_edit_kind(config.eval.kind);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }

  auto state = load_model_state(e.checkpoint);
  const auto dataset = load_dataset(config.eval.data_dir, state.model->config().image);
  const auto dir = eval_out_dir(g);
  write_resolved(config, dir);
  const auto options = eval_options(config.eval);

  if (!e.export_dir.empty()) {
    export_encoded(state.model, dataset, e.export_dir, options);
    out << "exported " << dataset.items.size() << " encoded images to " << e.export_dir << "\n";
  }

  SweepTable table;
  if (kind == EditKind::external_dir) {
    if (config.eval.edited_dir.empty()) throw InputError("external_dir sweeps need --edited-dir");
    if (!fs::is_directory(config.eval.edited_dir)) throw InputError("not a directory: " + config.eval.edited_dir);
    table = evaluate_external(state.model, dataset, config.eval.edited_dir, options);
  } else {
    table = evaluate_sweep(state.model, dataset, kind, config.eval.levels, options);
  }
  table.name = "sweep_" + std::string(to_string(kind));
  for (const auto& p : emit_report({table}, dir)) out << "wrote " << p.string() << "\n";
  return kOk;
}

int cmd_crop_experiment(const GlobalOptions& g, const EvalCliOptions& e, std::ostream& out) {
  auto config = resolve_config(g);
  if (!e.widths.empty()) config.eval.widths = e.widths;
  if (!e.data_dir.empty()) config.eval.data_dir = e.data_dir;
  auto state = load_model_state(e.checkpoint);
  const auto dataset = load_dataset(config.eval.data_dir, state.model->config().image);
  const auto dir = eval_out_dir(g);
  write_resolved(config, dir);
  const auto table = crop_frame_experiment(state.model, dataset, config.eval.widths, eval_options(config.eval));
  for (const auto& p : emit_report({table}, dir)) out << "wrote " << p.string() << "\n";
  return kOk;
}

int cmd_report(const GlobalOptions& g, const EvalCliOptions& e, std::ostream& out) {
  std::vector<SweepTable> tables;
  for (const auto& f : e.csv_files) {
    try {
      tables.push_back(read_sweep_csv(f));
    } catch (const std::exception& ex) {
      throw InputError(ex.what());
    }
  }
  const auto dir = g.out_dir.empty() ? fs::path("report") : fs::path(g.out_dir);
  for (const auto& p : emit_report(tables, dir)) out << "wrote " << p.string() << "\n";
  return kOk;
}

void add_global_options(CLI::App& app, GlobalOptions& g) {
  app.add_option("--config", g.config_path, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for training and evaluation");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--set", g.overrides, "override one config entry (key=value); repeatable");
  app.add_flag("--toy", g.toy, "start from the 64x64 / 16-bit desk-scale preset");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train and evaluate a deep image watermarking model", "stegamark"};
  app.require_subcommand(1);

  GlobalOptions g;
  TrainOptions t;
  CodecOptions c;
  EvalCliOptions e;
  add_global_options(app, g);

  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + metrics CSV");
  train_cmd->add_option("--total-steps", t.total_steps, "override train.total_steps");
  train_cmd->add_option("--data-dir", t.data_dir, "training image directory");
  train_cmd->add_option("--resume", t.resume, "continue from a checkpoint");

  auto* encode_cmd = app.add_subcommand("encode", "embed a message into one image");
  encode_cmd->add_option("--checkpoint", c.checkpoint)->required();
  encode_cmd->add_option("--image", c.image)->required();
  encode_cmd->add_option("--message", c.message, "bit string of 0/1 characters");
  encode_cmd->add_flag("--random", c.random, "draw a random message from the seed");
  encode_cmd->add_option("--out", c.out, "encoded PNG path")->required();

  auto* decode_cmd = app.add_subcommand("decode", "recover the message from one image");
  decode_cmd->add_option("--checkpoint", c.checkpoint)->required();
  decode_cmd->add_option("--image", c.image)->required();
  decode_cmd->add_option("--truth", c.truth, "expected bit string; prints bit accuracy");

  auto* sweep_cmd = app.add_subcommand("sweep", "bit accuracy under one edit across levels");
  sweep_cmd->add_option("--checkpoint", e.checkpoint)->required();
  sweep_cmd->add_option("--data-dir", e.data_dir);
  sweep_cmd->add_option("--kind", e.kind);
  sweep_cmd->add_option("--levels", e.levels)->delimiter(',');
  sweep_cmd->add_option("--export-dir", e.export_dir, "also write the encoded images here");
  sweep_cmd->add_option("--edited-dir", e.edited_dir, "externally edited copies for kind=external_dir");

  auto* crop_cmd = app.add_subcommand("crop-experiment", "center crop vs frame at equal widths");
  crop_cmd->add_option("--checkpoint", e.checkpoint)->required();
  crop_cmd->add_option("--data-dir", e.data_dir);
  crop_cmd->add_option("--widths", e.widths)->delimiter(',');

  auto* report_cmd = app.add_subcommand("report", "re-render plots from sweep CSVs");
  report_cmd->add_option("csv", e.csv_files)->required()->check(CLI::ExistingFile);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsageError;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(g, t, out);
    if (encode_cmd->parsed()) return cmd_encode(g, c, out, err);
    if (decode_cmd->parsed()) return cmd_decode(g, c, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(g, e, out);
    if (crop_cmd->parsed()) return cmd_crop_experiment(g, e, out);
    if (report_cmd->parsed()) return cmd_report(g, e, out);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kUsageError;
  } catch (const InputError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsageError;
  } catch (const TrainingAborted& ex) {
    err << "training aborted: " << ex.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace stegamark::cli
