#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "stegamark/trainer.hpp"

namespace stegamark {

namespace fs = std::filesystem;

// Layout: "SGMK" | u32 version | u64 payload size | u32 crc32(payload) | payload.
// Payload: length-prefixed sections: config text, step, rng state, model archive, optimizer archive.

namespace {

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_section(std::string& out, const std::string& bytes) {
  put<std::uint64_t>(out, bytes.size());
  out += bytes;
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string section() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string out(data_.substr(pos_, n));
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated or corrupt");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

template <class Saveable>
std::string archive_bytes(const Saveable& object) {
  torch::serialize::OutputArchive archive;
  object.save(archive);
  std::ostringstream os;
  archive.save_to(os);
  return os.str();
}

template <class Loadable>
void load_archive(Loadable& object, const std::string& bytes) {
  torch::serialize::InputArchive archive;
  std::istringstream is(bytes);
  archive.load_from(is);
  object.load(archive);
}

}  // namespace

void save_checkpoint(const TrainState& state, const fs::path& path) {
  std::string payload;
  put_section(payload, serialize_config(RunConfig{state.config, {}}));
  put<std::int64_t>(payload, state.step);
  std::ostringstream rng_text;
  rng_text << state.rng;
  put_section(payload, rng_text.str());
  put_section(payload, archive_bytes(*state.model));
  put_section(payload, archive_bytes(*state.optimizer));

  std::string file(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(file, kCheckpointVersion);
  put<std::uint64_t>(file, payload.size());
  put<std::uint32_t>(file, checksum(payload));
  file += payload;

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out) throw std::runtime_error("failed to write checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

TrainState load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader header(file);
  if (file.size() < 4 || std::memcmp(file.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(path.string() + " is not a stegamark checkpoint");
  }
  header.get<std::uint32_t>();  // magic
  const auto version = header.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  const auto size = header.get<std::uint64_t>();
  const auto crc = header.get<std::uint32_t>();
  constexpr std::size_t kHeaderSize = 4 + 4 + 8 + 4;
  if (file.size() - kHeaderSize != size) throw CheckpointError("checkpoint is truncated or corrupt: " + path.string());
  const std::string_view payload(file.data() + kHeaderSize, size);
  if (checksum(payload) != crc) throw CheckpointError("checkpoint checksum mismatch: " + path.string());

  Reader r(payload);
  try {
    const auto config = parse_config(r.section()).train;
    auto state = TrainState::create(config);
    state.step = r.get<std::int64_t>();
    std::istringstream rng_text(r.section());
    rng_text >> state.rng;
    if (!rng_text) throw CheckpointError("corrupt rng state");
    load_archive(*state.model, r.section());
    load_archive(*state.optimizer, r.section());
    if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
    return state;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
}

bool states_equal(const TrainState& a, const TrainState& b) {
  if (!(a.config == b.config) || a.step != b.step || a.rng != b.rng) return false;
  const auto pa = a.model->named_parameters();
  const auto pb = b.model->named_parameters();
  if (pa.size() != pb.size()) return false;
  for (const auto& item : pa) {
    const auto* other = pb.find(item.key());
    if (other == nullptr || !torch::equal(item.value(), *other)) return false;
  }
  const auto ba = a.model->named_buffers();
  const auto bb = b.model->named_buffers();
  if (ba.size() != bb.size()) return false;
  for (const auto& item : ba) {
    const auto* other = bb.find(item.key());
    if (other == nullptr || !torch::equal(item.value(), *other)) return false;
  }
  const auto params_a = a.model->parameters();
  const auto params_b = b.model->parameters();
  const auto& sa = a.optimizer->state();
  const auto& sb = b.optimizer->state();
  if (sa.size() != sb.size()) return false;
  for (std::size_t i = 0; i < params_a.size(); ++i) {
    auto ia = sa.find(params_a[i].unsafeGetTensorImpl());
    auto ib = sb.find(params_b[i].unsafeGetTensorImpl());
    if ((ia == sa.end()) != (ib == sb.end())) return false;
    if (ia == sa.end()) continue;
    const auto& ma = static_cast<const torch::optim::AdamParamState&>(*ia->second);
    const auto& mb = static_cast<const torch::optim::AdamParamState&>(*ib->second);
    if (ma.step() != mb.step() || !torch::equal(ma.exp_avg(), mb.exp_avg()) ||
        !torch::equal(ma.exp_avg_sq(), mb.exp_avg_sq())) {
      return false;
    }
  }
  return true;
}

}  // namespace stegamark
