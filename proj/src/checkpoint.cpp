#include "neurofuzzy/errors.hpp"
#include "neurofuzzy/training.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace nf {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void i64(std::int64_t v) { bytes(&v, 8); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void array(const Array& a) {
    u64(static_cast<std::uint64_t>(a.size()));
    bytes(a.data(), static_cast<std::size_t>(a.size()) * sizeof(double));
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : buf_(std::move(data)) {}

  void bytes(void* p, std::size_t n) {
    if (n > buf_.size() - pos_) throw FormatError("checkpoint truncated", pos_);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  std::int64_t i64() { std::int64_t v; bytes(&v, 8); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
  double f64() { double v; bytes(&v, 8); return v; }
  std::uint64_t count(std::size_t element_size) {
    const std::size_t at = pos_;
    const std::uint64_t n = u64();
    if (element_size > 0 && n > (buf_.size() - pos_) / element_size) throw FormatError("checkpoint truncated", at);
    return n;
  }
  std::string str() {
    const auto n = count(1);
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  Array array(Index expected) {
    const std::size_t at = pos_;
    const auto n = count(sizeof(double));
    if (static_cast<Index>(n) != expected) {
      throw FormatError("checkpoint array has " + std::to_string(n) + " values, expected " +
                            std::to_string(expected),
                        at);
    }
    Array a(static_cast<Index>(n));
    bytes(a.data(), n * sizeof(double));
    return a;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

void write_schedule(Writer& w, const ScheduleSpec& s) {
  w.f64(s.base_lr);
  w.u8(s.mode == ScheduleMode::Plateau ? 1 : 0);
  w.u64(s.milestone_epochs.size());
  for (int m : s.milestone_epochs) w.i64(m);
  w.f64(s.milestone_factor);
  w.f64(s.per_epoch_decay);
  w.f64(s.batch_decay_phase1);
  w.f64(s.batch_decay_phase2);
  w.i64(s.phase2_start_epoch);
  w.i64(s.plateau_patience);
  w.f64(s.plateau_min_delta);
  w.i64(s.plateau_max_triggers);
}

ScheduleSpec read_schedule(Reader& r) {
  ScheduleSpec s;
  s.base_lr = r.f64();
  s.mode = r.u8() ? ScheduleMode::Plateau : ScheduleMode::Milestones;
  s.milestone_epochs.resize(r.count(8));
  for (int& m : s.milestone_epochs) m = static_cast<int>(r.i64());
  s.milestone_factor = r.f64();
  s.per_epoch_decay = r.f64();
  s.batch_decay_phase1 = r.f64();
  s.batch_decay_phase2 = r.f64();
  s.phase2_start_epoch = static_cast<int>(r.i64());
  s.plateau_patience = static_cast<int>(r.i64());
  s.plateau_min_delta = r.f64();
  s.plateau_max_triggers = static_cast<int>(r.i64());
  return s;
}

}  // namespace

void checkpoint_save(const TrainState& state, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);

  const Network& net = state.network;
  w.str(serialize(net.spec()));
  w.i64(net.input_shape().channels);
  w.i64(net.input_shape().height);
  w.i64(net.input_shape().width);
  w.i64(net.num_classes());
  w.u64(state.seed);

  const LrScheduler& sch = state.scheduler;
  write_schedule(w, sch.spec());
  w.i64(sch.batches_per_epoch());
  w.f64(sch.lr());
  w.i64(sch.epoch());
  w.i64(sch.batch());
  w.u64(sch.plateau_epochs().size());
  for (int e : sch.plateau_epochs()) w.i64(e);
  w.f64(sch.plateau().best);
  w.u8(sch.plateau().has_best ? 1 : 0);
  w.i64(sch.plateau().stale_epochs);
  w.i64(sch.plateau().triggers);

  w.i64(state.epoch);
  w.i64(state.batch_count);
  std::ostringstream rng;
  rng << state.rng;
  w.str(rng.str());

  w.f64(state.adam.beta1);
  w.f64(state.adam.beta2);
  w.f64(state.adam.eps);
  w.i64(state.adam.step);

  // Parameter manifest: name, shape, values, first and second moments.
  const auto params = net.parameters();
  w.u64(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.str(params[i].name);
    w.u64(params[i].tensor.rank());
    for (Index d : params[i].tensor.shape()) w.i64(d);
    w.array(params[i].tensor.value());
    w.array(state.adam.m[i]);
    w.array(state.adam.v[i]);
  }

  w.f64(state.best_val_error);
  w.i64(state.best_epoch);
  w.u64(state.best_params.size());
  for (const Array& a : state.best_params) w.array(a);

  w.u64(state.history.size());
  for (const MetricRow& r : state.history) {
    w.i64(r.epoch);
    w.i64(r.batch_count);
    w.f64(r.lr);
    w.f64(r.train_loss);
    w.f64(r.val_loss);
    w.f64(r.val_error);
    w.f64(r.wall_seconds);
  }

  // Written beside the target, then renamed over it.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + tmp.string());
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    if (!out) throw ConfigError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainState checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  char magic[sizeof kCheckpointMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw FormatError("not a checkpoint file", 0);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), sizeof magic);
  }

  const NetworkSpec spec = parse_network_spec(r.str());
  InputShape input;
  input.channels = r.i64();
  input.height = r.i64();
  input.width = r.i64();
  const int classes = static_cast<int>(r.i64());
  const std::uint64_t seed = r.u64();

  const ScheduleSpec schedule = read_schedule(r);
  const long batches = static_cast<long>(r.i64());
  TrainState s = init_train_state(spec, input, classes, schedule, batches, seed);

  const double lr = r.f64();
  const int sch_epoch = static_cast<int>(r.i64());
  const long sch_batch = static_cast<long>(r.i64());
  std::vector<int> plateau_epochs(r.count(8));
  for (int& e : plateau_epochs) e = static_cast<int>(r.i64());
  PlateauTracker tracker;
  tracker.best = r.f64();
  tracker.has_best = r.u8() != 0;
  tracker.stale_epochs = static_cast<int>(r.i64());
  tracker.triggers = static_cast<int>(r.i64());
  s.scheduler.restore(lr, sch_epoch, sch_batch, std::move(plateau_epochs), tracker);

  s.epoch = static_cast<int>(r.i64());
  s.batch_count = static_cast<long>(r.i64());
  {
    const std::size_t at = r.pos();
    std::istringstream rng(r.str());
    rng >> s.rng;
    if (!rng) throw FormatError("corrupt generator state", at);
  }

  s.adam.beta1 = r.f64();
  s.adam.beta2 = r.f64();
  s.adam.eps = r.f64();
  s.adam.step = static_cast<long>(r.i64());

  const auto params = s.network.parameters();
  {
    const std::size_t at = r.pos();
    if (r.u64() != params.size()) throw FormatError("parameter count does not match the network", at);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t at = r.pos();
    const std::string name = r.str();
    Shape shape(r.count(8));
    for (Index& d : shape) d = r.i64();
    if (name != params[i].name || shape != params[i].tensor.shape()) {
      throw FormatError("parameter manifest mismatch at '" + name + "'", at);
    }
    Tensor t = params[i].tensor;
    t.value() = r.array(t.numel());
    s.adam.m[i] = r.array(t.numel());
    s.adam.v[i] = r.array(t.numel());
  }

  s.best_val_error = r.f64();
  s.best_epoch = static_cast<int>(r.i64());
  const auto best_count = r.count(8);
  if (best_count != 0 && best_count != params.size()) throw FormatError("best snapshot size mismatch", r.pos());
  for (std::size_t i = 0; i < best_count; ++i) s.best_params.push_back(r.array(params[i].tensor.numel()));

  s.history.resize(r.count(7 * 8));
  for (MetricRow& row : s.history) {
    row.epoch = static_cast<int>(r.i64());
    row.batch_count = static_cast<long>(r.i64());
    row.lr = r.f64();
    row.train_loss = r.f64();
    row.val_loss = r.f64();
    row.val_error = r.f64();
    row.wall_seconds = r.f64();
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint payload", r.pos());
  return s;
}

}  // namespace nf
