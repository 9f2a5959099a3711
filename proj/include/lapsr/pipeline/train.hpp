#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <variant>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/imaging/augment.hpp"
#include "lapsr/imaging/sampler.hpp"
#include "lapsr/loss/loss.hpp"
#include "lapsr/metrics/report.hpp"
#include "lapsr/model/checkpoint.hpp"
#include "lapsr/model/lapsrn.hpp"
#include "lapsr/rng.hpp"
#include "lapsr/tensor/optim.hpp"

namespace lapsr {

enum class OptimizerKind : std::uint8_t { kSgd = 0, kAdam = 1 };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

struct TrainConfig {
  ModelConfig model;
  std::uint32_t epochs = 100;
  std::uint32_t iters_per_epoch = 100;
  std::size_t batch = 64;
  std::size_t patch = 128;
  double lr = 1e-5;
  std::uint32_t lr_halving_period = 50;  // epochs
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double momentum = 0.9;  // SGD momentum, or Adam's beta1
  double beta2 = 0.999;   // Adam only
  double adam_epsilon = 1e-8;
  double weight_decay = 1e-4;
  LossConfig loss;
  AugmentSpec augment;
  std::uint64_t seed = 1;
  std::uint32_t checkpoint_every = 0;  // epochs; 0 writes only the final model

  std::uint64_t total_iterations() const { return std::uint64_t{epochs} * iters_per_epoch; }

  void validate() const {
    model.validate();
    loss.validate();
    augment.validate();
    if (epochs < 1 || iters_per_epoch < 1) throw ConfigError("epochs and iters_per_epoch must be >= 1");
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (patch % model.scale != 0) throw ConfigError("patch size must be a multiple of the model scale");
    if (!(lr > 0)) throw ConfigError("learning rate must be > 0");
    if (lr_halving_period < 1) throw ConfigError("lr_halving_period must be >= 1");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("beta2 must lie in [0, 1)");
    if (!(adam_epsilon > 0)) throw ConfigError("adam epsilon must be > 0");
    if (!(weight_decay >= 0)) throw ConfigError("weight decay must be >= 0");
  }
};

// lr0 * 0.5^floor((epoch - 1) / period), epochs counted from 1.
inline double lr_at_epoch(double lr0, std::uint32_t period, std::uint32_t epoch) {
  return lr0 * std::ldexp(1.0, -static_cast<int>((epoch - 1) / period));
}

struct TrainLogRow {
  std::uint32_t epoch = 0;
  std::uint64_t iter = 0;  // global, from 1
  double lr = 0, loss = 0, charbonnier = 0, gdl = 0;
  double seconds = 0;  // wall time since the run (or resume) started
};

struct TrainLog {
  std::vector<TrainLogRow> rows;

  // Deterministic columns only; wall time lives in timing_csv().
  std::string csv() const {
    std::ostringstream os;
    os << "epoch,iter,lr,loss,charbonnier,gdl\n";
    for (const auto& r : rows)
      os << r.epoch << ',' << r.iter << ',' << format_metric(r.lr) << ',' << format_metric(r.loss) << ','
         << format_metric(r.charbonnier) << ',' << format_metric(r.gdl) << '\n';
    return os.str();
  }
  std::string timing_csv() const {
    std::ostringstream os;
    os << "iter,seconds\n";
    for (const auto& r : rows) os << r.iter << ',' << r.seconds << '\n';
    return os.str();
  }
};

// Optimizer state needed to continue a run bit-exactly.
//
//   "LPST" | u16 version | u8 optimizer | u64 next_iteration | u32 count | tensor records
//
// SGD stores one velocity per parameter; Adam stores every first moment, then
// every second moment.
template <class T>
struct TrainState {
  OptimizerKind optimizer = OptimizerKind::kSgd;
  std::uint64_t next_iteration = 0;
  std::vector<NamedTensor<T>> slots;
};

inline constexpr std::array<char, 4> kStateMagic{'L', 'P', 'S', 'T'};
inline constexpr std::uint16_t kStateVersion = 1;

template <class T>
void save_train_state(const TrainState<T>& state, const std::filesystem::path& path) {
  io::Writer w;
  w.bytes(kStateMagic.data(), kStateMagic.size());
  w.put(kStateVersion);
  w.put(static_cast<std::uint8_t>(state.optimizer));
  w.put(state.next_iteration);
  w.put(static_cast<std::uint32_t>(state.slots.size()));
  for (const auto& v : state.slots) io::write_tensor(w, v.name, v.value);
  w.write_file(path);
}

template <class T>
TrainState<T> load_train_state(const std::filesystem::path& path) {
  io::Reader r(io::Reader::file_bytes(path));
  std::array<char, 4> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kStateMagic) throw CheckpointError(CheckpointError::Kind::kBadMagic, "not a training state file (bad magic)");
  if (const auto v = r.get<std::uint16_t>(); v != kStateVersion)
    throw CheckpointError(CheckpointError::Kind::kVersion, "unsupported training state version " + std::to_string(v));
  TrainState<T> state;
  const auto kind = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(OptimizerKind::kAdam))
    throw CheckpointError(CheckpointError::Kind::kShapeTable, "unknown optimizer id " + std::to_string(kind) + " in training state");
  state.optimizer = static_cast<OptimizerKind>(kind);
  state.next_iteration = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) state.slots.push_back(io::read_tensor<T>(r));
  if (r.remaining() != 0) throw CheckpointError(CheckpointError::Kind::kShapeTable, "trailing bytes after last state record");
  return state;
}

// Starting point for train(): a model plus optional optimizer state.
template <class T>
struct Resume {
  ModelParams<T> params;
  TrainState<T> state;
};

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_iteration;
  std::function<void(const std::string&)> on_checkpoint;
};

template <class T>
struct TrainResult {
  ModelParams<T> params;
  TrainLog log;
  TrainState<T> state;
};

inline std::string checkpoint_stem(std::uint32_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "checkpoint_e%04u", epoch);
  return buf;
}

namespace detail {

template <class T>
class TrainOptimizer {
 public:
  TrainOptimizer(const TrainConfig& c, const std::vector<NamedTensor<T>>& params)
      : kind_(c.optimizer),
        impl_(c.optimizer == OptimizerKind::kAdam
                  ? Impl(std::in_place_type<Adam<T>>, params,
                         typename Adam<T>::Options{c.lr, c.momentum, c.beta2, c.adam_epsilon, c.weight_decay})
                  : Impl(std::in_place_type<SgdMomentum<T>>, params,
                         typename SgdMomentum<T>::Options{c.lr, c.momentum, c.weight_decay})) {}

  void set_learning_rate(double lr) {
    std::visit([&](auto& o) { o.set_learning_rate(lr); }, impl_);
  }
  void step(std::vector<NamedTensor<T>>& params) {
    std::visit([&](auto& o) { o.step(params); }, impl_);
  }

  TrainState<T> state(std::uint64_t next) {
    return {kind_, next, std::visit([](auto& o) { return o.state(); }, impl_)};
  }

  void restore(const TrainState<T>& s) {
    if (s.optimizer != kind_)
      throw ConfigError("resume state was written by the " + to_string(s.optimizer) + " optimizer, config asks for " +
                        to_string(kind_));
    if (auto* adam = std::get_if<Adam<T>>(&impl_)) adam->set_steps(s.next_iteration);
    if (s.slots.empty()) return;
    auto& slots = std::visit([](auto& o) -> std::vector<NamedTensor<T>>& { return o.state(); }, impl_);
    if (s.slots.size() != slots.size()) throw ConfigError("resume state does not match the model");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (s.slots[i].name != slots[i].name || s.slots[i].value.shape() != slots[i].value.shape())
        throw ConfigError("resume state does not match optimizer slot '" + slots[i].name + "'");
      slots[i].value = s.slots[i].value;
    }
  }

 private:
  using Impl = std::variant<SgdMomentum<T>, Adam<T>>;
  OptimizerKind kind_;
  Impl impl_;
};

}  // namespace detail

// Training on the pyramid objective. Batch t is drawn with seed
// mix_seed(config.seed, t), so a resumed run replays exactly the batches an
// uninterrupted run would see. With `out_dir` set, checkpoints (model +
// optimizer state) are written every `checkpoint_every` epochs and at the end
// as model.lpsr / model.state alongside train_log.csv.
template <class T>
TrainResult<T> train(const TrainConfig& config, BatchSampler& sampler, std::optional<Resume<T>> resume = std::nullopt,
                     const std::optional<std::filesystem::path>& out_dir = std::nullopt, const TrainHooks& hooks = {}) {
  config.validate();
  ModelParams<T> params = resume ? std::move(resume->params) : build_model<T>(config.model, config.seed);
  if (!(params.config == config.model)) throw ConfigError("resume checkpoint was built with a different model config");
  detail::TrainOptimizer<T> opt(config, params.tensors);
  std::uint64_t start = 0;
  if (resume) {
    start = resume->state.next_iteration;
    opt.restore(resume->state);
  }

  const auto t0 = std::chrono::steady_clock::now();
  TrainLog log;
  auto snapshot = [&](std::uint64_t next, const std::string& stem) {
    if (!out_dir) return;
    std::filesystem::create_directories(*out_dir);
    save_checkpoint(params, *out_dir / (stem + ".lpsr"));
    save_train_state(opt.state(next), *out_dir / (stem + ".state"));
    write_text(*out_dir / "train_log.csv", log.csv());
    write_text(*out_dir / "timing.csv", log.timing_csv());
    if (hooks.on_checkpoint) hooks.on_checkpoint((*out_dir / (stem + ".lpsr")).string());
  };

  for (std::uint64_t t = start; t < config.total_iterations(); ++t) {
    const auto epoch = static_cast<std::uint32_t>(t / config.iters_per_epoch + 1);
    const double lr = lr_at_epoch(config.lr, config.lr_halving_period, epoch);
    opt.set_learning_rate(lr);

    const auto batch = sampler.sample<T>(config.batch, mix_seed(config.seed, t));
    const auto terms = total_loss(forward(params, batch.lr), batch.targets, config.loss);
    const double loss = static_cast<double>(terms.total.item());
    if (!std::isfinite(loss))
      throw TrainingError("non-finite loss at iteration " + std::to_string(t + 1) + " (epoch " + std::to_string(epoch) + ")");
    terms.total.backward();
    opt.step(params.tensors);

    TrainLogRow row{epoch, t + 1, lr, loss, terms.charbonnier, terms.gdl,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    log.rows.push_back(row);
    if (hooks.on_iteration) hooks.on_iteration(row);

    const bool epoch_end = (t + 1) % config.iters_per_epoch == 0;
    if (epoch_end && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 && t + 1 < config.total_iterations())
      snapshot(t + 1, checkpoint_stem(epoch));
  }
  snapshot(config.total_iterations(), "model");
  return {std::move(params), std::move(log), opt.state(config.total_iterations())};
}

// Trains on the train split of `manifest`.
template <class T>
TrainResult<T> train(const TrainConfig& config, const CorpusManifest& manifest, std::optional<Resume<T>> resume = std::nullopt,
                     const std::optional<std::filesystem::path>& out_dir = std::nullopt, const TrainHooks& hooks = {},
                     const BatchSampler::Warn& warn = {}) {
  config.validate();
  auto images = load_split(manifest, Split::kTrain);
  if (images.empty()) throw ConfigError("manifest has no train entries");
  BatchSampler sampler(std::move(images), config.augment, config.model.scale, config.patch, warn);
  return train<T>(config, sampler, std::move(resume), out_dir, hooks);
}

}  // namespace lapsr
