#include "placing/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "placing/error.hpp"
#include "placing/io_util.hpp"
#include "placing/rng.hpp"

namespace placing {

namespace {

// Sub-seed salts so the split, the per-epoch shuffles, the dropout masks and
// the weight init all draw from disjoint streams of the config seed.
constexpr uint64_t kSplitSalt = 0x73706c74;    // "splt"
constexpr uint64_t kShuffleSalt = 0x73687566;  // "shuf"
constexpr uint64_t kDropoutSalt = 0x64726f70;  // "drop"
constexpr uint64_t kInitSalt = 0x696e6974;     // "init"

void fisher_yates(std::vector<size_t>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(i)]);
}

std::vector<std::vector<const Sample*>> make_batches(
    const std::vector<Sample>& samples, const std::vector<size_t>& order,
    int batch_size) {
  std::vector<std::vector<const Sample*>> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    const size_t stop = std::min(order.size(), start + batch_size);
    std::vector<const Sample*> b;
    b.reserve(stop - start);
    for (size_t i = start; i < stop; ++i) b.push_back(&samples[order[i]]);
    batches.push_back(std::move(b));
  }
  return batches;
}

void require_finite(double loss, const char* phase, int epoch, int batch) {
  if (std::isfinite(loss)) return;
  throw TrainingDivergedError(std::string(phase) + " loss is not finite at epoch " +
                                  std::to_string(epoch) + " batch " +
                                  std::to_string(batch),
                              epoch, batch);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("epochs must be at least 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw UsageError("test fraction must be in (0, 1)");
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (window < 1) throw UsageError("checkpoint window must be at least 1");
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw UsageError("momentum must be in [0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw UsageError("dropout must be in [0, 1)");
  if (!(grad_clip > 0.0)) throw UsageError("gradient clip must be positive");
}

std::pair<std::vector<Sample>, std::vector<Sample>> split(
    const std::vector<Sample>& samples, double test_fraction, uint64_t seed) {
  if (samples.empty()) throw UsageError("cannot split an empty dataset");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw UsageError("test fraction must be in (0, 1)");
  const size_t n = samples.size();
  const auto n_test = static_cast<size_t>(
      std::ceil(test_fraction * static_cast<double>(n)));

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(mix_seed(seed, kSplitSalt));
  fisher_yates(order, rng);

  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  out.second.reserve(n_test);
  out.first.reserve(n - n_test);
  for (size_t i = 0; i < n; ++i)
    (i < n_test ? out.second : out.first).push_back(samples[order[i]]);
  return out;
}

TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& test_set) {
  cfg.validate();
  if (train_set.empty()) throw UsageError("train set is empty");
  if (test_set.empty()) throw UsageError("test set is empty");

  Network net(init_network(cfg.arch, mix_seed(cfg.seed, kInitSalt)));
  SgdMomentum opt(net.params());
  Gradients grads = zero_gradients(net.params());

  // Fixed-order test batches; only the train order is reshuffled.
  std::vector<size_t> test_order(test_set.size());
  std::iota(test_order.begin(), test_order.end(), size_t{0});
  const auto test_batches = make_batches(test_set, test_order, cfg.batch_size);

  std::vector<size_t> train_order(train_set.size());
  std::iota(train_order.begin(), train_order.end(), size_t{0});

  TrainResult result;
  result.best = net.params();
  double best = std::numeric_limits<double>::infinity();
  uint64_t global_batch = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, kShuffleSalt, epoch));
    fisher_yates(train_order, shuffle_rng);
    const auto batches = make_batches(train_set, train_order, cfg.batch_size);

    int last_batch = 0;
    for (int b = 0; b < static_cast<int>(batches.size()); ++b) {
      for (Tensor& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
      const BatchResult r =
          net.run_batch(batches[b], cfg.dropout,
                        mix_seed(cfg.seed, kDropoutSalt, global_batch), &grads);
      require_finite(r.mean_loss, "train", epoch, b);
      clip_gradients(grads, cfg.grad_clip);
      opt.step(net.params(), grads, cfg.lr, cfg.momentum);
      result.log.train_batches.push_back({epoch, b, r.mean_loss});
      last_batch = b;
      ++global_batch;
    }

    std::vector<double> test_losses;
    test_losses.reserve(test_batches.size());
    for (int b = 0; b < static_cast<int>(test_batches.size()); ++b) {
      const BatchResult r = net.run_batch(test_batches[b], 0.0, 0, nullptr);
      require_finite(r.mean_loss, "test", epoch, b);
      test_losses.push_back(r.mean_loss);
    }
    const auto w = static_cast<std::ptrdiff_t>(
        std::min<size_t>(static_cast<size_t>(cfg.window), test_losses.size()));
    const double windowed =
        std::accumulate(test_losses.end() - w, test_losses.end(), 0.0) /
        static_cast<double>(w);
    result.log.evaluations.push_back({epoch, windowed});

    if (windowed < best) {
      best = windowed;
      result.best = net.params();
      result.log.checkpoints.push_back({epoch, last_batch, windowed});
    }
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& data) {
  cfg.validate();
  if (data.size() < 2)
    throw UsageError("training needs at least 2 samples to split");
  auto [train_set, test_set] = split(data, cfg.test_fraction, cfg.seed);
  if (train_set.empty())
    throw UsageError("test fraction leaves no training samples");
  return train(cfg, train_set, test_set);
}

std::pair<double, double> evaluate_loss(const Predictor& predict,
                                        const std::vector<Sample>& samples) {
  if (samples.empty()) throw UsageError("cannot evaluate an empty sample list");
  std::vector<double> losses;
  losses.reserve(samples.size());
  for (const Sample& s : samples)
    losses.push_back(angular_loss(predict(s), s.r_world_gripper, s.z_gt_world));
  const double n = static_cast<double>(losses.size());
  const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  double var = 0.0;
  for (double l : losses) var += (l - mean) * (l - mean);
  return {mean, std::sqrt(var / n)};
}

std::pair<double, double> evaluate_loss(const NetworkParams& params,
                                        const std::vector<Sample>& samples) {
  Network net(params);
  return evaluate_loss([&net](const Sample& s) { return net.predict(s); },
                       samples);
}

std::string format_metrics_log(const TrainLog& log) {
  std::string out;
  size_t eval_i = 0, ck_i = 0;
  int epoch = log.train_batches.empty() ? -1 : 0;
  auto flush_epoch = [&](int e) {
    if (eval_i < log.evaluations.size() && log.evaluations[eval_i].epoch == e) {
      out += "eval ";
      append_u64(out, static_cast<unsigned long long>(e));
      out += ' ';
      append_double(out, log.evaluations[eval_i].windowed_loss);
      out += '\n';
      ++eval_i;
    }
    if (ck_i < log.checkpoints.size() && log.checkpoints[ck_i].epoch == e) {
      out += "checkpoint ";
      append_u64(out, static_cast<unsigned long long>(e));
      out += ' ';
      append_u64(out,
                 static_cast<unsigned long long>(log.checkpoints[ck_i].batch));
      out += ' ';
      append_double(out, log.checkpoints[ck_i].value);
      out += '\n';
      ++ck_i;
    }
  };
  for (const auto& tb : log.train_batches) {
    while (epoch < tb.epoch) flush_epoch(epoch++);
    out += "batch ";
    append_u64(out, static_cast<unsigned long long>(tb.epoch));
    out += ' ';
    append_u64(out, static_cast<unsigned long long>(tb.batch));
    out += ' ';
    append_double(out, tb.loss);
    out += '\n';
  }
  if (epoch >= 0) flush_epoch(epoch);
  return out;
}

}  // namespace placing
