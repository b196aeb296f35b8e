#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "placing/error.hpp"
#include "placing/train.hpp"

using namespace placing;

namespace {

std::vector<Sample> cylinder_samples(int n_poses, int n_inhand, uint64_t seed) {
  const std::vector<ObjectPrimitive> objs = {
      ObjectPrimitive::cylinder("train-cylinder", 0.0225, 0.15, 0.3, 0.5, 0.6)};
  return generate_dataset(objs, n_poses, n_inhand, kDefaultInhandRange, 0.02,
                          seed);
}

std::vector<uint64_t> seeds_of(const std::vector<Sample>& v) {
  std::vector<uint64_t> s;
  for (const auto& x : v) s.push_back(x.seed);
  return s;
}

bool same_params(const NetworkParams& a, const NetworkParams& b) {
  if (a.arch != b.arch || a.tensors.size() != b.tensors.size()) return false;
  for (size_t i = 0; i < a.tensors.size(); ++i)
    if (a.tensors[i].data != b.tensors[i].data) return false;
  return true;
}

double windowed_with(const NetworkParams& params,
                     const std::vector<Sample>& test_set, int batch_size,
                     int window) {
  Network net(params);
  std::vector<double> means;
  for (size_t start = 0; start < test_set.size();
       start += static_cast<size_t>(batch_size)) {
    std::vector<const Sample*> batch;
    const size_t stop =
        std::min(test_set.size(), start + static_cast<size_t>(batch_size));
    for (size_t i = start; i < stop; ++i) batch.push_back(&test_set[i]);
    means.push_back(net.run_batch(batch, 0.0, 0, nullptr).mean_loss);
  }
  const auto w = std::min<size_t>(static_cast<size_t>(window), means.size());
  double sum = 0.0;
  for (size_t i = means.size() - w; i < means.size(); ++i) sum += means[i];
  return sum / static_cast<double>(w);
}

}  // namespace

TEST_CASE("config validation rejects out-of-range settings") {
  TrainConfig good;
  good.arch = Architecture::Ft;
  CHECK_NOTHROW(good.validate());

  auto broken = [&](auto mutate) {
    TrainConfig c = good;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), UsageError);
  };
  broken([](TrainConfig& c) { c.epochs = 0; });
  broken([](TrainConfig& c) { c.test_fraction = 0.0; });
  broken([](TrainConfig& c) { c.test_fraction = 1.0; });
  broken([](TrainConfig& c) { c.batch_size = 0; });
  broken([](TrainConfig& c) { c.window = 0; });
  broken([](TrainConfig& c) { c.lr = 0.0; });
  broken([](TrainConfig& c) { c.momentum = 1.0; });
  broken([](TrainConfig& c) { c.dropout = 1.0; });
  broken([](TrainConfig& c) { c.grad_clip = 0.0; });

  const auto data = cylinder_samples(4, 2, 77);
  TrainConfig zero_epochs = good;
  zero_epochs.epochs = 0;
  CHECK_THROWS_AS(train(zero_epochs, data), UsageError);
}

TEST_CASE("split partitions exactly, reproducibly, with a ceil-sized test side") {
  const auto data = cylinder_samples(400, 4, 5);  // 1600 samples
  REQUIRE(data.size() == 1600);

  const auto all_seeds = seeds_of(data);
  REQUIRE(std::set<uint64_t>(all_seeds.begin(), all_seeds.end()).size() ==
          data.size());

  const auto [train_a, test_a] = split(data, 0.2, 42);
  CHECK(train_a.size() == 1280);
  CHECK(test_a.size() == 320);

  // Exact partition: no overlap, union equals the input.
  std::set<uint64_t> seen;
  for (const auto& s : train_a) CHECK(seen.insert(s.seed).second);
  for (const auto& s : test_a) CHECK(seen.insert(s.seed).second);
  CHECK(seen == std::set<uint64_t>(all_seeds.begin(), all_seeds.end()));

  const auto [train_b, test_b] = split(data, 0.2, 42);
  CHECK(seeds_of(train_b) == seeds_of(train_a));
  CHECK(seeds_of(test_b) == seeds_of(test_a));

  const auto [train_c, test_c] = split(data, 0.2, 43);
  CHECK(seeds_of(test_c) != seeds_of(test_a));

  const auto ten = cylinder_samples(10, 1, 6);
  const auto [train_d, test_d] = split(ten, 0.05, 1);
  CHECK(test_d.size() == 1);  // ceil(0.5), never an empty test side
  CHECK(train_d.size() == 9);

  CHECK_THROWS_AS(split({}, 0.2, 1), UsageError);
  CHECK_THROWS_AS(split(ten, 0.0, 1), UsageError);
  CHECK_THROWS_AS(split(ten, 1.0, 1), UsageError);
}

TEST_CASE("windowed test loss equals an independent recomputation") {
  const auto train_set = cylinder_samples(8, 1, 100);
  const auto test_set = cylinder_samples(33, 1, 101);

  TrainConfig cfg;
  cfg.arch = Architecture::Ft;
  cfg.epochs = 1;
  cfg.batch_size = 8;  // 33 test samples -> batches of 8,8,8,8,1
  cfg.window = 3;
  cfg.seed = 9;
  const TrainResult result = train(cfg, train_set, test_set);

  REQUIRE(result.log.evaluations.size() == 1);
  REQUIRE(result.log.checkpoints.size() == 1);
  CHECK(result.log.train_batches.size() == 1);

  // One epoch, so the best snapshot is the post-epoch state and the recorded
  // windowed value must reproduce bitwise from it.
  CHECK(windowed_with(result.best, test_set, cfg.batch_size, cfg.window) ==
        result.log.evaluations[0].windowed_loss);
  CHECK(result.log.checkpoints[0].value ==
        result.log.evaluations[0].windowed_loss);
  CHECK(result.log.checkpoints[0].epoch == 0);
  CHECK(result.log.checkpoints[0].batch == 0);
}

TEST_CASE("identical configs train to bitwise-identical results") {
  const auto data = cylinder_samples(16, 2, 55);  // 32 samples

  TrainConfig cfg;
  cfg.arch = Architecture::Tactile;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 2024;

  const TrainResult a = train(cfg, data);
  const TrainResult b = train(cfg, data);

  CHECK(same_params(a.best, b.best));
  REQUIRE(a.log.train_batches.size() == b.log.train_batches.size());
  for (size_t i = 0; i < a.log.train_batches.size(); ++i)
    CHECK(a.log.train_batches[i].loss == b.log.train_batches[i].loss);
  REQUIRE(a.log.evaluations.size() == b.log.evaluations.size());
  for (size_t i = 0; i < a.log.evaluations.size(); ++i)
    CHECK(a.log.evaluations[i].windowed_loss ==
          b.log.evaluations[i].windowed_loss);
  REQUIRE(a.log.checkpoints.size() == b.log.checkpoints.size());
  for (size_t i = 0; i < a.log.checkpoints.size(); ++i)
    CHECK(a.log.checkpoints[i].value == b.log.checkpoints[i].value);

  TrainConfig other = cfg;
  other.seed = 2025;
  const TrainResult c = train(other, data);
  CHECK(!same_params(a.best, c.best));
}

TEST_CASE("the train set is reshuffled every epoch") {
  const auto data = cylinder_samples(32, 1, 71);

  TrainConfig cfg;
  cfg.arch = Architecture::Ft;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.lr = 1e-300;  // parameters barely move, so batch means track composition
  cfg.dropout = 0.0;
  cfg.seed = 3;
  const TrainResult r = train(cfg, data, cylinder_samples(8, 1, 72));

  REQUIRE(r.log.train_batches.size() == 8);
  bool any_differ = false;
  for (int b = 0; b < 4; ++b)
    any_differ |= r.log.train_batches[b].loss != r.log.train_batches[4 + b].loss;
  CHECK(any_differ);
}

TEST_CASE("checkpoints decrease strictly and the best snapshot beats the last") {
  const auto data = cylinder_samples(20, 2, 88);  // split 32 train / 8 test

  TrainConfig cfg;
  cfg.arch = Architecture::Ft;
  cfg.epochs = 18;
  cfg.batch_size = 8;
  cfg.lr = 3e-3;
  cfg.seed = 12;
  const TrainResult r = train(cfg, data);

  REQUIRE(r.log.evaluations.size() == 18);
  REQUIRE(!r.log.checkpoints.empty());
  CHECK(r.log.checkpoints.front().epoch == 0);  // first evaluation always snapshots
  for (size_t i = 1; i < r.log.checkpoints.size(); ++i)
    CHECK(r.log.checkpoints[i].value < r.log.checkpoints[i - 1].value);

  double min_eval = r.log.evaluations[0].windowed_loss;
  for (const auto& e : r.log.evaluations) min_eval = std::min(min_eval, e.windowed_loss);
  CHECK(r.log.checkpoints.back().value == min_eval);
  CHECK(r.log.checkpoints.back().value <=
        r.log.evaluations.back().windowed_loss);

  // The snapshot must reproduce its recorded score, which only holds when the
  // best parameters, not the final ones, are returned.
  const auto [train_set, test_set] = split(data, cfg.test_fraction, cfg.seed);
  CHECK(windowed_with(r.best, test_set, cfg.batch_size, cfg.window) ==
        r.log.checkpoints.back().value);
  CHECK(r.log.checkpoints.back().epoch < cfg.epochs - 1);  // best is not last here
}

TEST_CASE("training diverges loudly when the loss explodes") {
  const auto data = cylinder_samples(16, 1, 99);

  TrainConfig cfg;
  cfg.arch = Architecture::Ft;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.lr = 1e300;
  cfg.seed = 4;
  try {
    train(cfg, data, data);
    FAIL("expected TrainingDivergedError");
  } catch (const TrainingDivergedError& e) {
    CHECK(e.epoch == 0);
    CHECK(e.batch >= 1);
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}

TEST_CASE("a 32-sample set is memorized within 200 epochs") {
  const auto data = cylinder_samples(16, 2, 2718);
  REQUIRE(data.size() == 32);
  const std::vector<Sample> probe(data.begin(), data.begin() + 8);

  TrainConfig cfg;
  cfg.arch = Architecture::Tactile;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.dropout = 0.0;  // capacity check, not a regularization check
  cfg.seed = 31;
  const TrainResult r = train(cfg, data, probe);

  double final_epoch_mean = 0.0;
  int count = 0;
  for (const auto& tb : r.log.train_batches)
    if (tb.epoch == cfg.epochs - 1) {
      final_epoch_mean += tb.loss;
      ++count;
    }
  REQUIRE(count == 4);
  final_epoch_mean /= count;
  CHECK(final_epoch_mean < 0.02);
}

TEST_CASE("evaluate_loss agrees with hand-built predictors") {
  const auto data = cylinder_samples(25, 2, 321);

  const auto [oracle_mean, oracle_std] = evaluate_loss(
      [](const Sample& s) { return s.r_gripper_placing_gt; }, data);
  CHECK(oracle_mean < 1e-6);
  CHECK(oracle_std < 1e-6);

  // With an identity prediction the loss reduces to the in-hand misalignment,
  // readable straight off the ground-truth rotation labels.
  const auto [id_mean, id_std] =
      evaluate_loss([](const Sample&) { return Rotation(); }, data);
  double direct = 0.0;
  for (const auto& s : data) {
    const double c = std::clamp(s.r_gripper_placing_gt.matrix()(2, 2), -1.0, 1.0);
    direct += std::acos(c);
  }
  direct /= static_cast<double>(data.size());
  CHECK(id_mean == doctest::Approx(direct).epsilon(1e-12));
  CHECK(id_std > 0.0);

  std::vector<Sample> reversed(data.rbegin(), data.rend());
  const auto [rev_mean, rev_std] =
      evaluate_loss([](const Sample&) { return Rotation(); }, reversed);
  CHECK(rev_mean == doctest::Approx(id_mean).epsilon(1e-12));
  CHECK(rev_std == doctest::Approx(id_std).epsilon(1e-12));

  CHECK_THROWS_AS(
      evaluate_loss([](const Sample&) { return Rotation(); }, {}), UsageError);

  // The parameter overload is the same computation through Network::predict.
  NetworkParams params = init_network(Architecture::Ft, 7);
  Network net(params);
  const auto via_params = evaluate_loss(params, data);
  const auto via_predict =
      evaluate_loss([&net](const Sample& s) { return net.predict(s); }, data);
  CHECK(via_params.first == via_predict.first);
  CHECK(via_params.second == via_predict.second);
}

TEST_CASE("the metrics log text mirrors the training history") {
  const auto data = cylinder_samples(10, 2, 404);

  TrainConfig cfg;
  cfg.arch = Architecture::Ft;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 5;
  const TrainResult r = train(cfg, data);

  const std::string text = format_metrics_log(r.log);
  std::istringstream in(text);
  std::string line;
  size_t batch_i = 0, eval_i = 0, ck_i = 0;
  int last_epoch_seen = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    auto next_double = [&ls]() {
      std::string tok;
      ls >> tok;
      double v = 0.0;
      std::from_chars(tok.data(), tok.data() + tok.size(), v);
      return v;
    };
    if (tag == "batch") {
      const int epoch = static_cast<int>(next_double());
      const int batch = static_cast<int>(next_double());
      const double loss = next_double();
      REQUIRE(batch_i < r.log.train_batches.size());
      CHECK(epoch == r.log.train_batches[batch_i].epoch);
      CHECK(batch == r.log.train_batches[batch_i].batch);
      CHECK(loss == r.log.train_batches[batch_i].loss);
      CHECK(epoch >= last_epoch_seen);  // eval for an epoch precedes later batches
      ++batch_i;
    } else if (tag == "eval") {
      const int epoch = static_cast<int>(next_double());
      const double v = next_double();
      REQUIRE(eval_i < r.log.evaluations.size());
      CHECK(epoch == r.log.evaluations[eval_i].epoch);
      CHECK(v == r.log.evaluations[eval_i].windowed_loss);
      last_epoch_seen = epoch + 1;
      ++eval_i;
    } else if (tag == "checkpoint") {
      const int epoch = static_cast<int>(next_double());
      const int batch = static_cast<int>(next_double());
      const double v = next_double();
      REQUIRE(ck_i < r.log.checkpoints.size());
      CHECK(epoch == r.log.checkpoints[ck_i].epoch);
      CHECK(batch == r.log.checkpoints[ck_i].batch);
      CHECK(v == r.log.checkpoints[ck_i].value);
      ++ck_i;
    } else {
      FAIL("unknown record tag: ", tag);
    }
  }
  CHECK(batch_i == r.log.train_batches.size());
  CHECK(eval_i == r.log.evaluations.size());
  CHECK(ck_i == r.log.checkpoints.size());
}
