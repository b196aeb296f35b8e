#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "placing/dataset_io.hpp"
#include "placing/error.hpp"
#include "placing/io_util.hpp"
#include "placing/nn.hpp"
#include "placing/tactile.hpp"

using namespace placing;

namespace {

std::vector<Sample> test_samples() {
  const std::vector<ObjectPrimitive> objs = {
      ObjectPrimitive::cylinder("train-cylinder", 0.0225, 0.15, 0.3, 0.5, 0.6),
      ObjectPrimitive::cuboid("train-cuboid", 0.05, 0.05, 0.19, 0.35)};
  return generate_dataset(objs, 2, 2, 2.5, 0.02, 19);
}

std::vector<const Sample*> as_batch(const std::vector<Sample>& s, size_t n) {
  std::vector<const Sample*> b;
  for (size_t i = 0; i < n && i < s.size(); ++i) b.push_back(&s[i]);
  return b;
}

double batch_loss(Network& net, const std::vector<const Sample*>& batch) {
  return net.run_batch(batch, 0.0, 0, nullptr).mean_loss;
}

}  // namespace

TEST_CASE("layer tables pin the published architecture") {
  const auto tact = architecture_layers(Architecture::Tactile);
  REQUIRE(tact.size() == 10);
  CHECK(tact[0].name == "conv1.weight");
  CHECK(tact[0].shape == std::vector<int>{16, 2, 3, 3});
  CHECK(tact[2].name == "conv2.weight");
  CHECK(tact[2].shape == std::vector<int>{32, 16, 3, 3});
  // 12 * 12 * 32 feature map flattens to 4608 inputs.
  CHECK(tact[4].name == "fc1.weight");
  CHECK(tact[4].shape == std::vector<int>{128, 4608});
  CHECK(tact[8].name == "head.weight");
  CHECK(tact[8].shape == std::vector<int>{6, 128});

  const auto ft = architecture_layers(Architecture::Ft);
  REQUIRE(ft.size() == 6);
  CHECK(ft[0].shape == std::vector<int>{128, 6});

  const auto both = architecture_layers(Architecture::TactileFt);
  CHECK(both[4].shape == std::vector<int>{128, 4614});

  CHECK(architecture_fingerprint(Architecture::Tactile) !=
        architecture_fingerprint(Architecture::Ft));
  CHECK(architecture_fingerprint(Architecture::Tactile) !=
        architecture_fingerprint(Architecture::TactileFt));
  CHECK(architecture_fingerprint(Architecture::Ft) !=
        architecture_fingerprint(Architecture::TactileFt));
  CHECK(architecture_fingerprint(Architecture::Tactile) ==
        architecture_fingerprint(Architecture::Tactile));

  CHECK_THROWS_AS(architecture_from_string("nn-magic"), UsageError);
  CHECK(architecture_from_string("nn-tactile-ft") == Architecture::TactileFt);
}

TEST_CASE("initialization is seeded Glorot with zero biases") {
  for (const Architecture arch :
       {Architecture::Tactile, Architecture::Ft, Architecture::TactileFt}) {
    const NetworkParams a = init_network(arch, 5);
    const NetworkParams b = init_network(arch, 5);
    const NetworkParams c = init_network(arch, 6);
    const auto layers = architecture_layers(arch);
    bool any_diff_seed = false;
    for (size_t i = 0; i < layers.size(); ++i) {
      CHECK(a.tensors[i].data == b.tensors[i].data);
      if (a.tensors[i].data != c.tensors[i].data) any_diff_seed = true;
      if (layers[i].shape.size() == 1) {
        for (const double v : a.tensors[i].data) CHECK(v == 0.0);
        continue;
      }
      const int taps = layers[i].shape.size() == 4 ? 9 : 1;
      const double limit = std::sqrt(
          6.0 / (layers[i].shape[0] * taps + layers[i].shape[1] * taps));
      double max_abs = 0.0;
      for (const double v : a.tensors[i].data)
        max_abs = std::max(max_abs, std::abs(v));
      CHECK(max_abs <= limit);
      CHECK(max_abs > 0.5 * limit);  // the draw actually fills the range
    }
    CHECK(any_diff_seed);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const auto samples = test_samples();
  const auto batch = as_batch(samples, 4);

  for (const Architecture arch :
       {Architecture::Tactile, Architecture::Ft, Architecture::TactileFt}) {
    Network net(init_network(arch, 21));
    Gradients grads = zero_gradients(net.params());
    const BatchResult r = net.run_batch(batch, 0.0, 0, &grads);
    REQUIRE(r.skipped == 0);
    REQUIRE(std::isfinite(r.mean_loss));

    for (size_t ti = 0; ti < grads.size(); ++ti) {
      Tensor& t = net.params().tensors[ti];
      const int n = t.size();
      for (int k = 0; k < 8; ++k) {
        const int idx = static_cast<int>((static_cast<long long>(k) * 7919) % n);
        const double an = grads[ti].data[static_cast<size_t>(idx)];
        const double saved = t.data[static_cast<size_t>(idx)];

        // A probe step can straddle a relu kink (a bias shifts a whole
        // feature map, so this is not rare); shrinking h moves the central
        // difference toward the one-sided derivative that backprop computes.
        // A wrong analytic gradient fails at every step size.
        double best = std::numeric_limits<double>::infinity();
        for (const double h : {1e-5, 1e-6, 1e-7}) {
          t.data[static_cast<size_t>(idx)] = saved + h;
          const double up = batch_loss(net, batch);
          t.data[static_cast<size_t>(idx)] = saved - h;
          const double down = batch_loss(net, batch);
          t.data[static_cast<size_t>(idx)] = saved;
          const double fd = (up - down) / (2.0 * h);
          const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
          best = std::min(best, std::abs(fd - an) / denom);
          if (best < 1e-3) break;
        }
        INFO(architecture_name(arch) << " tensor " << ti << " index " << idx);
        CHECK(best < 1e-3);
      }
    }
  }
}

TEST_CASE("batch loss agrees with the single-sample rotation route") {
  const auto samples = test_samples();
  const auto batch = as_batch(samples, 6);
  Network net(init_network(Architecture::Tactile, 33));
  const double mean = batch_loss(net, batch);

  double expected = 0.0;
  for (const Sample* s : batch) {
    const Rotation pred = sixd_to_rotation(net.forward_6d(*s));
    expected += angular_loss(pred, s->r_world_gripper, s->z_gt_world);
  }
  expected /= static_cast<double>(batch.size());
  CHECK(mean == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("batch composition does not leak between samples") {
  const auto samples = test_samples();
  Network net(init_network(Architecture::TactileFt, 7));

  const double solo = batch_loss(net, {&samples[0]});
  const double dup = batch_loss(net, {&samples[0], &samples[0]});
  CHECK(solo == doctest::Approx(dup).epsilon(1e-12));

  const double ab = batch_loss(net, {&samples[0], &samples[1]});
  const double ba = batch_loss(net, {&samples[1], &samples[0]});
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  const double a = batch_loss(net, {&samples[0]});
  const double b = batch_loss(net, {&samples[1]});
  CHECK(ab == doctest::Approx(0.5 * (a + b)).epsilon(1e-12));

  // Gradients of a duplicated sample equal the single-sample gradients.
  Gradients g1 = zero_gradients(net.params());
  Gradients g2 = zero_gradients(net.params());
  net.run_batch({&samples[0]}, 0.0, 0, &g1);
  net.run_batch({&samples[0], &samples[0]}, 0.0, 0, &g2);
  for (size_t ti = 0; ti < g1.size(); ++ti)
    for (size_t j = 0; j < g1[ti].data.size(); ++j)
      CHECK(g1[ti].data[j] == doctest::Approx(g2[ti].data[j]).epsilon(1e-9));
}

TEST_CASE("dropout is seeded and unbiased through the linear head") {
  const auto samples = test_samples();
  const auto batch = as_batch(samples, 2);
  Network net(init_network(Architecture::Ft, 11));

  const double clean = batch_loss(net, batch);
  const BatchResult d1 = net.run_batch(batch, 0.2, 77, nullptr);
  const BatchResult d2 = net.run_batch(batch, 0.2, 77, nullptr);
  const BatchResult d3 = net.run_batch(batch, 0.2, 78, nullptr);
  CHECK(d1.mean_loss == d2.mean_loss);
  CHECK(d1.mean_loss != d3.mean_loss);
  CHECK(d1.mean_loss != clean);

  // The head is linear in the dropped activations, so losses (nearly linear
  // near the operating point) must average back to the clean value.
  const int trials = 3000;
  double sum = 0.0, sumsq = 0.0;
  for (int s = 0; s < trials; ++s) {
    const double v = net.run_batch(batch, 0.2, 1000 + s, nullptr).mean_loss;
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / trials;
  const double sd = std::sqrt(std::max(0.0, sumsq / trials - mean * mean));
  CHECK(std::abs(mean - clean) < 5.0 * sd / std::sqrt(static_cast<double>(trials)) + 5e-4);
}

TEST_CASE("sgd momentum follows the recursion exactly") {
  NetworkParams p = init_network(Architecture::Ft, 3);
  const double w0 = p.tensors[0].data[0];
  SgdMomentum opt(p);
  Gradients g = zero_gradients(p);
  g[0].data[0] = 2.0;

  const double lr = 0.1, mu = 0.9;
  opt.step(p, g, lr, mu);  // v = 2.0, w -= 0.2
  CHECK(p.tensors[0].data[0] == w0 - 0.2);
  opt.step(p, g, lr, mu);  // v = 3.8
  CHECK(p.tensors[0].data[0] == doctest::Approx(w0 - 0.2 - 0.38).epsilon(1e-15));
  opt.step(p, g, lr, mu);  // v = 5.42
  CHECK(p.tensors[0].data[0] ==
        doctest::Approx(w0 - 0.2 - 0.38 - 0.542).epsilon(1e-15));
  // Untouched entries keep their init values.
  CHECK(p.tensors[0].data[1] == init_network(Architecture::Ft, 3).tensors[0].data[1]);
}

TEST_CASE("gradient clipping rescales to the requested norm") {
  NetworkParams p = init_network(Architecture::Ft, 3);
  Gradients g = zero_gradients(p);
  g[0].data[0] = 3.0;
  g[2].data[0] = 4.0;  // global norm 5
  CHECK(clip_gradients(g, 10.0) == doctest::Approx(5.0));
  CHECK(g[0].data[0] == 3.0);

  CHECK(clip_gradients(g, 1.0) == doctest::Approx(5.0));
  CHECK(g[0].data[0] == doctest::Approx(0.6));
  CHECK(g[2].data[0] == doctest::Approx(0.8));
}

TEST_CASE("degenerate zero head output is skipped or rejected") {
  const auto samples = test_samples();
  NetworkParams p = init_network(Architecture::Ft, 4);
  for (Tensor& t : p.tensors)
    for (double& v : t.data) v = 0.0;
  Network net(std::move(p));

  Gradients g = zero_gradients(net.params());
  const BatchResult r = net.run_batch(as_batch(samples, 3), 0.0, 0, &g);
  CHECK(r.skipped == 3);
  CHECK(r.first_skipped == 0);
  CHECK(std::isnan(r.mean_loss));
  for (const Tensor& t : g)
    for (const double v : t.data) CHECK(v == 0.0);

  CHECK_THROWS_AS(net.predict(samples[0]), DegenerateInputError);
}

TEST_CASE("inference is pure and repeatable") {
  const auto samples = test_samples();
  Network net(init_network(Architecture::Tactile, 13));
  const NetworkParams before = net.params();

  const Rotation r1 = net.predict(samples[0]);
  batch_loss(net, as_batch(samples, 4));
  Gradients g = zero_gradients(net.params());
  net.run_batch(as_batch(samples, 4), 0.2, 9, &g);
  const Rotation r2 = net.predict(samples[0]);

  CHECK(r1.matrix() == r2.matrix());
  for (size_t i = 0; i < before.tensors.size(); ++i)
    CHECK(before.tensors[i].data == net.params().tensors[i].data);
}

TEST_CASE("checkpoints round-trip bitwise and reject mismatches") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "placing_nn_ckpt.bin").string();

  const NetworkParams p = init_network(Architecture::TactileFt, 91);
  save_checkpoint(path, p);
  const NetworkParams q = load_checkpoint(path);
  CHECK(q.arch == Architecture::TactileFt);
  REQUIRE(q.tensors.size() == p.tensors.size());
  for (size_t i = 0; i < p.tensors.size(); ++i) {
    CHECK(q.tensors[i].shape == p.tensors[i].shape);
    CHECK(q.tensors[i].data == p.tensors[i].data);
  }

  CHECK_THROWS_AS(require_architecture(q, Architecture::Tactile),
                  FingerprintMismatchError);
  require_architecture(q, Architecture::TactileFt);  // must not throw

  SUBCASE("truncated file") {
    const std::string buf = read_file(path);
    atomic_write_file(path, buf.substr(0, buf.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("wrong magic") {
    std::string buf = read_file(path);
    buf[0] = 'X';
    atomic_write_file(path, buf);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("tampered fingerprint") {
    std::string buf = read_file(path);
    // magic(8) + version(4) + name length(4) + name, then the fingerprint.
    const size_t off = 8 + 4 + 4 + std::string("nn-tactile-ft").size();
    buf[off] = static_cast<char>(buf[off] ^ 0x5a);
    atomic_write_file(path, buf);
    CHECK_THROWS_AS(load_checkpoint(path), FingerprintMismatchError);
  }
  SUBCASE("trailing bytes") {
    atomic_write_file(path, read_file(path) + "x");
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(path + ".gone"), IoError);
  }
  fs::remove(path);
}
