#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "placing/config.hpp"
#include "placing/dataset_io.hpp"
#include "placing/error.hpp"
#include "placing/estimators.hpp"
#include "placing/harness.hpp"
#include "placing/io_util.hpp"
#include "placing/nn.hpp"
#include "placing/rng.hpp"
#include "placing/so3.hpp"
#include "placing/tactile.hpp"
#include "placing/train.hpp"

namespace {

using namespace placing;

struct CliArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;  // output directory
  uint64_t seed = 0;
  int threads = 1;
};

Config load_config(const CliArgs& cli) {
  Config cfg =
      cli.config_path.empty() ? Config{} : Config::from_file(cli.config_path);
  for (const std::string& o : cli.overrides) cfg.apply_override(o);
  return cfg;
}

void ensure_parent_dir(const std::string& path) {
  std::filesystem::path p(path);
  if (!p.has_parent_path()) return;
  std::error_code ec;
  std::filesystem::create_directories(p.parent_path(), ec);
  if (ec)
    throw IoError("cannot create directory " + p.parent_path().string() +
                  ": " + ec.message());
}

ClassicalParams classical_params(const Config& cfg) {
  ClassicalParams p;
  p.threshold = cfg.get_double("classical.threshold");
  p.n_theta = cfg.get_int("classical.n_theta");
  p.n_rho = cfg.get_int("classical.n_rho");
  return p;
}

HarnessConfig harness_config(const Config& cfg) {
  HarnessConfig hc;
  hc.noise_std = cfg.get_double("harness.noise_std");
  hc.release_offset_std = cfg.get_double("harness.release_offset_std");
  hc.descent_step = cfg.get_double("harness.descent_step");
  hc.start_clearance = cfg.get_double("harness.start_clearance");
  hc.contact_ratio = cfg.get_double("harness.contact_ratio");
  hc.gripper_block_angle = cfg.get_double("harness.gripper_block_angle");
  hc.grasp_offset_range = cfg.get_double("harness.grasp_offset_range");
  hc.max_arm_tilt = cfg.get_double("harness.max_arm_tilt");
  hc.inhand_range = cfg.get_double("harness.inhand_range");
  hc.validate();
  return hc;
}

const char* checkpoint_key(Architecture arch) {
  switch (arch) {
    case Architecture::Tactile: return "eval.checkpoint_tactile";
    case Architecture::Ft: return "eval.checkpoint_ft";
    case Architecture::TactileFt: return "eval.checkpoint_tactile_ft";
  }
  throw UsageError("unhandled architecture");
}

int run_gen_data(const CliArgs& cli) {
  Config cfg = load_config(cli);
  std::vector<ObjectPrimitive> objects =
      parse_object_list(cfg.get("data.objects"));
  if (objects.empty())
    throw UsageError("gen-data needs at least one object in data.objects");

  std::vector<Sample> samples = generate_dataset(
      objects, cfg.get_int("data.arm_poses"), cfg.get_int("data.inhand_per_pose"),
      cfg.get_double("data.inhand_range"), cfg.get_double("data.noise_std"),
      cli.seed, cli.threads);

  std::string dir = cli.out.empty() ? "out" : cli.out;
  std::string path = dir + "/dataset.txt";
  ensure_parent_dir(path);
  write_dataset(path, samples);

  size_t bad = 0;
  for (const Sample& s : samples) {
    Eigen::Vector3d diff =
        placing_normal(s.r_world_gripper, s.r_gripper_placing_gt).vec() -
        s.z_gt_world.vec();
    if (diff.norm() > 1e-9) ++bad;
  }

  std::string msg = "wrote ";
  append_u64(msg, samples.size());
  msg += " samples to " + path + "\n";
  if (bad == 0) {
    msg += "label consistency: ok\n";
  } else {
    msg += "label consistency: FAILED on ";
    append_u64(msg, bad);
    msg += " samples\n";
  }
  std::fputs(msg.c_str(), stdout);
  if (bad != 0) throw DegenerateInputError("generated labels are inconsistent");
  return 0;
}

int run_train(const CliArgs& cli) {
  Config cfg = load_config(cli);
  TrainConfig tc;
  tc.arch = architecture_from_string(cfg.get("train.arch"));
  tc.epochs = cfg.get_int("train.epochs");
  tc.test_fraction = cfg.get_double("train.test_fraction");
  tc.batch_size = cfg.get_int("train.batch_size");
  tc.lr = cfg.get_double("train.lr");
  tc.momentum = cfg.get_double("train.momentum");
  tc.dropout = cfg.get_double("train.dropout");
  tc.window = cfg.get_int("train.window");
  tc.grad_clip = cfg.get_double("train.grad_clip");
  tc.seed = cli.seed;
  tc.validate();

  std::vector<Sample> data = read_dataset(cfg.get("train.dataset"));
  TrainResult result = train(tc, data);

  std::string dir =
      cli.out.empty() ? std::string("out/") + architecture_name(tc.arch)
                      : cli.out;
  std::string ckpt_path = dir + "/checkpoint.bin";
  ensure_parent_dir(ckpt_path);
  save_checkpoint(ckpt_path, result.best);
  atomic_write_file(dir + "/metrics.log", format_metrics_log(result.log));

  const TrainLog::Checkpoint& best = result.log.checkpoints.back();
  std::string msg = "trained ";
  msg += architecture_name(tc.arch);
  msg += " on ";
  append_u64(msg, data.size());
  msg += " samples\nbest windowed test loss: ";
  append_double(msg, best.value);
  msg += " (epoch ";
  append_u64(msg, static_cast<unsigned long long>(best.epoch));
  msg += ")\nfinal windowed test loss: ";
  append_double(msg, result.log.evaluations.back().windowed_loss);
  msg += "\ncheckpoint: " + ckpt_path + "\nmetrics: " + dir + "/metrics.log\n";
  std::fputs(msg.c_str(), stdout);
  return 0;
}

int run_eval(const CliArgs& cli) {
  Config cfg = load_config(cli);
  std::vector<std::string> method_names = split_list(cfg.get("eval.methods"));
  if (method_names.empty())
    throw UsageError("eval needs at least one method in eval.methods");
  std::vector<ObjectPrimitive> objects =
      parse_object_list(cfg.get("eval.objects"));
  if (objects.empty())
    throw UsageError("eval needs at least one object in eval.objects");

  ClassicalParams cp = classical_params(cfg);
  std::vector<Estimator> methods;
  for (const std::string& name : method_names) {
    EstimatorKind kind = estimator_from_string(name);
    if (estimator_uses_network(kind)) {
      Architecture arch = estimator_architecture(kind);
      NetworkParams params = load_checkpoint(cfg.get(checkpoint_key(arch)));
      require_architecture(params, arch);
      methods.push_back(Estimator::neural(std::move(params)));
    } else if (kind == EstimatorKind::Oracle) {
      methods.push_back(Estimator::oracle());
    } else {
      methods.push_back(Estimator::classical(kind, cp));
    }
  }

  EvalReport report =
      run_evaluation(methods, objects, cfg.get_int("eval.arm_poses"),
                     cfg.get_int("eval.inhand_poses"), harness_config(cfg),
                     cli.seed);

  std::string dir = cli.out.empty() ? "out/eval" : cli.out;
  std::string report_path = dir + "/report.tsv";
  ensure_parent_dir(report_path);
  atomic_write_file(report_path, format_eval_report(report));

  std::string msg = "ran ";
  append_u64(msg, report.trials.size());
  msg += " trials (";
  append_u64(msg, static_cast<unsigned long long>(report.n_methods));
  msg += " methods x ";
  append_u64(msg, static_cast<unsigned long long>(report.n_objects));
  msg += " objects x ";
  append_u64(msg, static_cast<unsigned long long>(report.n_arm_poses *
                                                  report.n_inhand_poses));
  msg += " poses)\n";
  for (int m = 0; m < report.n_methods; ++m) {
    EvalRow avg = method_average(report, m);
    msg += avg.method;
    msg += " average: ";
    append_u64(msg, static_cast<unsigned long long>(avg.successes));
    msg += "/";
    append_u64(msg, static_cast<unsigned long long>(avg.trials));
    msg += " success_rate=";
    append_double(msg, avg.success_rate);
    msg += " ang_err_mean=";
    append_double(msg, avg.ang_err_mean);
    msg += " ang_err_std=";
    append_double(msg, avg.ang_err_std);
    msg += "\n";
  }
  msg += "report: " + report_path + "\n";
  std::fputs(msg.c_str(), stdout);
  return 0;
}

int run_infer(const CliArgs& cli) {
  Config cfg = load_config(cli);
  std::vector<Sample> data = read_dataset(cfg.get("infer.dataset"));
  int index = cfg.get_int("infer.index");
  if (index < 0 || index >= static_cast<int>(data.size()))
    throw UsageError("infer.index " + std::to_string(index) +
                     " out of range for " + std::to_string(data.size()) +
                     " samples");
  const Sample& s = data[static_cast<size_t>(index)];
  EstimatorKind kind = estimator_from_string(cfg.get("infer.method"));

  std::string msg = "sample ";
  append_u64(msg, static_cast<unsigned long long>(index));
  msg += " (" + s.object_id + "), method ";
  msg += estimator_name(kind);
  msg += "\n";

  Rotation pred;
  if (estimator_uses_network(kind)) {
    std::string ckpt = cfg.get("infer.checkpoint");
    if (ckpt.empty())
      throw UsageError(std::string("infer.method ") + estimator_name(kind) +
                       " needs infer.checkpoint");
    NetworkParams params = load_checkpoint(ckpt);
    require_architecture(params, estimator_architecture(kind));
    Network net(std::move(params));
    Rotation6d raw = net.forward_6d(s);
    msg += "6d output:";
    for (const Eigen::Vector3d* col : {&raw.a1, &raw.a2})
      for (int i = 0; i < 3; ++i) {
        msg += " ";
        append_double(msg, (*col)(i));
      }
    msg += "\n";
    pred = net.predict(s);
  } else if (kind == EstimatorKind::Oracle) {
    Estimator est = Estimator::oracle();
    pred = est.estimate(s);
  } else {
    Estimator est = Estimator::classical(kind, classical_params(cfg));
    pred = est.estimate(s);
  }

  Eigen::Matrix3d m = pred.matrix();
  msg += "estimate:\n";
  for (int r = 0; r < 3; ++r) {
    msg += " ";
    for (int c = 0; c < 3; ++c) {
      msg += " ";
      append_double(msg, m(r, c));
    }
    msg += "\n";
  }
  msg += "angular error: ";
  append_double(msg, angular_loss(pred, s.r_world_gripper, s.z_gt_world));
  msg += "\n";
  std::fputs(msg.c_str(), stdout);
  return 0;
}

int run_bench(const CliArgs& cli) {
  Config cfg = load_config(cli);
  int reps = cfg.get_int("bench.reps");
  if (reps < 1) throw UsageError("bench.reps must be >= 1");

  std::vector<ObjectPrimitive> objects = seen_objects();
  std::vector<Sample> data =
      generate_dataset(objects, 4, 4, kDefaultInhandRange, 0.02, cli.seed,
                       cli.threads);
  std::vector<const Sample*> batch;
  for (const Sample& s : data) batch.push_back(&s);

  Network net(init_network(Architecture::TactileFt,
                           mix_seed(cli.seed, 0x62656e63)));
  Gradients grads = zero_gradients(net.params());
  net.run_batch(batch, 0.2, mix_seed(cli.seed, 0), &grads);  // warm up

  using clock = std::chrono::steady_clock;
  double last_loss = 0.0;
  auto t0 = clock::now();
  for (int rep = 0; rep < reps; ++rep) {
    for (Tensor& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
    BatchResult res =
        net.run_batch(batch, 0.2, mix_seed(cli.seed, rep + 1), &grads);
    last_loss = res.mean_loss;
  }
  double nn_secs = std::chrono::duration<double>(clock::now() - t0).count();
  double nn_ops = reps * static_cast<double>(batch.size());

  ClassicalParams cp = classical_params(cfg);
  TactileFrame::Grid fused = fuse_images(data[0].tactile);
  int hough_reps = reps * 20;
  double winner_votes = 0.0;
  auto t1 = clock::now();
  for (int rep = 0; rep < hough_reps; ++rep) {
    HoughAccumulator acc = hough_accumulate(fused, cp);
    winner_votes = acc.votes[hough_winner(acc)];
  }
  double hough_secs = std::chrono::duration<double>(clock::now() - t1).count();

  std::string msg = "forward+backward (nn-tactile-ft, batch ";
  append_u64(msg, batch.size());
  msg += "): ";
  append_u64(msg, static_cast<unsigned long long>(reps));
  msg += " reps in ";
  append_double(msg, nn_secs);
  msg += " s -> ";
  append_double(msg, nn_secs > 0 ? nn_ops / nn_secs : 0.0);
  msg += " samples/s\nhough accumulate (";
  append_u64(msg, static_cast<unsigned long long>(cp.n_theta));
  msg += "x";
  append_u64(msg, static_cast<unsigned long long>(cp.n_rho));
  msg += " grid): ";
  append_u64(msg, static_cast<unsigned long long>(hough_reps));
  msg += " reps in ";
  append_double(msg, hough_secs);
  msg += " s -> ";
  append_double(msg, hough_secs > 0 ? hough_reps / hough_secs : 0.0);
  msg += " ops/s\nsanity: batch loss ";
  append_double(msg, last_loss);
  msg += ", winner votes ";
  append_double(msg, winner_votes);
  msg += "\n";
  std::fputs(msg.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile placing-normal toolkit: dataset generation, training,"
               " placing evaluation, inference, and micro-benchmarks."};
  app.require_subcommand(1);

  CliArgs cli;
  auto add_common = [&cli](CLI::App* sub, bool seed_required) {
    sub->add_option("--config", cli.config_path,
                    "key=value config file (dotted keys)");
    sub->add_option("--override", cli.overrides,
                    "config override key=value (repeatable)");
    sub->add_option("--out", cli.out, "output directory");
    CLI::Option* seed = sub->add_option("--seed", cli.seed, "run seed");
    if (seed_required) seed->required();
    sub->add_option("--threads", cli.threads, "worker thread bound")
        ->check(CLI::PositiveNumber);
    return sub;
  };

  CLI::App* gen = add_common(
      app.add_subcommand("gen-data", "render a synthetic grasp dataset"), true);
  CLI::App* tr = add_common(
      app.add_subcommand("train", "train a network on a dataset"), true);
  CLI::App* ev = add_common(
      app.add_subcommand("eval", "run the placing evaluation grid"), true);
  CLI::App* inf = add_common(
      app.add_subcommand("infer", "estimate one dataset sample"), false);
  CLI::App* be = add_common(
      app.add_subcommand("bench", "time the network and Hough kernels"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(gen)) return run_gen_data(cli);
    if (app.got_subcommand(tr)) return run_train(cli);
    if (app.got_subcommand(ev)) return run_eval(cli);
    if (app.got_subcommand(inf)) return run_infer(cli);
    if (app.got_subcommand(be)) return run_bench(cli);
  } catch (const placing::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const placing::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const placing::Error& e) {
    // Domain errors: no line found, degenerate input, empty contact,
    // fingerprint mismatch, diverged training.
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
