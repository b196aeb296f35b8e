#include "placing/nn.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "placing/error.hpp"
#include "placing/io_util.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace placing {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kImageSide = 16;
constexpr int kConv1Out = 16;
constexpr int kConv2Out = 32;
constexpr int kConv1Side = kImageSide - 2;   // 14
constexpr int kConv2Side = kConv1Side - 2;   // 12
constexpr int kFlatten = kConv2Side * kConv2Side * kConv2Out;  // 4608
constexpr int kWrenchDim = 6;
constexpr int kHidden = 128;
constexpr int kHeadDim = 6;
constexpr double kForceScale = 50.0;   // N, brings inputs near unit range
constexpr double kTorqueScale = 2.0;   // N*m
constexpr double kHeadEps = 1e-9;      // Gram-Schmidt degeneracy cut
constexpr double kAcosGuard = 1e-7;    // keeps the loss slope finite

constexpr uint32_t kCheckpointVersion = 1;
constexpr char kMagic[8] = {'T', 'P', 'N', 'C', 'K', 'P', 'T', '\n'};

bool has_conv(Architecture arch) { return arch != Architecture::Ft; }

int input_width(Architecture arch) {
  switch (arch) {
    case Architecture::Tactile: return kFlatten;
    case Architecture::Ft: return kWrenchDim;
    case Architecture::TactileFt: return kFlatten + kWrenchDim;
  }
  throw UsageError("unknown architecture");
}

uint64_t fnv1a(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Eigen::Map<const RowMat> matrix_view(const Tensor& t, int rows, int cols) {
  return Eigen::Map<const RowMat>(t.data.data(), rows, cols);
}

Eigen::Map<RowMat> matrix_view(Tensor& t, int rows, int cols) {
  return Eigen::Map<RowMat>(t.data.data(), rows, cols);
}

// Valid 3x3 convolution as a patch-matrix product. Activations are stored as
// [batch * pixels, channels] row-major; the patch element order (channel,
// then kernel row, then kernel column) matches the weight tensor layout
// [out_ch, in_ch, 3, 3], so the weight doubles as a [out_ch, in_ch*9] matrix.
void gather_patches(const RowMat& src, RowMat& dst, int batch, int in_side,
                    int in_ch) {
  const int out_side = in_side - 2;
  dst.resize(static_cast<Eigen::Index>(batch) * out_side * out_side, in_ch * 9);
  for (int b = 0; b < batch; ++b)
    for (int r = 0; r < out_side; ++r)
      for (int c = 0; c < out_side; ++c) {
        const Eigen::Index row =
            (static_cast<Eigen::Index>(b) * out_side + r) * out_side + c;
        for (int ch = 0; ch < in_ch; ++ch)
          for (int kh = 0; kh < 3; ++kh)
            for (int kw = 0; kw < 3; ++kw)
              dst(row, ch * 9 + kh * 3 + kw) =
                  src((static_cast<Eigen::Index>(b) * in_side + r + kh) * in_side +
                          c + kw,
                      ch);
      }
}

void scatter_patches(const RowMat& dpatches, RowMat& dsrc, int batch,
                     int in_side, int in_ch) {
  const int out_side = in_side - 2;
  dsrc.resize(static_cast<Eigen::Index>(batch) * in_side * in_side, in_ch);
  dsrc.setZero();
  for (int b = 0; b < batch; ++b)
    for (int r = 0; r < out_side; ++r)
      for (int c = 0; c < out_side; ++c) {
        const Eigen::Index row =
            (static_cast<Eigen::Index>(b) * out_side + r) * out_side + c;
        for (int ch = 0; ch < in_ch; ++ch)
          for (int kh = 0; kh < 3; ++kh)
            for (int kw = 0; kw < 3; ++kw)
              dsrc((static_cast<Eigen::Index>(b) * in_side + r + kh) * in_side +
                       c + kw,
                   ch) += dpatches(row, ch * 9 + kh * 3 + kw);
      }
}

Eigen::Matrix<double, 6, 1> scaled_wrench(const Sample& s) {
  Eigen::Matrix<double, 6, 1> w;
  w.head<3>() = s.wrench.force / kForceScale;
  w.tail<3>() = s.wrench.torque / kTorqueScale;
  return w;
}

struct HeadState {
  Eigen::Vector3d a1, a2, c1, c2, c3, target;
  double n1 = 0.0, n2 = 0.0, align = 0.0;
  bool kept = false;
};

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.shape = std::move(shape);
  size_t n = 1;
  for (const int d : t.shape) {
    if (d <= 0) throw UsageError("tensor dimensions must be positive");
    n *= static_cast<size_t>(d);
  }
  t.data.assign(n, 0.0);
  return t;
}

Architecture architecture_from_string(const std::string& name) {
  if (name == "nn-tactile") return Architecture::Tactile;
  if (name == "nn-ft") return Architecture::Ft;
  if (name == "nn-tactile-ft") return Architecture::TactileFt;
  throw UsageError("unknown architecture '" + name +
                   "' (want nn-tactile, nn-ft or nn-tactile-ft)");
}

const char* architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::Tactile: return "nn-tactile";
    case Architecture::Ft: return "nn-ft";
    case Architecture::TactileFt: return "nn-tactile-ft";
  }
  throw UsageError("unknown architecture");
}

std::vector<LayerSpec> architecture_layers(Architecture arch) {
  std::vector<LayerSpec> layers;
  if (has_conv(arch)) {
    layers.push_back({"conv1.weight", {kConv1Out, 2, 3, 3}});
    layers.push_back({"conv1.bias", {kConv1Out}});
    layers.push_back({"conv2.weight", {kConv2Out, kConv1Out, 3, 3}});
    layers.push_back({"conv2.bias", {kConv2Out}});
  }
  layers.push_back({"fc1.weight", {kHidden, input_width(arch)}});
  layers.push_back({"fc1.bias", {kHidden}});
  layers.push_back({"fc2.weight", {kHidden, kHidden}});
  layers.push_back({"fc2.bias", {kHidden}});
  layers.push_back({"head.weight", {kHeadDim, kHidden}});
  layers.push_back({"head.bias", {kHeadDim}});
  return layers;
}

uint64_t architecture_fingerprint(Architecture arch) {
  std::string text = std::string("arch:") + architecture_name(arch) + "\n";
  for (const LayerSpec& l : architecture_layers(arch)) {
    text += l.name;
    text.push_back(':');
    for (size_t i = 0; i < l.shape.size(); ++i) {
      if (i) text.push_back(',');
      text += std::to_string(l.shape[i]);
    }
    text.push_back('\n');
  }
  return fnv1a(text);
}

Tensor& NetworkParams::at(const std::string& name) {
  const auto layers = architecture_layers(arch);
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return tensors[i];
  throw UsageError("no tensor named '" + name + "'");
}

const Tensor& NetworkParams::at(const std::string& name) const {
  return const_cast<NetworkParams*>(this)->at(name);
}

NetworkParams init_network(Architecture arch, uint64_t seed) {
  NetworkParams p;
  p.arch = arch;
  const auto layers = architecture_layers(arch);
  p.tensors.reserve(layers.size());
  for (size_t i = 0; i < layers.size(); ++i) {
    Tensor t = Tensor::zeros(layers[i].shape);
    if (t.shape.size() > 1) {
      // Glorot-uniform: conv kernels count each tap toward both fans.
      const int taps = t.shape.size() == 4 ? 9 : 1;
      const double fan_out = t.shape[0] * taps;
      const double fan_in = t.shape[1] * taps;
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      Rng rng(mix_seed(seed, static_cast<uint64_t>(i)));
      for (double& v : t.data) v = rng.uniform(-limit, limit);
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

Gradients zero_gradients(const NetworkParams& params) {
  Gradients g;
  g.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) g.push_back(Tensor::zeros(t.shape));
  return g;
}

struct Network::Workspace {
  RowMat x0, p1, z1, a1, p2, z2, a2, f, z3, a3, z4, a4, mask, a4d, y;
  RowMat dy, d4, d3, df, dp2, da1, dp1, dz;
  std::vector<HeadState> head;
};

Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

Network::Network(NetworkParams params)
    : params_(std::move(params)), ws_(std::make_unique<Workspace>()) {
  const auto layers = architecture_layers(params_.arch);
  if (params_.tensors.size() != layers.size())
    throw UsageError("parameter table does not match the architecture");
  for (size_t i = 0; i < layers.size(); ++i)
    if (params_.tensors[i].shape != layers[i].shape)
      throw UsageError("tensor '" + layers[i].name + "' has the wrong shape");
}

BatchResult Network::run_batch(const std::vector<const Sample*>& batch,
                               double dropout_rate, uint64_t dropout_seed,
                               Gradients* grads) {
  if (batch.empty()) throw UsageError("empty batch");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw UsageError("dropout_rate must be in [0, 1)");
  const int bsz = static_cast<int>(batch.size());
  const Architecture arch = params_.arch;
  Workspace& w = *ws_;

  const Tensor& fc1w = params_.at("fc1.weight");
  const Tensor& fc1b = params_.at("fc1.bias");
  const Tensor& fc2w = params_.at("fc2.weight");
  const Tensor& fc2b = params_.at("fc2.bias");
  const Tensor& hw = params_.at("head.weight");
  const Tensor& hb = params_.at("head.bias");
  const int in_width = input_width(arch);

  // Forward: conv stack.
  if (has_conv(arch)) {
    const auto w1 = matrix_view(params_.at("conv1.weight"), kConv1Out, 18);
    const auto w2 = matrix_view(params_.at("conv2.weight"), kConv2Out,
                                kConv1Out * 9);
    w.x0.resize(static_cast<Eigen::Index>(bsz) * kImageSide * kImageSide, 2);
    for (int b = 0; b < bsz; ++b) {
      const TactileFrame& t = batch[static_cast<size_t>(b)]->tactile;
      for (int i = 0; i < kTaxelCount; ++i) {
        w.x0(static_cast<Eigen::Index>(b) * kTaxelCount + i, 0) = t.left[i];
        w.x0(static_cast<Eigen::Index>(b) * kTaxelCount + i, 1) = t.right[i];
      }
    }
    gather_patches(w.x0, w.p1, bsz, kImageSide, 2);
    w.z1.noalias() = w.p1 * w1.transpose();
    w.z1.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(
        params_.at("conv1.bias").data.data(), kConv1Out);
    w.a1 = w.z1.cwiseMax(0.0);

    gather_patches(w.a1, w.p2, bsz, kConv1Side, kConv1Out);
    w.z2.noalias() = w.p2 * w2.transpose();
    w.z2.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(
        params_.at("conv2.bias").data.data(), kConv2Out);
    w.a2 = w.z2.cwiseMax(0.0);
  }

  // Flatten keeps the (pixel row, pixel col, channel) order; the wrench, when
  // present, goes after the image features.
  w.f.resize(bsz, in_width);
  for (int b = 0; b < bsz; ++b) {
    double* dst = w.f.row(b).data();
    if (has_conv(arch)) {
      std::memcpy(dst, w.a2.row(static_cast<Eigen::Index>(b) * kConv2Side * kConv2Side).data(),
                  sizeof(double) * kFlatten);
      dst += kFlatten;
    }
    if (arch != Architecture::Tactile) {
      const auto wr = scaled_wrench(*batch[static_cast<size_t>(b)]);
      std::memcpy(dst, wr.data(), sizeof(double) * kWrenchDim);
    }
  }

  w.z3.noalias() = w.f * matrix_view(fc1w, kHidden, in_width).transpose();
  w.z3.rowwise() +=
      Eigen::Map<const Eigen::RowVectorXd>(fc1b.data.data(), kHidden);
  w.a3 = w.z3.cwiseMax(0.0);

  w.z4.noalias() = w.a3 * matrix_view(fc2w, kHidden, kHidden).transpose();
  w.z4.rowwise() +=
      Eigen::Map<const Eigen::RowVectorXd>(fc2b.data.data(), kHidden);
  w.a4 = w.z4.cwiseMax(0.0);

  if (dropout_rate > 0.0) {
    w.mask.resize(bsz, kHidden);
    Rng rng(mix_seed(dropout_seed, 0xd70u));
    const double keep_scale = 1.0 / (1.0 - dropout_rate);
    for (int b = 0; b < bsz; ++b)
      for (int j = 0; j < kHidden; ++j)
        w.mask(b, j) = rng.uniform01() < dropout_rate ? 0.0 : keep_scale;
    w.a4d = w.a4.cwiseProduct(w.mask);
  } else {
    w.a4d = w.a4;
  }

  w.y.noalias() = w.a4d * matrix_view(hw, kHeadDim, kHidden).transpose();
  w.y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(hb.data.data(), kHeadDim);

  // Head: Gram-Schmidt the 6-d output, compare the predicted placing axis
  // with the label, accumulate acos alignment loss.
  w.head.assign(static_cast<size_t>(bsz), HeadState{});
  BatchResult result;
  double loss_sum = 0.0;
  int kept = 0;
  for (int b = 0; b < bsz; ++b) {
    HeadState& h = w.head[static_cast<size_t>(b)];
    h.a1 = w.y.row(b).head<3>().transpose();
    h.a2 = w.y.row(b).tail<3>().transpose();
    h.n1 = h.a1.norm();
    const Sample& s = *batch[static_cast<size_t>(b)];
    h.target = s.r_world_gripper.matrix().transpose() * s.z_gt_world.vec();
    if (h.n1 <= kHeadEps) {
      if (result.first_skipped < 0) result.first_skipped = b;
      ++result.skipped;
      continue;
    }
    h.c1 = h.a1 / h.n1;
    const Eigen::Vector3d u2 = h.a2 - h.c1.dot(h.a2) * h.c1;
    h.n2 = u2.norm();
    if (h.n2 <= kHeadEps) {
      if (result.first_skipped < 0) result.first_skipped = b;
      ++result.skipped;
      continue;
    }
    h.c2 = u2 / h.n2;
    h.c3 = h.c1.cross(h.c2);
    h.align = h.c3.dot(h.target);
    h.kept = true;
    loss_sum += std::acos(std::clamp(h.align, -1.0, 1.0));
    ++kept;
  }
  result.mean_loss =
      kept > 0 ? loss_sum / kept : std::numeric_limits<double>::quiet_NaN();
  if (!grads) return result;
  if (kept == 0) return result;

  // Backward. The loss is acos of the alignment; its slope is clamped a hair
  // inside +-1 so perfect predictions keep a finite gradient.
  w.dy.resize(bsz, kHeadDim);
  w.dy.setZero();
  for (int b = 0; b < bsz; ++b) {
    const HeadState& h = w.head[static_cast<size_t>(b)];
    if (!h.kept) continue;
    const double xm = std::clamp(h.align, -1.0 + kAcosGuard, 1.0 - kAcosGuard);
    const double slope = -1.0 / (std::sqrt(1.0 - xm * xm) * kept);
    const Eigen::Vector3d u3 = slope * h.target;       // dL/dc3
    Eigen::Vector3d dc1 = h.c2.cross(u3);              // via c3 = c1 x c2
    const Eigen::Vector3d dc2 = u3.cross(h.c1);
    const Eigen::Vector3d du2 = (dc2 - dc2.dot(h.c2) * h.c2) / h.n2;
    const Eigen::Vector3d da2 = du2 - h.c1.dot(du2) * h.c1;
    dc1 += -h.c1.dot(du2) * h.a2 - h.c1.dot(h.a2) * du2;
    const Eigen::Vector3d da1 = (dc1 - dc1.dot(h.c1) * h.c1) / h.n1;
    w.dy.row(b).head<3>() = da1.transpose();
    w.dy.row(b).tail<3>() = da2.transpose();
  }

  const auto layers = architecture_layers(arch);
  auto grad_of = [&](const char* name) -> Tensor& {
    for (size_t i = 0; i < layers.size(); ++i)
      if (layers[i].name == name) return (*grads)[i];
    throw UsageError("gradient table mismatch");
  };

  // head
  {
    auto gw = matrix_view(grad_of("head.weight"), kHeadDim, kHidden);
    gw.noalias() += w.dy.transpose() * w.a4d;
    Eigen::Map<Eigen::RowVectorXd> gb(grad_of("head.bias").data.data(), kHeadDim);
    gb += w.dy.colwise().sum();
    w.d4.noalias() = w.dy * matrix_view(hw, kHeadDim, kHidden);
  }
  if (dropout_rate > 0.0) w.d4 = w.d4.cwiseProduct(w.mask);
  w.d4 = w.d4.cwiseProduct((w.z4.array() > 0.0).cast<double>().matrix());

  // fc2
  {
    auto gw = matrix_view(grad_of("fc2.weight"), kHidden, kHidden);
    gw.noalias() += w.d4.transpose() * w.a3;
    Eigen::Map<Eigen::RowVectorXd> gb(grad_of("fc2.bias").data.data(), kHidden);
    gb += w.d4.colwise().sum();
    w.d3.noalias() = w.d4 * matrix_view(fc2w, kHidden, kHidden);
  }
  w.d3 = w.d3.cwiseProduct((w.z3.array() > 0.0).cast<double>().matrix());

  // fc1
  {
    auto gw = matrix_view(grad_of("fc1.weight"), kHidden, in_width);
    gw.noalias() += w.d3.transpose() * w.f;
    Eigen::Map<Eigen::RowVectorXd> gb(grad_of("fc1.bias").data.data(), kHidden);
    gb += w.d3.colwise().sum();
    if (!has_conv(arch)) return result;
    w.df.noalias() = w.d3 * matrix_view(fc1w, kHidden, in_width);
  }

  // un-flatten into conv2 activations; the wrench tail has no parameters
  // upstream of the input, so its gradient stops here.
  w.dz.resize(static_cast<Eigen::Index>(bsz) * kConv2Side * kConv2Side, kConv2Out);
  for (int b = 0; b < bsz; ++b)
    std::memcpy(w.dz.row(static_cast<Eigen::Index>(b) * kConv2Side * kConv2Side).data(),
                w.df.row(b).data(), sizeof(double) * kFlatten);
  w.dz = w.dz.cwiseProduct((w.z2.array() > 0.0).cast<double>().matrix());

  // conv2
  {
    const auto w2 = matrix_view(params_.at("conv2.weight"), kConv2Out,
                                kConv1Out * 9);
    auto gw = matrix_view(grad_of("conv2.weight"), kConv2Out, kConv1Out * 9);
    gw.noalias() += w.dz.transpose() * w.p2;
    Eigen::Map<Eigen::RowVectorXd> gb(grad_of("conv2.bias").data.data(), kConv2Out);
    gb += w.dz.colwise().sum();
    w.dp2.noalias() = w.dz * w2;
  }
  scatter_patches(w.dp2, w.da1, bsz, kConv1Side, kConv1Out);
  w.da1 = w.da1.cwiseProduct((w.z1.array() > 0.0).cast<double>().matrix());

  // conv1
  {
    auto gw = matrix_view(grad_of("conv1.weight"), kConv1Out, 18);
    gw.noalias() += w.da1.transpose() * w.p1;
    Eigen::Map<Eigen::RowVectorXd> gb(grad_of("conv1.bias").data.data(), kConv1Out);
    gb += w.da1.colwise().sum();
  }
  return result;
}

Rotation6d Network::forward_6d(const Sample& s) {
  const std::vector<const Sample*> batch{&s};
  run_batch(batch, 0.0, 0, nullptr);
  Rotation6d out;
  out.a1 = ws_->y.row(0).head<3>().transpose();
  out.a2 = ws_->y.row(0).tail<3>().transpose();
  return out;
}

Rotation Network::predict(const Sample& s) {
  return sixd_to_rotation(forward_6d(s));
}

SgdMomentum::SgdMomentum(const NetworkParams& params) {
  velocity.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) velocity.push_back(Tensor::zeros(t.shape));
}

void SgdMomentum::step(NetworkParams& params, const Gradients& grads, double lr,
                       double momentum) {
  if (grads.size() != params.tensors.size() ||
      velocity.size() != params.tensors.size())
    throw UsageError("optimizer state does not match the parameters");
  for (size_t i = 0; i < params.tensors.size(); ++i) {
    Tensor& p = params.tensors[i];
    Tensor& v = velocity[i];
    const Tensor& g = grads[i];
    for (size_t j = 0; j < p.data.size(); ++j) {
      v.data[j] = momentum * v.data[j] + g.data[j];
      p.data[j] -= lr * v.data[j];
    }
  }
}

double clip_gradients(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& t : grads)
    for (const double v : t.data) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Tensor& t : grads)
      for (double& v : t.data) v *= scale;
  }
  return norm;
}

namespace {

void append_u32(std::string& s, uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  s.append(buf, 4);
}

void append_u64(std::string& s, uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  s.append(buf, 8);
}

struct Cursor {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw IoError("truncated checkpoint");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    if (n > 4096) throw IoError("corrupt checkpoint string");
    need(n);
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params) {
  const auto layers = architecture_layers(params.arch);
  if (params.tensors.size() != layers.size())
    throw UsageError("parameter table does not match the architecture");

  std::string out;
  out.append(kMagic, sizeof(kMagic));
  append_u32(out, kCheckpointVersion);
  const std::string name = architecture_name(params.arch);
  append_u32(out, static_cast<uint32_t>(name.size()));
  out += name;
  append_u64(out, architecture_fingerprint(params.arch));
  append_u32(out, static_cast<uint32_t>(layers.size()));
  for (const LayerSpec& l : layers) {
    append_u32(out, static_cast<uint32_t>(l.name.size()));
    out += l.name;
    append_u32(out, static_cast<uint32_t>(l.shape.size()));
    for (const int d : l.shape) append_u32(out, static_cast<uint32_t>(d));
  }
  for (const Tensor& t : params.tensors)
    out.append(reinterpret_cast<const char*>(t.data.data()),
               t.data.size() * sizeof(double));
  atomic_write_file(path, out);
}

NetworkParams load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  Cursor c{buf};
  c.need(sizeof(kMagic));
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw IoError("'" + path + "' is not a network checkpoint");
  c.pos = sizeof(kMagic);
  if (c.u32() != kCheckpointVersion)
    throw IoError("unsupported checkpoint version in '" + path + "'");

  const std::string arch_name = c.str();
  Architecture arch;
  try {
    arch = architecture_from_string(arch_name);
  } catch (const UsageError&) {
    throw FingerprintMismatchError("checkpoint architecture '" + arch_name +
                                   "' is unknown");
  }
  const uint64_t fp = c.u64();
  if (fp != architecture_fingerprint(arch))
    throw FingerprintMismatchError("checkpoint fingerprint does not match '" +
                                   arch_name + "'");

  const auto expected = architecture_layers(arch);
  if (c.u32() != expected.size())
    throw FingerprintMismatchError("checkpoint layer table does not match '" +
                                   arch_name + "'");
  for (const LayerSpec& l : expected) {
    if (c.str() != l.name)
      throw FingerprintMismatchError("checkpoint layer table does not match '" +
                                     arch_name + "'");
    const uint32_t ndim = c.u32();
    if (ndim != l.shape.size())
      throw FingerprintMismatchError("checkpoint layer table does not match '" +
                                     arch_name + "'");
    for (const int d : l.shape)
      if (c.u32() != static_cast<uint32_t>(d))
        throw FingerprintMismatchError(
            "checkpoint layer table does not match '" + arch_name + "'");
  }

  NetworkParams params;
  params.arch = arch;
  for (const LayerSpec& l : expected) {
    Tensor t = Tensor::zeros(l.shape);
    const size_t bytes = t.data.size() * sizeof(double);
    c.need(bytes);
    std::memcpy(t.data.data(), buf.data() + c.pos, bytes);
    c.pos += bytes;
    params.tensors.push_back(std::move(t));
  }
  if (c.pos != buf.size()) throw IoError("trailing bytes in '" + path + "'");
  return params;
}

void require_architecture(const NetworkParams& params, Architecture expected) {
  if (params.arch != expected)
    throw FingerprintMismatchError(
        std::string("checkpoint holds ") + architecture_name(params.arch) +
        " but " + architecture_name(expected) + " was requested");
}

}  // namespace placing
