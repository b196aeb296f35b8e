#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "placing/so3.hpp"
#include "placing/tactile.hpp"

namespace placing {

// Input variants: tactile images only, the force/torque wrench only, or both
// concatenated before the MLP.
enum class Architecture { Tactile, Ft, TactileFt };

Architecture architecture_from_string(const std::string& name);  // throws UsageError
const char* architecture_name(Architecture arch);

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  static Tensor zeros(std::vector<int> shape);
  int size() const { return static_cast<int>(data.size()); }
};

struct LayerSpec {
  std::string name;
  std::vector<int> shape;
};

// Parameter table in declaration order. The conv stack (tactile variants)
// feeds a 12*12*32 = 4608-wide flatten; the wrench contributes 6 inputs.
std::vector<LayerSpec> architecture_layers(Architecture arch);

// FNV-1a over the canonical layer-table text; checkpoints carry it so a file
// can never be loaded into a mismatched network.
uint64_t architecture_fingerprint(Architecture arch);

struct NetworkParams {
  Architecture arch = Architecture::Tactile;
  std::vector<Tensor> tensors;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
};

// Glorot-uniform weights, zero biases, reproducible from the seed.
NetworkParams init_network(Architecture arch, uint64_t seed);

using Gradients = std::vector<Tensor>;
Gradients zero_gradients(const NetworkParams& params);

struct BatchResult {
  double mean_loss = 0.0;  // over kept samples; NaN if none were kept
  int skipped = 0;         // samples with a degenerate 6-d head output
  int first_skipped = -1;
};

class Network {
 public:
  explicit Network(NetworkParams params);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  const NetworkParams& params() const { return params_; }
  NetworkParams& params() { return params_; }
  Architecture arch() const { return params_.arch; }

  // Angular loss averaged over the batch. With grads != nullptr the full
  // backward pass runs and accumulates into *grads (which must be zeroed by
  // the caller). dropout_rate > 0 applies inverted dropout after the second
  // hidden layer, drawn from dropout_seed.
  BatchResult run_batch(const std::vector<const Sample*>& batch,
                        double dropout_rate, uint64_t dropout_seed,
                        Gradients* grads);

  // Inference path: no dropout, throws DegenerateInputError if the 6-d
  // output cannot be orthonormalized.
  Rotation6d forward_6d(const Sample& s);
  Rotation predict(const Sample& s);

 private:
  struct Workspace;
  NetworkParams params_;
  std::unique_ptr<Workspace> ws_;
};

// Plain SGD with momentum: v = mu * v + g; p -= lr * v.
struct SgdMomentum {
  std::vector<Tensor> velocity;

  explicit SgdMomentum(const NetworkParams& params);
  void step(NetworkParams& params, const Gradients& grads, double lr,
            double momentum);
};

// Scales gradients so their global l2 norm is at most max_norm; returns the
// norm before clipping.
double clip_gradients(Gradients& grads, double max_norm);

// Binary checkpoint: magic, format version, architecture name and
// fingerprint, the layer table, then raw little-endian f64 in declaration
// order. Structural damage raises IoError; a table or fingerprint that does
// not match the named architecture raises FingerprintMismatchError.
void save_checkpoint(const std::string& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::string& path);

// Guards eval/infer against a checkpoint trained for a different input
// variant.
void require_architecture(const NetworkParams& params, Architecture expected);

}  // namespace placing
