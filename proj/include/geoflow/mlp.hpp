#pragma once

#include <span>
#include <string>
#include <vector>

#include "geoflow/param_store.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/tensor.hpp"

namespace geoflow {

enum class Activation { Silu, Relu, Tanh, Identity };

Activation activation_from_name(std::string_view name);
std::string_view activation_name(Activation a);

struct MlpSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden;
  Activation act = Activation::Silu;
  /// Frequency count for the sinusoidal encoding of coordinate/scalar inputs.
  /// Applied by the feature builders, not inside the network itself.
  std::size_t pe_frequencies = 4;
  bool zero_init_output = false;

  void validate() const;  // widths >= 1
};

/// Plain fully connected network bound to named tensors in a ParamStore
/// ("<prefix>.l<k>.w" / ".b"). Forward is deterministic; backward accumulates
/// parameter gradients into a gradient store and returns input gradients,
/// which callers chain through encodings and loss heads.
class Mlp {
 public:
  /// Registers freshly initialized parameters in `store`.
  Mlp(ParamStore& store, std::string prefix, const MlpSpec& spec, RngStream& init);
  /// Binds to already existing parameters (checkpoint load path).
  static Mlp attached(const ParamStore& store, std::string prefix, const MlpSpec& spec);

  Tensor forward(const ParamStore& store, const Tensor& x) const;

  struct Cache {
    std::vector<Tensor> inputs;  // input to each linear layer
    std::vector<Tensor> pre;     // pre-activation of each hidden layer
  };
  Tensor forward(const ParamStore& store, const Tensor& x, Cache& cache) const;

  /// dY -> dX; parameter gradients are accumulated into `grads`, creating
  /// entries on first touch.
  Tensor backward(const ParamStore& store, const Cache& cache, const Tensor& dy,
                  ParamStore& grads) const;

  const MlpSpec& spec() const { return spec_; }
  const std::vector<std::string>& weight_names() const { return w_names_; }
  const std::vector<std::string>& bias_names() const { return b_names_; }

  Mlp() = default;  // unbound; assign from the registering constructor or attached()

 private:
  std::size_t layers() const { return w_names_.size(); }

  MlpSpec spec_;
  std::string prefix_;
  std::vector<std::string> w_names_, b_names_;
};

/// Sinusoidal positional encoding: per component x emits
/// [x, sin(2^0 x), cos(2^0 x), ..., sin(2^{F-1} x), cos(2^{F-1} x)].
std::size_t posenc_dim(std::size_t dims, std::size_t freqs);
void posenc_write(std::span<const double> x, std::size_t freqs, double* out);

}  // namespace geoflow
