#include "geoflow/mlp.hpp"

#include <cmath>

#include "geoflow/errors.hpp"
#include "geoflow/parallel.hpp"

namespace geoflow {

namespace {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
  double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

void apply_activation(Activation act, Tensor& t) {
  switch (act) {
    case Activation::Silu:
      for (double& x : t.v) x = silu(x);
      break;
    case Activation::Relu:
      for (double& x : t.v) x = x > 0 ? x : 0;
      break;
    case Activation::Tanh:
      for (double& x : t.v) x = std::tanh(x);
      break;
    case Activation::Identity:
      break;
  }
}

// dy *= act'(pre), elementwise
void activation_backward(Activation act, const Tensor& pre, Tensor& dy) {
  switch (act) {
    case Activation::Silu:
      for (std::size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= silu_grad(pre.v[i]);
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= pre.v[i] > 0 ? 1.0 : 0.0;
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < dy.v.size(); ++i) {
        double th = std::tanh(pre.v[i]);
        dy.v[i] *= 1.0 - th * th;
      }
      break;
    case Activation::Identity:
      break;
  }
}

}  // namespace

Activation activation_from_name(std::string_view name) {
  if (name == "silu") return Activation::Silu;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw InvalidInput("unknown activation: " + std::string(name));
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Silu: return "silu";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "silu";
}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw InvalidInput("MlpSpec: widths must be >= 1");
  for (std::size_t h : hidden) {
    if (h < 1) throw InvalidInput("MlpSpec: widths must be >= 1");
  }
}

Mlp::Mlp(ParamStore& store, std::string prefix, const MlpSpec& spec, RngStream& init) {
  spec.validate();
  spec_ = spec;
  prefix_ = std::move(prefix);
  std::vector<std::size_t> widths;
  widths.push_back(spec.input_dim);
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(spec.output_dim);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::size_t in = widths[l], out = widths[l + 1];
    Tensor w = Tensor::zeros({out, in});
    const bool last = l + 2 == widths.size();
    if (!(last && spec.zero_init_output)) {
      double scale = std::sqrt(2.0 / static_cast<double>(in));
      for (double& x : w.v) x = scale * init.normal();
    }
    std::string wname = prefix_ + ".l" + std::to_string(l) + ".w";
    std::string bname = prefix_ + ".l" + std::to_string(l) + ".b";
    store.add(wname, std::move(w));
    store.add(bname, Tensor::zeros({out}));
    w_names_.push_back(wname);
    b_names_.push_back(bname);
  }
}

Mlp Mlp::attached(const ParamStore& store, std::string prefix, const MlpSpec& spec) {
  spec.validate();
  Mlp m;
  m.spec_ = spec;
  m.prefix_ = std::move(prefix);
  std::size_t layer_count = spec.hidden.size() + 1;
  for (std::size_t l = 0; l < layer_count; ++l) {
    std::string wname = m.prefix_ + ".l" + std::to_string(l) + ".w";
    std::string bname = m.prefix_ + ".l" + std::to_string(l) + ".b";
    if (!store.has(wname) || !store.has(bname))
      throw InvalidInput("Mlp::attached: missing tensor " + wname);
    m.w_names_.push_back(wname);
    m.b_names_.push_back(bname);
  }
  return m;
}

Tensor Mlp::forward(const ParamStore& store, const Tensor& x) const {
  Cache cache;
  return forward(store, x, cache);
}

Tensor Mlp::forward(const ParamStore& store, const Tensor& x, Cache& cache) const {
  if (x.cols() != spec_.input_dim) throw InvalidInput("Mlp::forward: input width mismatch");
  cache.inputs.clear();
  cache.pre.clear();
  Tensor cur = x;
  for (std::size_t l = 0; l < layers(); ++l) {
    cache.inputs.push_back(cur);
    Tensor next;
    linear_forward(cur, store.at(w_names_[l]), store.at(b_names_[l]), next);
    if (l + 1 < layers()) {
      cache.pre.push_back(next);
      apply_activation(spec_.act, next);
    }
    cur = std::move(next);
  }
  return cur;
}

Tensor Mlp::backward(const ParamStore& store, const Cache& cache, const Tensor& dy,
                     ParamStore& grads) const {
  Tensor cur = dy;
  for (std::size_t l = layers(); l-- > 0;) {
    if (l + 1 < layers()) activation_backward(spec_.act, cache.pre[l], cur);
    const Tensor& w = store.at(w_names_[l]);
    if (!grads.has(w_names_[l])) {
      grads.add(w_names_[l], Tensor::zeros(w.shape));
      grads.add(b_names_[l], Tensor::zeros(store.at(b_names_[l]).shape));
    }
    linear_backward_params(cur, cache.inputs[l], grads.at(w_names_[l]), grads.at(b_names_[l]));
    Tensor dx;
    linear_backward_input(cur, w, dx);
    cur = std::move(dx);
  }
  return cur;
}

std::size_t posenc_dim(std::size_t dims, std::size_t freqs) { return dims * (1 + 2 * freqs); }

void posenc_write(std::span<const double> x, std::size_t freqs, double* out) {
  std::size_t k = 0;
  for (double xi : x) {
    out[k++] = xi;
    double f = 1.0;
    for (std::size_t j = 0; j < freqs; ++j) {
      out[k++] = std::sin(f * xi);
      out[k++] = std::cos(f * xi);
      f *= 2.0;
    }
  }
}

}  // namespace geoflow
