#include "geoflow/flow.hpp"

#include <cmath>

#include "geoflow/errors.hpp"

namespace geoflow {

void FlowBatch::validate() const {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols())
    throw InvalidInput("FlowBatch: x0/x1 shape mismatch");
  if (t.size() != x0.rows()) throw InvalidInput("FlowBatch: t length mismatch");
  if (cond.size() > 0 && cond.rows() != x0.rows())
    throw InvalidInput("FlowBatch: cond batch mismatch");
  for (double ti : t) {
    if (!(ti >= 0.0 && ti <= 1.0)) throw InvalidInput("FlowBatch: t outside [0,1]");
  }
}

void SamplerConfig::validate() const {
  if (steps < 1) throw InvalidInput("SamplerConfig: steps must be >= 1");
}

SamplerConfig::Scheme scheme_from_name(std::string_view name) {
  if (name == "euler") return SamplerConfig::Scheme::Euler;
  if (name == "heun") return SamplerConfig::Scheme::Heun;
  throw InvalidInput("unknown sampler scheme: " + std::string(name));
}

Tensor interpolate(const Tensor& x0, const Tensor& x1, std::span<const double> t) {
  if (!x0.same_shape(x1) || t.size() != x0.rows())
    throw InvalidInput("interpolate: shape mismatch");
  for (double ti : t) {
    if (!(ti >= 0.0 && ti <= 1.0)) throw InvalidInput("interpolate: t outside [0,1]");
  }
  Tensor xt = x0;
  const std::size_t d = x0.cols();
  for (std::size_t r = 0; r < x0.rows(); ++r) {
    const double tr = t[r];
    const double* a = x0.row_ptr(r);
    const double* b = x1.row_ptr(r);
    double* o = xt.row_ptr(r);
    for (std::size_t j = 0; j < d; ++j) o[j] = (1.0 - tr) * a[j] + tr * b[j];
  }
  return xt;
}

double fm_loss(const VelocityField& field, const FlowBatch& batch) {
  batch.validate();
  Tensor xt = interpolate(batch.x0, batch.x1, batch.t);
  Tensor u = field.velocity(xt, batch.t, batch.cond);
  double acc = 0;
  for (std::size_t i = 0; i < u.v.size(); ++i) {
    double r = u.v[i] - (batch.x1.v[i] - batch.x0.v[i]);
    acc += r * r;
  }
  return acc / static_cast<double>(batch.x0.rows());
}

Tensor integrate(const VelocityField& field, Tensor x0, const Tensor& cond,
                 const SamplerConfig& cfg) {
  cfg.validate();
  const std::size_t B = x0.rows();
  const double h = 1.0 / static_cast<double>(cfg.steps);
  std::vector<double> t(B), t2(B);
  Tensor x = std::move(x0);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const double tk = static_cast<double>(k) * h;
    std::fill(t.begin(), t.end(), tk);
    Tensor u = field.velocity(x, t, cond);
    if (cfg.scheme == SamplerConfig::Scheme::Euler) {
      for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += h * u.v[i];
    } else {
      Tensor xp = x;
      for (std::size_t i = 0; i < xp.v.size(); ++i) xp.v[i] += h * u.v[i];
      std::fill(t2.begin(), t2.end(), std::min(1.0, tk + h));
      Tensor u2 = field.velocity(xp, t2, cond);
      for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += 0.5 * h * (u.v[i] + u2.v[i]);
    }
    if (!x.finite())
      throw NumericFailure("integrate: non-finite state at step " + std::to_string(k + 1) +
                           " of " + std::to_string(cfg.steps) + " (t=" + std::to_string(tk) + ")");
  }
  return x;
}

MlpVelocityField::MlpVelocityField(ParamStore& store, std::string prefix, const Options& opt,
                                   RngStream& init)
    : store_(&store), opt_(opt) {
  MlpSpec spec;
  spec.input_dim = posenc_dim(opt.state_dim, opt.x_frequencies) +
                   posenc_dim(1, opt.t_frequencies) + opt.cond_dim;
  spec.output_dim = opt.state_dim;
  spec.hidden = opt.hidden;
  spec.act = opt.act;
  spec.pe_frequencies = opt.x_frequencies;
  spec.zero_init_output = opt.zero_init_output;
  net_ = Mlp(store, std::move(prefix), spec, init);
}

MlpVelocityField MlpVelocityField::attached(const ParamStore& store, std::string prefix,
                                            const Options& opt) {
  MlpVelocityField f;
  f.store_ = &store;
  f.opt_ = opt;
  MlpSpec spec;
  spec.input_dim = posenc_dim(opt.state_dim, opt.x_frequencies) +
                   posenc_dim(1, opt.t_frequencies) + opt.cond_dim;
  spec.output_dim = opt.state_dim;
  spec.hidden = opt.hidden;
  spec.act = opt.act;
  spec.pe_frequencies = opt.x_frequencies;
  f.net_ = Mlp::attached(store, std::move(prefix), spec);
  return f;
}

Tensor MlpVelocityField::features(const Tensor& x, std::span<const double> t,
                                  const Tensor& cond) const {
  if (x.cols() != opt_.state_dim) throw InvalidInput("MlpVelocityField: state width mismatch");
  if (cond.size() == 0 ? opt_.cond_dim != 0 : cond.cols() != opt_.cond_dim)
    throw InvalidInput("MlpVelocityField: conditioning width mismatch");
  const std::size_t B = x.rows();
  const std::size_t xw = posenc_dim(opt_.state_dim, opt_.x_frequencies);
  const std::size_t tw = posenc_dim(1, opt_.t_frequencies);
  Tensor f = Tensor::zeros({B, xw + tw + opt_.cond_dim});
  for (std::size_t r = 0; r < B; ++r) {
    double* o = f.row_ptr(r);
    posenc_write(x.row_span(r), opt_.x_frequencies, o);
    posenc_write(std::span<const double>(&t[r], 1), opt_.t_frequencies, o + xw);
    if (opt_.cond_dim > 0) {
      const double* c = cond.row_ptr(r);
      std::copy(c, c + opt_.cond_dim, o + xw + tw);
    }
  }
  return f;
}

Tensor MlpVelocityField::velocity(const Tensor& x, std::span<const double> t,
                                  const Tensor& cond) const {
  return net_.forward(*store_, features(x, t, cond));
}

double MlpVelocityField::fm_loss_grad(const FlowBatch& batch, ParamStore& grads,
                                      Tensor* dcond) const {
  batch.validate();
  Tensor xt = interpolate(batch.x0, batch.x1, batch.t);
  Tensor feat = features(xt, batch.t, batch.cond);
  Mlp::Cache cache;
  Tensor u = net_.forward(*store_, feat, cache);
  const double inv_b = 1.0 / static_cast<double>(batch.x0.rows());
  double loss = 0;
  Tensor du = Tensor::zeros(u.shape);
  for (std::size_t i = 0; i < u.v.size(); ++i) {
    double r = u.v[i] - (batch.x1.v[i] - batch.x0.v[i]);
    loss += r * r;
    du.v[i] = 2.0 * r * inv_b;
  }
  Tensor dfeat = net_.backward(*store_, cache, du, grads);
  if (dcond != nullptr && opt_.cond_dim > 0) {
    const std::size_t off = posenc_dim(opt_.state_dim, opt_.x_frequencies) +
                            posenc_dim(1, opt_.t_frequencies);
    *dcond = Tensor::zeros({batch.x0.rows(), opt_.cond_dim});
    for (std::size_t r = 0; r < batch.x0.rows(); ++r) {
      const double* src = dfeat.row_ptr(r) + off;
      std::copy(src, src + opt_.cond_dim, dcond->row_ptr(r));
    }
  }
  return loss * inv_b;
}

}  // namespace geoflow
