#include "geoflow/geodist.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "geoflow/errors.hpp"
#include "geoflow/optimizer.hpp"
#include "geoflow/sampling.hpp"

namespace geoflow::geodist {

namespace {

std::vector<double> body_conditioning_of(const BodyParams& body) { return body.conditioning(); }

}  // namespace

std::size_t GeoDistModel::cond_dim() const {
  return posenc_dim(3, cfg_.x_frequencies) +
         posenc_dim(BodyParams::kConditioningDim, cfg_.s_frequencies) + cfg_.latent_width;
}

GeoDistModel GeoDistModel::init(const std::vector<FrameInit>& frames, const GeoDistConfig& cfg,
                                RngStream& rng) {
  if (frames.empty()) throw InvalidInput("GeoDistModel::init: no frames");
  GeoDistModel m;
  m.cfg_ = cfg;
  RngStream init = rng.child("init");
  MlpVelocityField::Options opt;
  opt.state_dim = 3;
  opt.cond_dim = m.cond_dim();
  opt.x_frequencies = cfg.x_frequencies;
  opt.t_frequencies = cfg.t_frequencies;
  opt.hidden = cfg.hidden;
  opt.zero_init_output = true;
  m.field_ = MlpVelocityField(m.params_, "u", opt, init);
  RngStream lat = rng.child("latent-init");
  for (const auto& f : frames) {
    if (m.latents_.has(f.frame_id))
      throw InvalidInput("GeoDistModel::init: duplicate frame id " + f.frame_id);
    Tensor z = Tensor::zeros({cfg.latent_width});
    for (double& v : z.v) v = lat.normal();  // latents start as Gaussian noise
    m.latents_.add(f.frame_id, std::move(z));
    m.frame_ids_.push_back(f.frame_id);
    m.frame_bodies_.push_back(f.body);
  }
  return m;
}

Tensor GeoDistModel::conditioning(std::span<const Vec3> xs, const std::vector<double>& body_cond,
                                  const Tensor& z) const {
  const std::size_t pe_x = posenc_dim(3, cfg_.x_frequencies);
  const std::size_t pe_s = posenc_dim(BodyParams::kConditioningDim, cfg_.s_frequencies);
  Tensor cond = Tensor::zeros({xs.size(), cond_dim()});
  std::vector<double> s_enc(pe_s);
  posenc_write(body_cond, cfg_.s_frequencies, s_enc.data());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double* o = cond.row_ptr(i);
    const double xyz[3] = {xs[i].x, xs[i].y, xs[i].z};
    posenc_write(xyz, cfg_.x_frequencies, o);
    std::copy(s_enc.begin(), s_enc.end(), o + pe_x);
    std::copy(z.v.begin(), z.v.end(), o + pe_x + pe_s);
  }
  return cond;
}

double GeoDistModel::loss(const TransitionBatch& batch) const {
  if (!latents_.has(batch.frame_id))
    throw InvalidInput("GeoDistModel: unknown frame id " + batch.frame_id);
  const Tensor& z = latents_.at(batch.frame_id);
  const BodyParams& body = frame_body(batch.frame_id);

  FlowBatch fb;
  fb.x0 = batch.x0;
  fb.x1 = Tensor::zeros(batch.xm.shape);
  for (std::size_t i = 0; i < fb.x1.v.size(); ++i) fb.x1.v[i] = batch.xm.v[i] - batch.xs.v[i];
  fb.t = batch.t;
  std::vector<Vec3> xs(batch.xs.rows());
  for (std::size_t i = 0; i < xs.size(); ++i)
    xs[i] = {batch.xs.v[i * 3], batch.xs.v[i * 3 + 1], batch.xs.v[i * 3 + 2]};
  fb.cond = conditioning(xs, body_conditioning_of(body), z);

  double znorm = 0;
  for (double v : z.v) znorm += v * v;
  return fm_loss(field_, fb) + cfg_.beta * std::sqrt(znorm);
}

double GeoDistModel::loss_grad(const TransitionBatch& batch, ParamStore& net_grads,
                               ParamStore& latent_grads) const {
  return loss_grad_impl(batch, body_conditioning_of(frame_body(batch.frame_id)), net_grads,
                        latent_grads);
}

double GeoDistModel::loss_grad_impl(const TransitionBatch& batch,
                                    const std::vector<double>& body_cond, ParamStore& net_grads,
                                    ParamStore& latent_grads) const {
  if (!latents_.has(batch.frame_id))
    throw InvalidInput("GeoDistModel: unknown frame id " + batch.frame_id);
  const Tensor& z = latents_.at(batch.frame_id);

  FlowBatch fb;
  fb.x0 = batch.x0;
  fb.x1 = Tensor::zeros(batch.xm.shape);
  for (std::size_t i = 0; i < fb.x1.v.size(); ++i) fb.x1.v[i] = batch.xm.v[i] - batch.xs.v[i];
  fb.t = batch.t;
  std::vector<Vec3> xs(batch.xs.rows());
  for (std::size_t i = 0; i < xs.size(); ++i)
    xs[i] = {batch.xs.v[i * 3], batch.xs.v[i * 3 + 1], batch.xs.v[i * 3 + 2]};
  fb.cond = conditioning(xs, body_cond, z);

  Tensor dcond;
  double loss = field_.fm_loss_grad(fb, net_grads, &dcond);

  if (!latent_grads.has(batch.frame_id))
    latent_grads.add(batch.frame_id, Tensor::zeros({cfg_.latent_width}));
  Tensor& zg = latent_grads.at(batch.frame_id);
  const std::size_t off = cond_dim() - cfg_.latent_width;
  for (std::size_t r = 0; r < dcond.rows(); ++r) {
    const double* src = dcond.row_ptr(r) + off;
    for (std::size_t j = 0; j < cfg_.latent_width; ++j) zg.v[j] += src[j];
  }
  // d(beta*|z|_2)/dz = beta * z / |z|_2
  double znorm = 0;
  for (double v : z.v) znorm += v * v;
  znorm = std::sqrt(znorm);
  if (znorm > 0) {
    for (std::size_t j = 0; j < cfg_.latent_width; ++j)
      zg.v[j] += cfg_.beta * z.v[j] / znorm;
  }
  return loss + cfg_.beta * znorm;
}

void GeoDistModel::train(const std::vector<FrameTrainingData>& frames, RngStream& rng,
                         const ProgressFn& progress) {
  if (frames.empty()) throw InvalidInput("GeoDistModel::train: no frames");
  for (const auto& f : frames) {
    if (!latents_.has(f.frame_id))
      throw InvalidInput("GeoDistModel::train: unknown frame id " + f.frame_id);
    if (f.pairs == nullptr || f.pairs->size() == 0)
      throw InvalidInput("GeoDistModel::train: frame " + f.frame_id + " has no pairs");
  }

  AdamW opt_net({.lr = cfg_.lr});
  AdamW opt_lat({.lr = cfg_.lr_latent});
  RngStream data = rng.child("data");
  const std::size_t fpb = std::min<std::size_t>(cfg_.frames_per_batch, frames.size());
  const std::size_t rows_per_frame = std::max<std::size_t>(1, cfg_.batch / fpb);

  for (std::size_t step = 0; step < cfg_.steps; ++step) {
    ParamStore net_grads, lat_grads;
    double step_loss = 0;
    // pick the step's frames up front so conditioning augmentation can
    // shuffle shape/expression across the whole batch
    std::vector<std::size_t> picks(fpb);
    for (auto& p : picks) p = data.integer(frames.size());
    std::vector<BodyParams> bodies;
    bodies.reserve(fpb);
    for (std::size_t p : picks) bodies.push_back(frame_body(frames[p].frame_id));
    if (cfg_.augment_conditioning) {
      RngStream aug = data.child("augment", step);
      bodies = augmented_conditioning_batch(bodies, aug);
    }
    for (std::size_t k = 0; k < fpb; ++k) {
      const auto& frame = frames[picks[k]];
      const auto& pool = frame.pairs->pairs;
      TransitionBatch tb;
      tb.frame_id = frame.frame_id;
      tb.xs = Tensor::zeros({rows_per_frame, 3});
      tb.xm = Tensor::zeros({rows_per_frame, 3});
      tb.x0 = Tensor::zeros({rows_per_frame, 3});
      tb.t.resize(rows_per_frame);
      for (std::size_t r = 0; r < rows_per_frame; ++r) {
        const auto& pr = pool[data.integer(pool.size())];
        tb.xs.v[r * 3] = pr.xs.x;
        tb.xs.v[r * 3 + 1] = pr.xs.y;
        tb.xs.v[r * 3 + 2] = pr.xs.z;
        tb.xm.v[r * 3] = pr.xm.x;
        tb.xm.v[r * 3 + 1] = pr.xm.y;
        tb.xm.v[r * 3 + 2] = pr.xm.z;
        tb.x0.v[r * 3] = data.normal();
        tb.x0.v[r * 3 + 1] = data.normal();
        tb.x0.v[r * 3 + 2] = data.normal();
        tb.t[r] = data.uniform();
      }
      step_loss += loss_grad_impl(tb, bodies[k].conditioning(), net_grads, lat_grads);
    }
    step_loss /= static_cast<double>(fpb);
    if (!std::isfinite(step_loss))
      throw NumericFailure("train_geodist: non-finite loss at step " + std::to_string(step));
    if (cfg_.cosine_decay) {
      opt_net.set_lr(cosine_lr(cfg_.lr, static_cast<std::int64_t>(step),
                               static_cast<std::int64_t>(cfg_.steps)));
      opt_lat.set_lr(cosine_lr(cfg_.lr_latent, static_cast<std::int64_t>(step),
                               static_cast<std::int64_t>(cfg_.steps)));
    }
    opt_net.step(params_, net_grads);
    opt_lat.step(latents_, lat_grads);
    if (progress) progress(step, step_loss);
  }
}

SurfacePoints GeoDistModel::reconstruct(const TriMesh& proxy, const BodyParams& body,
                                        const Tensor& z, std::size_t n,
                                        const SamplerConfig& sampler, std::uint64_t seed) const {
  if (n < 1) throw InvalidInput("reconstruct: n must be >= 1");
  if (z.size() != cfg_.latent_width) throw InvalidInput("reconstruct: latent width mismatch");
  RngStream rng(seed);
  RngStream point_rng = rng.child("points");
  SurfacePoints xs = sample_surface(proxy, n, point_rng);
  RngStream noise_rng = rng.child("noise");
  Tensor x0 = Tensor::zeros({n, 3});
  for (double& v : x0.v) v = noise_rng.normal();
  Tensor cond = conditioning(xs.points, body_conditioning_of(body), z);
  Tensor x1 = integrate(field_, std::move(x0), cond, sampler);
  SurfacePoints out;
  out.source_mesh_id = "reconstruction";
  out.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.points[i] = xs.points[i] + Vec3{x1.v[i * 3], x1.v[i * 3 + 1], x1.v[i * 3 + 2]};
  }
  return out;
}

const Tensor& GeoDistModel::latent(std::string_view frame_id) const {
  if (!latents_.has(frame_id))
    throw InvalidInput("GeoDistModel: unknown frame id " + std::string(frame_id));
  return latents_.at(frame_id);
}

Tensor& GeoDistModel::latent(std::string_view frame_id) {
  if (!latents_.has(frame_id))
    throw InvalidInput("GeoDistModel: unknown frame id " + std::string(frame_id));
  return latents_.at(frame_id);
}

bool GeoDistModel::has_frame(std::string_view frame_id) const { return latents_.has(frame_id); }

const BodyParams& GeoDistModel::frame_body(std::string_view frame_id) const {
  for (std::size_t i = 0; i < frame_ids_.size(); ++i) {
    if (frame_ids_[i] == frame_id) return frame_bodies_[i];
  }
  throw InvalidInput("GeoDistModel: unknown frame id " + std::string(frame_id));
}

void GeoDistModel::save(const std::filesystem::path& checkpoint,
                        const std::filesystem::path& latent_sidecar,
                        const std::filesystem::path& meta) const {
  params_.save(checkpoint);
  latents_.save(latent_sidecar);
  nlohmann::json j;
  j["latent_width"] = cfg_.latent_width;
  j["beta"] = cfg_.beta;
  j["hidden"] = cfg_.hidden;
  j["x_frequencies"] = cfg_.x_frequencies;
  j["t_frequencies"] = cfg_.t_frequencies;
  j["s_frequencies"] = cfg_.s_frequencies;
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t i = 0; i < frame_ids_.size(); ++i) {
    nlohmann::json f;
    f["id"] = frame_ids_[i];
    f["shape"] = frame_bodies_[i].shape;
    f["pose"] = frame_bodies_[i].pose;
    f["expression"] = frame_bodies_[i].expression;
    frames.push_back(f);
  }
  j["frames"] = frames;
  std::ofstream out(meta);
  if (!out) throw InvalidInput("GeoDistModel::save: cannot open " + meta.string());
  out << j.dump(2) << "\n";
}

GeoDistModel GeoDistModel::load(const std::filesystem::path& checkpoint,
                                const std::filesystem::path& latent_sidecar,
                                const std::filesystem::path& meta) {
  std::ifstream in(meta);
  if (!in) throw InvalidInput("GeoDistModel::load: cannot open " + meta.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, true, true);
  GeoDistModel m;
  m.cfg_.latent_width = j.at("latent_width").get<std::size_t>();
  m.cfg_.beta = j.at("beta").get<double>();
  m.cfg_.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  m.cfg_.x_frequencies = j.at("x_frequencies").get<std::size_t>();
  m.cfg_.t_frequencies = j.at("t_frequencies").get<std::size_t>();
  m.cfg_.s_frequencies = j.at("s_frequencies").get<std::size_t>();
  for (const auto& f : j.at("frames")) {
    m.frame_ids_.push_back(f.at("id").get<std::string>());
    BodyParams b;
    auto shape = f.at("shape").get<std::vector<double>>();
    auto pose = f.at("pose").get<std::vector<double>>();
    auto expr = f.at("expression").get<std::vector<double>>();
    std::copy(shape.begin(), shape.end(), b.shape.begin());
    std::copy(pose.begin(), pose.end(), b.pose.begin());
    std::copy(expr.begin(), expr.end(), b.expression.begin());
    m.frame_bodies_.push_back(b);
  }
  m.params_ = ParamStore::load(checkpoint);
  m.latents_ = ParamStore::load(latent_sidecar);
  MlpVelocityField::Options opt;
  opt.state_dim = 3;
  opt.cond_dim = m.cond_dim();
  opt.x_frequencies = m.cfg_.x_frequencies;
  opt.t_frequencies = m.cfg_.t_frequencies;
  opt.hidden = m.cfg_.hidden;
  m.field_ = MlpVelocityField::attached(m.params_, "u", opt);
  return m;
}

SurfacePoints supervised_reconstruct(const mapping::MapperModel& mapper,
                                     std::string_view frame_id, const TriMesh& proxy,
                                     std::size_t n, std::uint64_t seed) {
  RngStream rng = RngStream(seed).child("points");
  SurfacePoints xs = sample_surface(proxy, n, rng);
  SurfacePoints out;
  out.source_mesh_id = "supervised";
  out.points = mapper.map_points(frame_id, xs.points);
  return out;
}

}  // namespace geoflow::geodist
