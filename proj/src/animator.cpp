#include "geoflow/animator.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "geoflow/errors.hpp"
#include "geoflow/optimizer.hpp"

namespace geoflow::anim {

namespace {

// backward through y -> y/|y|
void normalize_backward(std::span<const double> unit, double norm, std::span<const double> dc,
                        std::span<double> dy) {
  double dot = 0;
  for (std::size_t i = 0; i < unit.size(); ++i) dot += dc[i] * unit[i];
  for (std::size_t i = 0; i < unit.size(); ++i) dy[i] = (dc[i] - dot * unit[i]) / norm;
}

}  // namespace

void SequenceRecord::validate(std::size_t context) const {
  if (bodies.size() != latents.size())
    throw InvalidInput("SequenceRecord " + sequence_id + ": bodies/latents size mismatch");
  if (latents.size() < context + 1)
    throw InvalidInput("SequenceRecord " + sequence_id + ": needs at least context+1 frames");
  for (std::size_t i = 1; i < latents.size(); ++i) {
    if (latents[i].size() != latents[0].size())
      throw InvalidInput("SequenceRecord " + sequence_id + ": inconsistent latent widths");
  }
}

std::vector<AnimWindow> build_training_windows(const SequenceRecord& seq, std::size_t context) {
  seq.validate(context);
  std::vector<AnimWindow> windows;
  const std::size_t n = seq.latents.size();
  for (std::size_t s = 0; s + 1 < n; ++s) {
    AnimWindow w;
    w.sequence_id = seq.sequence_id;
    for (std::size_t k = 0; k <= context; ++k) {
      // slot k covers frame s - context + k
      std::int64_t f = static_cast<std::int64_t>(s) - static_cast<std::int64_t>(context) +
                       static_cast<std::int64_t>(k);
      if (f < 0) {
        w.ctx.emplace_back();  // before the sequence start: null slot
        w.ctx_sources.emplace_back();
      } else {
        w.ctx.push_back(seq.latents[static_cast<std::size_t>(f)]);
        w.ctx_sources.push_back(seq.sequence_id);
      }
    }
    for (std::size_t k = 0; k <= context + 1; ++k) {
      std::int64_t f = static_cast<std::int64_t>(s) - static_cast<std::int64_t>(context) +
                       static_cast<std::int64_t>(k);
      std::size_t clamped = f < 0 ? 0 : static_cast<std::size_t>(f);
      w.bodies.push_back(seq.bodies[std::min(clamped, n - 1)]);
    }
    w.z_next = seq.latents[s + 1];
    windows.push_back(std::move(w));
  }
  return windows;
}

double ntxent_loss_grad(const Tensor& embeddings,
                        const std::vector<std::pair<int, int>>& positives, double tau,
                        Tensor& grad) {
  const std::size_t B = embeddings.rows();
  const std::size_t E = embeddings.cols();
  if (tau <= 0) throw InvalidInput("ntxent_loss: temperature must be positive");
  if (B < 2) throw InvalidInput("ntxent_loss: need at least two embeddings");
  if (positives.empty()) throw InvalidInput("ntxent_loss: no positive pairs");

  std::map<int, std::set<int>> partners;
  for (auto [i, j] : positives) {
    if (i < 0 || j < 0 || i >= static_cast<int>(B) || j >= static_cast<int>(B) || i == j)
      throw InvalidInput("ntxent_loss: bad positive pair");
    partners[i].insert(j);
  }
  for (const auto& [i, ps] : partners) {
    // at least one other embedding must be a non-positive (a negative)
    if (ps.size() + 1 >= B)
      throw InvalidInput("ntxent_loss: anchor " + std::to_string(i) + " has no negatives");
  }

  grad = Tensor::zeros({B, E});
  // cosine similarities; embeddings are unit vectors
  Tensor sims = Tensor::zeros({B, B});
  for (std::size_t a = 0; a < B; ++a) {
    for (std::size_t b = 0; b < B; ++b) {
      if (a == b) continue;
      double s = 0;
      const double* ra = embeddings.row_ptr(a);
      const double* rb = embeddings.row_ptr(b);
      for (std::size_t e = 0; e < E; ++e) s += ra[e] * rb[e];
      sims.v[a * B + b] = s;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(positives.size());
  double loss = 0;
  std::vector<double> p(B);
  for (auto [i, j] : positives) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < B; ++k) {
      if (static_cast<int>(k) == i) continue;
      m = std::max(m, sims.v[i * B + k] / tau);
    }
    double denom = 0;
    for (std::size_t k = 0; k < B; ++k) {
      if (static_cast<int>(k) == i) {
        p[k] = 0;
        continue;
      }
      p[k] = std::exp(sims.v[i * B + k] / tau - m);
      denom += p[k];
    }
    for (std::size_t k = 0; k < B; ++k) p[k] /= denom;
    loss += -(sims.v[i * B + j] / tau - m - std::log(denom));

    for (std::size_t k = 0; k < B; ++k) {
      if (static_cast<int>(k) == i) continue;
      double g = p[k] / tau;
      if (static_cast<int>(k) == j) g -= 1.0 / tau;
      g *= inv_n;
      // d sim(i,k) = c_k . dc_i + c_i . dc_k
      double* gi = grad.row_ptr(i);
      double* gk = grad.row_ptr(k);
      const double* ci = embeddings.row_ptr(i);
      const double* ck = embeddings.row_ptr(k);
      for (std::size_t e = 0; e < E; ++e) {
        gi[e] += g * ck[e];
        gk[e] += g * ci[e];
      }
    }
  }
  return loss * inv_n;
}

double ntxent_loss(const Tensor& embeddings, const std::vector<std::pair<int, int>>& positives,
                   double tau) {
  Tensor grad;
  return ntxent_loss_grad(embeddings, positives, tau, grad);
}

std::size_t AnimModel::pe_s_dim() const {
  return posenc_dim(BodyParams::kConditioningDim, cfg_.s_frequencies);
}

std::size_t AnimModel::cond_dim() const {
  return (cfg_.context + 1) * cfg_.latent_width + (cfg_.context + 2) * pe_s_dim() +
         cfg_.id_width;
}

AnimModel AnimModel::init(const AnimConfig& cfg, RngStream& rng) {
  AnimModel m;
  m.cfg_ = cfg;
  RngStream init = rng.child("init");
  MlpVelocityField::Options opt;
  opt.state_dim = cfg.latent_width;
  opt.cond_dim = m.cond_dim();
  opt.x_frequencies = 0;  // latents enter raw; only t is encoded
  opt.t_frequencies = cfg.t_frequencies;
  opt.hidden = cfg.v_hidden;
  opt.zero_init_output = true;
  m.field_ = MlpVelocityField(m.params_, "v", opt, init);

  MlpSpec wspec;
  wspec.input_dim = cfg.latent_width;
  wspec.output_dim = cfg.id_width;
  wspec.hidden = cfg.w_hidden;
  wspec.pe_frequencies = 0;
  m.wnet_ = Mlp(m.params_, "w", wspec, init);

  Tensor null_z = Tensor::zeros({cfg.latent_width});
  for (double& v : null_z.v) v = 0.5 * init.normal();
  m.params_.add("null.z", std::move(null_z));
  return m;
}

Tensor AnimModel::encode_raw(const Tensor& z_rows, Mlp::Cache* cache) const {
  if (cache != nullptr) return wnet_.forward(params_, z_rows, *cache);
  return wnet_.forward(params_, z_rows);
}

std::vector<double> AnimModel::encode_identity(std::span<const double> z) const {
  if (z.size() != cfg_.latent_width)
    throw InvalidInput("encode_identity: latent width mismatch");
  Tensor row = Tensor::row(z);
  Tensor raw = encode_raw(row, nullptr);
  double norm = 0;
  for (double v : raw.v) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<double> c(raw.v.begin(), raw.v.end());
  if (norm > 0) {
    for (double& v : c) v /= norm;
  } else {
    c[0] = 1.0;  // degenerate raw output: pick a fixed unit vector
  }
  return c;
}

void AnimModel::write_cond_row(double* out, const AnimWindow& w) const {
  const std::size_t W = cfg_.latent_width;
  const Tensor& null_z = params_.at("null.z");
  std::size_t off = 0;
  for (std::size_t k = 0; k <= cfg_.context; ++k) {
    const auto& slot = w.ctx[k];
    if (slot.empty()) {
      std::copy(null_z.v.begin(), null_z.v.end(), out + off);
    } else {
      if (slot.size() != W) throw InvalidInput("AnimWindow: context latent width mismatch");
      std::copy(slot.begin(), slot.end(), out + off);
    }
    off += W;
  }
  for (std::size_t k = 0; k <= cfg_.context + 1; ++k) {
    posenc_write(w.bodies[k].conditioning(), cfg_.s_frequencies, out + off);
    off += pe_s_dim();
  }
  if (!w.c.empty()) {
    if (w.c.size() != cfg_.id_width) throw InvalidInput("AnimWindow: embedding width mismatch");
    std::copy(w.c.begin(), w.c.end(), out + off);
  } else {
    std::fill(out + off, out + off + cfg_.id_width, 0.0);
  }
}

namespace {

void validate_window(const AnimWindow& w, std::size_t context, std::size_t latent_width) {
  if (w.ctx.size() != context + 1) throw InvalidInput("AnimWindow: wrong context slot count");
  if (w.bodies.size() != context + 2) throw InvalidInput("AnimWindow: wrong pose slot count");
  if (w.z_next.size() != latent_width) throw InvalidInput("AnimWindow: z_next width mismatch");
  for (const auto& src : w.ctx_sources) {
    if (!src.empty() && src != w.sequence_id)
      throw InvalidInput("AnimWindow: context spans two sequences (" + src + " vs " +
                         w.sequence_id + ")");
  }
}

}  // namespace

double AnimModel::anim_loss(const AnimWindow& window, std::span<const double> noise,
                            double t) const {
  validate_window(window, cfg_.context, cfg_.latent_width);
  if (noise.size() != cfg_.latent_width) throw InvalidInput("anim_loss: noise width mismatch");
  FlowBatch fb;
  fb.x0 = Tensor::row(noise);
  fb.x1 = Tensor::row(window.z_next);
  fb.t = {t};
  fb.cond = Tensor::zeros({1, cond_dim()});
  write_cond_row(fb.cond.row_ptr(0), window);
  return fm_loss(field_, fb);
}

double AnimModel::combined_loss(const std::vector<AnimWindow>& windows, const Tensor& noises,
                                std::span<const double> ts,
                                const std::vector<std::pair<int, int>>& positives) const {
  double total = 0;
  Tensor emb = Tensor::zeros({windows.size(), cfg_.id_width});
  for (std::size_t i = 0; i < windows.size(); ++i) {
    total += anim_loss(windows[i], noises.row_span(i), ts[i]);
    if (!windows[i].c.empty())
      std::copy(windows[i].c.begin(), windows[i].c.end(), emb.row_ptr(i));
  }
  total /= static_cast<double>(windows.size());
  if (cfg_.alpha > 0 && !positives.empty()) {
    total += cfg_.alpha * ntxent_loss(emb, positives, cfg_.tau);
  }
  return total;
}

double AnimModel::batch_loss_grad(const std::vector<AnimWindow>& windows, const Tensor& z_for_c,
                                  const Tensor& noises, std::span<const double> ts,
                                  const std::vector<std::pair<int, int>>& positives,
                                  ParamStore& grads) const {
  const std::size_t B = windows.size();
  const std::size_t W = cfg_.latent_width;
  const bool with_id = cfg_.use_identity_condition;

  // identity embeddings for the whole batch
  Mlp::Cache wcache;
  Tensor raw, unit;
  std::vector<double> norms(B, 1.0);
  if (with_id) {
    raw = encode_raw(z_for_c, &wcache);
    unit = raw;
    for (std::size_t r = 0; r < B; ++r) {
      double n2 = 0;
      for (std::size_t e = 0; e < cfg_.id_width; ++e) n2 += raw.v[r * cfg_.id_width + e] *
                                                           raw.v[r * cfg_.id_width + e];
      norms[r] = std::sqrt(std::max(n2, 1e-30));
      for (std::size_t e = 0; e < cfg_.id_width; ++e) unit.v[r * cfg_.id_width + e] /= norms[r];
    }
  }

  FlowBatch fb;
  fb.x0 = noises;
  fb.x1 = Tensor::zeros({B, W});
  fb.t.assign(ts.begin(), ts.end());
  fb.cond = Tensor::zeros({B, cond_dim()});
  for (std::size_t r = 0; r < B; ++r) {
    validate_window(windows[r], cfg_.context, W);
    std::copy(windows[r].z_next.begin(), windows[r].z_next.end(), fb.x1.row_ptr(r));
    AnimWindow tmp = windows[r];
    if (with_id) tmp.c.assign(unit.row_ptr(r), unit.row_ptr(r) + cfg_.id_width);
    write_cond_row(fb.cond.row_ptr(r), tmp);
  }

  Tensor dcond;
  double loss = field_.fm_loss_grad(fb, grads, &dcond);

  // context gradients flow only into the learned null embedding; stage-one
  // latents are fixed data here
  if (!grads.has("null.z")) grads.add("null.z", Tensor::zeros({W}));
  Tensor& null_grad = grads.at("null.z");
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t k = 0; k <= cfg_.context; ++k) {
      if (!windows[r].ctx[k].empty()) continue;
      const double* src = dcond.row_ptr(r) + k * W;
      for (std::size_t e = 0; e < W; ++e) null_grad.v[e] += src[e];
    }
  }

  if (with_id) {
    const std::size_t c_off = cond_dim() - cfg_.id_width;
    Tensor dC = Tensor::zeros({B, cfg_.id_width});
    for (std::size_t r = 0; r < B; ++r) {
      const double* src = dcond.row_ptr(r) + c_off;
      std::copy(src, src + cfg_.id_width, dC.row_ptr(r));
    }
    if (cfg_.alpha > 0 && !positives.empty()) {
      Tensor dNt;
      double nt = ntxent_loss_grad(unit, positives, cfg_.tau, dNt);
      loss += cfg_.alpha * nt;
      for (std::size_t i = 0; i < dC.v.size(); ++i) dC.v[i] += cfg_.alpha * dNt.v[i];
    }
    Tensor dRaw = Tensor::zeros({B, cfg_.id_width});
    for (std::size_t r = 0; r < B; ++r) {
      normalize_backward({unit.row_ptr(r), cfg_.id_width}, norms[r],
                         {dC.row_ptr(r), cfg_.id_width}, {dRaw.row_ptr(r), cfg_.id_width});
    }
    wnet_.backward(params_, wcache, dRaw, grads);
  }
  return loss;
}

double AnimModel::batch_loss(const std::vector<AnimWindow>& windows, const Tensor& z_for_c,
                             const Tensor& noises, std::span<const double> ts,
                             const std::vector<std::pair<int, int>>& positives) const {
  std::vector<AnimWindow> prepared = windows;
  Tensor emb = Tensor::zeros({windows.size(), cfg_.id_width});
  if (cfg_.use_identity_condition) {
    for (std::size_t r = 0; r < windows.size(); ++r) {
      auto c = encode_identity(z_for_c.row_span(r));
      prepared[r].c = c;
      std::copy(c.begin(), c.end(), emb.row_ptr(r));
    }
  }
  double total = 0;
  for (std::size_t r = 0; r < prepared.size(); ++r) {
    total += anim_loss(prepared[r], noises.row_span(r), ts[r]);
  }
  total /= static_cast<double>(prepared.size());
  if (cfg_.use_identity_condition && cfg_.alpha > 0 && !positives.empty())
    total += cfg_.alpha * ntxent_loss(emb, positives, cfg_.tau);
  return total;
}

void AnimModel::train(const std::vector<SequenceRecord>& sequences, RngStream& rng,
                      const ProgressFn& progress) {
  if (sequences.empty()) throw InvalidInput("AnimModel::train: no sequences");
  std::map<std::string, std::vector<std::size_t>> by_identity;
  std::vector<std::vector<AnimWindow>> windows(sequences.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    sequences[i].validate(cfg_.context);
    if (sequences[i].latents[0].size() != cfg_.latent_width)
      throw InvalidInput("AnimModel::train: latent width mismatch");
    windows[i] = build_training_windows(sequences[i], cfg_.context);
    by_identity[sequences[i].identity].push_back(i);
  }
  std::vector<std::string> identities;
  for (const auto& [id, _] : by_identity) identities.push_back(id);

  AdamW opt({.lr = cfg_.lr});
  RngStream data = rng.child("data");
  const std::size_t G = std::max<std::size_t>(1, cfg_.batch_groups);
  const std::size_t B = 2 * G;
  // NT-Xent needs a negative per anchor: at least two identities per batch
  const bool contrastive = cfg_.use_identity_condition && identities.size() >= 2 && G >= 2;

  for (std::size_t step = 0; step < cfg_.steps; ++step) {
    std::vector<AnimWindow> batch;
    batch.reserve(B);
    Tensor z_for_c = Tensor::zeros({B, cfg_.latent_width});
    std::vector<std::pair<int, int>> positives;

    std::vector<std::size_t> group_ids(G);
    for (auto& id : group_ids) id = data.integer(identities.size());
    if (contrastive && G >= 2 && group_ids[1] == group_ids[0]) {
      // every anchor needs a negative, so force a second identity in
      group_ids[1] = (group_ids[0] + 1 + data.integer(identities.size() - 1)) %
                     identities.size();
    }

    for (std::size_t g = 0; g < G; ++g) {
      const auto& seq_ids = by_identity[identities[group_ids[g]]];
      for (int dup = 0; dup < 2; ++dup) {
        std::size_t si = seq_ids[data.integer(seq_ids.size())];
        const auto& wlist = windows[si];
        AnimWindow w = wlist[data.integer(wlist.size())];
        // identity condition comes from an arbitrary frame of the same sequence
        std::size_t cframe = data.integer(sequences[si].latents.size());
        std::copy(sequences[si].latents[cframe].begin(), sequences[si].latents[cframe].end(),
                  z_for_c.row_ptr(batch.size()));
        if (data.uniform() < cfg_.p_drop) {
          for (auto& slot : w.ctx) slot.clear();
          for (auto& src : w.ctx_sources) src.clear();
        }
        batch.push_back(std::move(w));
      }
      if (contrastive) {
        int a = static_cast<int>(batch.size()) - 2;
        positives.push_back({a, a + 1});
        positives.push_back({a + 1, a});
      }
    }

    if (cfg_.augment_conditioning) {
      std::vector<BodyParams> flat;
      for (const auto& w : batch) flat.insert(flat.end(), w.bodies.begin(), w.bodies.end());
      RngStream aug = data.child("augment", step);
      flat = augmented_conditioning_batch(flat, aug);
      std::size_t k = 0;
      for (auto& w : batch) {
        for (auto& b : w.bodies) b = flat[k++];
      }
    }

    Tensor noises = Tensor::zeros({B, cfg_.latent_width});
    for (double& v : noises.v) v = data.normal();
    std::vector<double> ts(B);
    for (double& t : ts) t = data.uniform();

    ParamStore grads;
    double loss = batch_loss_grad(batch, z_for_c, noises, ts, positives, grads);
    if (!std::isfinite(loss))
      throw NumericFailure("train_animator: non-finite loss at step " + std::to_string(step));
    if (cfg_.cosine_decay)
      opt.set_lr(cosine_lr(cfg_.lr, static_cast<std::int64_t>(step),
                           static_cast<std::int64_t>(cfg_.steps)));
    opt.step(params_, grads);
    if (progress) progress(step, loss);
  }
}

RolloutResult AnimModel::rollout(const std::vector<BodyParams>& track,
                                 std::span<const double> z0, std::size_t length,
                                 const SamplerConfig& sampler, std::uint64_t seed) const {
  if (length < 1) throw InvalidInput("rollout: length must be >= 1");
  if (track.size() < length + 1)
    throw InvalidInput("rollout: track must hold length+1 frames of poses");
  if (z0.size() != cfg_.latent_width) throw InvalidInput("rollout: latent width mismatch");
  sampler.validate();

  RolloutResult res;
  res.latents.push_back(std::vector<double>(z0.begin(), z0.end()));

  std::vector<double> c;
  if (cfg_.use_identity_condition) {
    // encoded exactly once, from the first frame, then frozen
    c = encode_identity(z0);
    res.identity_encodings = 1;
  }

  RngStream rng(seed);
  const std::size_t i = cfg_.context;
  for (std::size_t s = 0; s < length; ++s) {
    AnimWindow w;
    w.sequence_id = "rollout";
    for (std::size_t k = 0; k <= i; ++k) {
      std::int64_t f = static_cast<std::int64_t>(s) - static_cast<std::int64_t>(i) +
                       static_cast<std::int64_t>(k);
      if (f < 0) {
        w.ctx.emplace_back();
        w.ctx_sources.emplace_back();
      } else {
        w.ctx.push_back(res.latents[static_cast<std::size_t>(f)]);
        w.ctx_sources.push_back(w.sequence_id);
      }
    }
    for (std::size_t k = 0; k <= i + 1; ++k) {
      std::int64_t f = static_cast<std::int64_t>(s) - static_cast<std::int64_t>(i) +
                       static_cast<std::int64_t>(k);
      std::size_t clamped = f < 0 ? 0 : static_cast<std::size_t>(f);
      w.bodies.push_back(track[std::min<std::size_t>(clamped, track.size() - 1)]);
    }
    w.c = c;
    w.z_next.assign(cfg_.latent_width, 0.0);  // unused by generation

    RngStream noise_rng = rng.child("noise", s);
    Tensor x0 = Tensor::zeros({1, cfg_.latent_width});
    for (double& v : x0.v) v = noise_rng.normal();
    Tensor cond = Tensor::zeros({1, cond_dim()});
    write_cond_row(cond.row_ptr(0), w);
    Tensor z_next = integrate(field_, std::move(x0), cond, sampler);
    res.latents.push_back(std::vector<double>(z_next.v.begin(), z_next.v.end()));
  }
  return res;
}

void AnimModel::save(const std::filesystem::path& checkpoint,
                     const std::filesystem::path& meta) const {
  params_.save(checkpoint);
  nlohmann::json j;
  j["context"] = cfg_.context;
  j["alpha"] = cfg_.alpha;
  j["tau"] = cfg_.tau;
  j["p_drop"] = cfg_.p_drop;
  j["id_width"] = cfg_.id_width;
  j["latent_width"] = cfg_.latent_width;
  j["v_hidden"] = cfg_.v_hidden;
  j["w_hidden"] = cfg_.w_hidden;
  j["t_frequencies"] = cfg_.t_frequencies;
  j["s_frequencies"] = cfg_.s_frequencies;
  j["use_identity_condition"] = cfg_.use_identity_condition;
  std::ofstream out(meta);
  if (!out) throw InvalidInput("AnimModel::save: cannot open " + meta.string());
  out << j.dump(2) << "\n";
}

AnimModel AnimModel::load(const std::filesystem::path& checkpoint,
                          const std::filesystem::path& meta) {
  std::ifstream in(meta);
  if (!in) throw InvalidInput("AnimModel::load: cannot open " + meta.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, true, true);
  AnimModel m;
  m.cfg_.context = j.at("context").get<std::size_t>();
  m.cfg_.alpha = j.at("alpha").get<double>();
  m.cfg_.tau = j.at("tau").get<double>();
  m.cfg_.p_drop = j.at("p_drop").get<double>();
  m.cfg_.id_width = j.at("id_width").get<std::size_t>();
  m.cfg_.latent_width = j.at("latent_width").get<std::size_t>();
  m.cfg_.v_hidden = j.at("v_hidden").get<std::vector<std::size_t>>();
  m.cfg_.w_hidden = j.at("w_hidden").get<std::vector<std::size_t>>();
  m.cfg_.t_frequencies = j.at("t_frequencies").get<std::size_t>();
  m.cfg_.s_frequencies = j.at("s_frequencies").get<std::size_t>();
  m.cfg_.use_identity_condition = j.at("use_identity_condition").get<bool>();
  m.params_ = ParamStore::load(checkpoint);
  MlpVelocityField::Options opt;
  opt.state_dim = m.cfg_.latent_width;
  opt.cond_dim = m.cond_dim();
  opt.x_frequencies = 0;
  opt.t_frequencies = m.cfg_.t_frequencies;
  opt.hidden = m.cfg_.v_hidden;
  m.field_ = MlpVelocityField::attached(m.params_, "v", opt);
  MlpSpec wspec;
  wspec.input_dim = m.cfg_.latent_width;
  wspec.output_dim = m.cfg_.id_width;
  wspec.hidden = m.cfg_.w_hidden;
  wspec.pe_frequencies = 0;
  m.wnet_ = Mlp::attached(m.params_, "w", wspec);
  return m;
}

}  // namespace geoflow::anim
