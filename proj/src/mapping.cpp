#include "geoflow/mapping.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "geoflow/chamfer.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/optimizer.hpp"
#include "geoflow/sampling.hpp"

namespace geoflow::mapping {

namespace {

constexpr char kPairsMagic[8] = {'G', 'F', 'P', 'A', 'I', 'R', 'S', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f32(std::ostream& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

void PairedSet::validate_on_proxy(const TriMesh& proxy, double tol) const {
  SurfacePoints probe;
  probe.points.reserve(pairs.size());
  probe.source_face.reserve(pairs.size());
  for (const Pair& p : pairs) {
    probe.points.push_back(p.xs);
    probe.source_face.push_back(p.face);
  }
  probe.validate_provenance(proxy, tol);
}

void save_pairs(const PairedSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("save_pairs: cannot open " + path.string());
  out.write(kPairsMagic, sizeof(kPairsMagic));
  write_u64(out, set.frame_id.size());
  out.write(set.frame_id.data(), static_cast<std::streamsize>(set.frame_id.size()));
  std::uint64_t initial = 0;
  for (const Pair& p : set.pairs) initial += p.tag == PairTag::Initial;
  write_u64(out, set.pairs.size());
  write_u64(out, initial);
  write_u64(out, set.pairs.size() - initial);
  for (const Pair& p : set.pairs) {
    write_f32(out, static_cast<float>(p.xs.x));
    write_f32(out, static_cast<float>(p.xs.y));
    write_f32(out, static_cast<float>(p.xs.z));
    write_f32(out, static_cast<float>(p.face));
    write_f32(out, static_cast<float>(p.xm.x));
    write_f32(out, static_cast<float>(p.xm.y));
    write_f32(out, static_cast<float>(p.xm.z));
    write_f32(out, static_cast<float>(p.tag == PairTag::Refinement ? 1.0f : 0.0f));
  }
  if (!out) throw NumericFailure("save_pairs: write failed for " + path.string());
}

PairedSet load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("load_pairs: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kPairsMagic, 8) != 0)
    throw InvalidInput("load_pairs: bad magic in " + path.string());
  PairedSet set;
  std::uint64_t idlen = read_u64(in);
  set.frame_id.resize(idlen);
  in.read(set.frame_id.data(), static_cast<std::streamsize>(idlen));
  std::uint64_t total = read_u64(in);
  read_u64(in);  // initial count
  read_u64(in);  // refinement count
  set.pairs.resize(total);
  for (auto& p : set.pairs) {
    p.xs.x = read_f32(in);
    p.xs.y = read_f32(in);
    p.xs.z = read_f32(in);
    float face = read_f32(in);
    p.xm.x = read_f32(in);
    p.xm.y = read_f32(in);
    p.xm.z = read_f32(in);
    float tag = read_f32(in);
    p.face = static_cast<std::int32_t>(face);
    if (tag != 0.0f && tag != 1.0f) throw InvalidInput("load_pairs: bad tag value");
    p.tag = tag == 1.0f ? PairTag::Refinement : PairTag::Initial;
  }
  if (!in) throw InvalidInput("load_pairs: truncated file " + path.string());
  return set;
}

DensityStats density_stats(const PairedSet& pairs, const TriMesh& proxy) {
  DensityStats s;
  s.per_face.assign(proxy.faces.size(), 0);
  s.total_pairs = static_cast<std::int64_t>(pairs.size());
  for (const Pair& p : pairs.pairs) {
    if (p.face < 0 || p.face >= static_cast<std::int32_t>(proxy.faces.size()))
      throw InvalidInput("density_stats: pair without a valid proxy face index");
    s.per_face[p.face]++;
  }
  // normalized count = actual / expected under area-uniform placement,
  // evaluated over positive-area faces
  std::size_t positive = 0;
  double mean = 0;
  std::vector<double> normalized;
  normalized.reserve(proxy.faces.size());
  for (std::size_t f = 0; f < proxy.faces.size(); ++f) {
    if (proxy.face_areas[f] <= 0) continue;
    ++positive;
    double expected =
        static_cast<double>(s.total_pairs) * proxy.face_areas[f] / proxy.total_area;
    double x = expected > 0 ? static_cast<double>(s.per_face[f]) / expected : 0.0;
    normalized.push_back(x);
    mean += x;
    if (s.per_face[f] == 0) s.uncovered_fraction += 1.0;
  }
  if (positive == 0) return s;
  mean /= static_cast<double>(positive);
  double var = 0;
  for (double x : normalized) var += (x - mean) * (x - mean);
  s.normalized_variance = var / static_cast<double>(positive);
  s.uncovered_fraction /= static_cast<double>(positive);
  return s;
}

PairedSet naive_knn_pairs(const SurfacePoints& avatar, const SurfacePoints& proxy_samples) {
  if (avatar.size() == 0 || proxy_samples.size() == 0)
    throw InvalidInput("naive_knn_pairs: empty input");
  SpatialIndex index(proxy_samples.points);
  PairedSet out;
  out.frame_id = avatar.source_mesh_id;
  out.pairs.resize(avatar.size());
  for (std::size_t i = 0; i < avatar.size(); ++i) {
    auto [idx, d2] = index.nearest(avatar.points[i]);
    (void)d2;
    Pair& p = out.pairs[i];
    p.xs = proxy_samples.points[idx];
    p.face = proxy_samples.has_faces() ? proxy_samples.source_face[idx] : -1;
    p.xm = avatar.points[i];
    p.tag = PairTag::Initial;
  }
  return out;
}

std::string MapperModel::zm_name(std::string_view frame_id) {
  return "zm." + std::string(frame_id);
}

Tensor MapperModel::features(std::string_view frame_id, std::span<const Vec3> points) const {
  const Tensor& zm = params_.at(zm_name(frame_id));
  const std::size_t pe = posenc_dim(3, cfg_.pe_frequencies);
  Tensor f = Tensor::zeros({points.size(), pe + cfg_.zm_width});
  for (std::size_t i = 0; i < points.size(); ++i) {
    double* o = f.row_ptr(i);
    const double xyz[3] = {points[i].x, points[i].y, points[i].z};
    posenc_write(xyz, cfg_.pe_frequencies, o);
    std::copy(zm.v.begin(), zm.v.end(), o + pe);
  }
  return f;
}

MapperModel MapperModel::train(const std::vector<MapperFrameData>& frames,
                               const MapperConfig& cfg, RngStream& rng,
                               const ProgressFn& progress) {
  if (frames.empty()) throw InvalidInput("train_mapper: empty dataset");
  for (const auto& f : frames) {
    if (f.proxy == nullptr || f.avatar_points == nullptr || f.avatar_points->empty())
      throw InvalidInput("train_mapper: frame " + f.frame_id + " lacks proxy or avatar samples");
  }

  MapperModel model;
  model.cfg_ = cfg;
  RngStream init = rng.child("init");
  MlpSpec spec;
  spec.input_dim = posenc_dim(3, cfg.pe_frequencies) + cfg.zm_width;
  spec.output_dim = 3;
  spec.hidden = cfg.hidden;
  spec.act = cfg.act;
  spec.pe_frequencies = cfg.pe_frequencies;
  spec.zero_init_output = true;  // the map starts as the identity
  model.net_ = Mlp(model.params_, "m", spec, init);
  for (const auto& f : frames) {
    model.frame_ids_.push_back(f.frame_id);
    Tensor zm = Tensor::zeros({cfg.zm_width});
    for (double& v : zm.v) v = init.normal();
    model.params_.add(zm_name(f.frame_id), std::move(zm));
  }

  AdamW opt_net({.lr = cfg.lr});
  AdamW opt_lat({.lr = cfg.lr_latent});
  RngStream data = rng.child("data");

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto& frame = frames[step % frames.size()];
    RngStream proxy_rng = data.child("proxy", step);
    SurfacePoints xs = sample_surface(*frame.proxy, cfg.batch_points, proxy_rng);
    std::vector<Vec3> xm(cfg.batch_points);
    const auto& pool = *frame.avatar_points;
    for (auto& p : xm) p = pool[data.integer(pool.size())];

    ParamStore grads;
    double loss = model.loss_grad(frame.frame_id, xs.points, xm, grads);
    if (!std::isfinite(loss))
      throw NumericFailure("train_mapper: non-finite loss at step " + std::to_string(step));

    if (cfg.cosine_decay) {
      opt_net.set_lr(cosine_lr(cfg.lr, static_cast<std::int64_t>(step),
                               static_cast<std::int64_t>(cfg.steps)));
      opt_lat.set_lr(cosine_lr(cfg.lr_latent, static_cast<std::int64_t>(step),
                               static_cast<std::int64_t>(cfg.steps)));
    }
    ParamStore net_grads, lat_grads;
    for (const auto& name : grads.names()) {
      Tensor& g = grads.at(name);
      if (name.rfind("zm.", 0) == 0) {
        lat_grads.add(name, std::move(g));
      } else {
        net_grads.add(name, std::move(g));
      }
    }
    opt_net.step(model.params_, net_grads);
    opt_lat.step(model.params_, lat_grads);
    if (progress) progress(step, loss);
  }
  return model;
}

double MapperModel::loss_grad(std::string_view frame_id, const std::vector<Vec3>& proxy_batch,
                              const std::vector<Vec3>& avatar_batch, ParamStore& grads) const {
  Tensor feat = features(frame_id, proxy_batch);
  Mlp::Cache cache;
  Tensor out = net_.forward(params_, feat, cache);
  std::vector<Vec3> pred(proxy_batch.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] = proxy_batch[i] +
              Vec3{out.v[i * 3 + 0], out.v[i * 3 + 1], out.v[i * 3 + 2]};
  }
  ChamferGrad cg = chamfer_with_grad(pred, avatar_batch);
  Tensor dout = Tensor::zeros(out.shape);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    dout.v[i * 3 + 0] = cg.grad_a[i].x;
    dout.v[i * 3 + 1] = cg.grad_a[i].y;
    dout.v[i * 3 + 2] = cg.grad_a[i].z;
  }
  Tensor dfeat = net_.backward(params_, cache, dout, grads);
  // gradient of the shared per-frame latent: sum over rows of its slice
  const std::size_t pe = posenc_dim(3, cfg_.pe_frequencies);
  const std::string zname = zm_name(frame_id);
  if (!grads.has(zname)) grads.add(zname, Tensor::zeros({cfg_.zm_width}));
  Tensor& zg = grads.at(zname);
  for (std::size_t r = 0; r < dfeat.rows(); ++r) {
    const double* src = dfeat.row_ptr(r) + pe;
    for (std::size_t j = 0; j < cfg_.zm_width; ++j) zg.v[j] += src[j];
  }
  return cg.value;
}

double MapperModel::loss(std::string_view frame_id, const std::vector<Vec3>& proxy_batch,
                         const std::vector<Vec3>& avatar_batch) const {
  std::vector<Vec3> pred = map_points(frame_id, proxy_batch);
  return chamfer(pred, avatar_batch);
}

std::vector<Vec3> MapperModel::map_points(std::string_view frame_id,
                                          std::span<const Vec3> points) const {
  if (!has_frame(frame_id))
    throw InvalidInput("MapperModel: unknown frame id " + std::string(frame_id));
  Tensor out = net_.forward(params_, features(frame_id, points));
  std::vector<Vec3> pred(points.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] = points[i] + Vec3{out.v[i * 3 + 0], out.v[i * 3 + 1], out.v[i * 3 + 2]};
  }
  return pred;
}

bool MapperModel::has_frame(std::string_view frame_id) const {
  return params_.has(zm_name(frame_id));
}

void MapperModel::save(const std::filesystem::path& checkpoint,
                       const std::filesystem::path& meta) const {
  params_.save(checkpoint);
  nlohmann::json j;
  j["zm_width"] = cfg_.zm_width;
  j["hidden"] = cfg_.hidden;
  j["activation"] = std::string(activation_name(cfg_.act));
  j["pe_frequencies"] = cfg_.pe_frequencies;
  j["steps"] = cfg_.steps;
  j["batch_points"] = cfg_.batch_points;
  j["lr"] = cfg_.lr;
  j["lr_latent"] = cfg_.lr_latent;
  j["frames"] = frame_ids_;
  std::ofstream out(meta);
  if (!out) throw InvalidInput("MapperModel::save: cannot open " + meta.string());
  out << j.dump(2) << "\n";
}

MapperModel MapperModel::load(const std::filesystem::path& checkpoint,
                              const std::filesystem::path& meta) {
  std::ifstream in(meta);
  if (!in) throw InvalidInput("MapperModel::load: cannot open " + meta.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, true, true);
  MapperModel model;
  model.cfg_.zm_width = j.at("zm_width").get<std::size_t>();
  model.cfg_.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  model.cfg_.act = activation_from_name(j.at("activation").get<std::string>());
  model.cfg_.pe_frequencies = j.at("pe_frequencies").get<std::size_t>();
  model.frame_ids_ = j.at("frames").get<std::vector<std::string>>();
  model.params_ = ParamStore::load(checkpoint);
  MlpSpec spec;
  spec.input_dim = posenc_dim(3, model.cfg_.pe_frequencies) + model.cfg_.zm_width;
  spec.output_dim = 3;
  spec.hidden = model.cfg_.hidden;
  spec.act = model.cfg_.act;
  spec.pe_frequencies = model.cfg_.pe_frequencies;
  model.net_ = Mlp::attached(model.params_, "m", spec);
  return model;
}

PairedSet initial_transitions(const SurfacePoints& avatar, const SurfacePoints& proxy_samples,
                              const std::vector<Vec3>& coarse) {
  if (avatar.size() == 0 || proxy_samples.size() == 0)
    throw InvalidInput("initial_transitions: empty input");
  if (coarse.size() != proxy_samples.size())
    throw InvalidInput("initial_transitions: coarse predictions must align with proxy samples");
  SpatialIndex index(coarse);
  PairedSet out;
  out.frame_id = avatar.source_mesh_id;
  out.pairs.resize(avatar.size());
  for (std::size_t i = 0; i < avatar.size(); ++i) {
    auto [idx, d2] = index.nearest(avatar.points[i]);
    (void)d2;
    Pair& p = out.pairs[i];
    p.xs = proxy_samples.points[idx];
    p.face = proxy_samples.has_faces() ? proxy_samples.source_face[idx] : -1;
    p.xm = avatar.points[i];
    p.tag = PairTag::Initial;
  }
  return out;
}

PairedSet coverage_refine(const PairedSet& pairs, const TriMesh& proxy, const MapperModel& mapper,
                          std::string_view frame_id, const SpatialIndex& avatar_index,
                          std::size_t per_face_budget, RngStream& rng) {
  if (per_face_budget < 1) throw InvalidInput("coverage_refine: budget must be >= 1");
  std::vector<char> covered(proxy.faces.size(), 0);
  for (const Pair& p : pairs.pairs) {
    if (p.face >= 0) covered[p.face] = 1;
  }
  std::vector<std::int32_t> uncovered;
  for (std::size_t f = 0; f < proxy.faces.size(); ++f) {
    if (!covered[f] && proxy.face_areas[f] > 0) uncovered.push_back(static_cast<std::int32_t>(f));
  }
  PairedSet out = pairs;
  if (uncovered.empty()) return out;

  SurfacePoints fresh = sample_on_faces(proxy, uncovered, per_face_budget, rng);
  std::vector<Vec3> mapped = mapper.map_points(frame_id, fresh.points);
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    auto [idx, d2] = avatar_index.nearest(mapped[i]);
    (void)d2;
    Pair p;
    p.xs = fresh.points[i];
    p.face = fresh.source_face[i];
    p.xm = avatar_index.points()[idx];
    p.tag = PairTag::Refinement;
    out.pairs.push_back(p);
  }
  return out;
}

FrameMapping build_frame_mapping(const MapperModel& mapper, std::string_view frame_id,
                                 const TriMesh& proxy, const SurfacePoints& proxy_samples,
                                 const SurfacePoints& avatar, std::size_t per_face_budget,
                                 RngStream& rng) {
  std::vector<Vec3> coarse = mapper.map_points(frame_id, proxy_samples.points);
  PairedSet initial = initial_transitions(avatar, proxy_samples, coarse);
  initial.frame_id = std::string(frame_id);
  DensityStats before = density_stats(initial, proxy);

  SpatialIndex avatar_index(avatar.points);
  FrameMapping fm;
  fm.pairs = coverage_refine(initial, proxy, mapper, frame_id, avatar_index, per_face_budget, rng);
  fm.pairs.frame_id = std::string(frame_id);
  std::size_t positive = 0;
  for (double a : proxy.face_areas) positive += a > 0;
  fm.uncovered_before =
      static_cast<std::size_t>(std::llround(before.uncovered_fraction * positive));
  fm.stats = density_stats(fm.pairs, proxy);
  return fm;
}

}  // namespace geoflow::mapping
