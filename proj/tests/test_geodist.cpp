#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "geoflow/chamfer.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/geodist.hpp"
#include "geoflow/sampling.hpp"
#include "geoflow/synthdata.hpp"
#include "test_util.hpp"

using namespace geoflow;
using namespace geoflow::geodist;
using geoflow::mapping::PairedSet;

namespace {

GeoDistConfig small_config() {
  GeoDistConfig cfg;
  cfg.latent_width = 32;
  cfg.hidden = {64, 64};
  cfg.batch = 256;
  cfg.frames_per_batch = 1;
  cfg.steps = 2500;
  cfg.augment_conditioning = false;
  return cfg;
}

// identity frame: avatar samples are fresh samples of the proxy surface
struct IdentityFrame {
  TriMesh proxy;
  BodyParams body;
  SurfacePoints proxy_samples;
  SurfacePoints avatar;
  PairedSet pairs;
};

IdentityFrame make_identity_frame(std::uint64_t seed, std::size_t n = 8192) {
  IdentityFrame f;
  f.body = BodyParams{};
  f.proxy = gen_proxy(f.body);
  RngStream rng(seed);
  RngStream a = rng.child("proxy");
  RngStream b = rng.child("avatar");
  f.proxy_samples = sample_surface(f.proxy, n, a);
  f.avatar = sample_surface(f.proxy, n, b);
  f.pairs = mapping::naive_knn_pairs(f.avatar, f.proxy_samples);
  f.pairs.frame_id = "ident";
  return f;
}

TransitionBatch zero_transition_batch(const std::string& frame_id, std::size_t b) {
  TransitionBatch tb;
  tb.frame_id = frame_id;
  tb.xs = Tensor::zeros({b, 3});
  tb.xm = tb.xs;  // transitions are exactly zero
  tb.x0 = Tensor::zeros({b, 3});
  tb.t.assign(b, 0.5);
  return tb;
}

}  // namespace

TEST_SUITE("geodist") {

TEST_CASE("geodist_loss: perfect predictor with zero latent gives exactly zero") {
  std::vector<FrameInit> frames = {{"f", BodyParams{}}};
  GeoDistConfig cfg = small_config();
  RngStream rng(1);
  GeoDistModel model = GeoDistModel::init(frames, cfg, rng);
  model.latent("f").fill(0.0);
  // zero-initialized output layer predicts zero velocity; x1 - x0 = 0 too
  TransitionBatch tb = zero_transition_batch("f", 16);
  CHECK(model.loss(tb) == 0.0);
}

TEST_CASE("geodist_loss: the latent regularizer is beta times |z|_2") {
  std::vector<FrameInit> frames = {{"f", BodyParams{}}};
  GeoDistConfig cfg = small_config();
  cfg.beta = 1e-6;
  RngStream rng(2);
  GeoDistModel model = GeoDistModel::init(frames, cfg, rng);
  Tensor& z = model.latent("f");
  z.fill(0.0);
  z.v[0] = 10.0;  // |z|_2 = 10
  TransitionBatch tb = zero_transition_batch("f", 8);
  // fm part is not exactly zero anymore (z enters the network), but with a
  // zero-initialized output layer it still is; the rest is the regularizer
  CHECK(model.loss(tb) == doctest::Approx(1e-5).epsilon(1e-9));
}

TEST_CASE("geodist_loss: unknown frame id rejected") {
  std::vector<FrameInit> frames = {{"f", BodyParams{}}};
  GeoDistConfig cfg = small_config();
  RngStream rng(3);
  GeoDistModel model = GeoDistModel::init(frames, cfg, rng);
  TransitionBatch tb = zero_transition_batch("other", 4);
  CHECK_THROWS_AS(model.loss(tb), InvalidInput);
  CHECK_THROWS_AS(model.latent("other"), InvalidInput);
}

TEST_CASE("train: zero steps leave latents at their Gaussian initialization") {
  IdentityFrame f = make_identity_frame(10, 512);
  std::vector<FrameInit> frames = {{"ident", f.body}};
  GeoDistConfig cfg = small_config();
  cfg.steps = 0;
  RngStream rng(4);
  GeoDistModel model = GeoDistModel::init(frames, cfg, rng);
  Tensor snapshot = model.latent("ident");
  std::vector<FrameTrainingData> data = {{"ident", f.body, &f.pairs}};
  RngStream train_rng(5);
  model.train(data, train_rng);
  const Tensor& z = model.latent("ident");
  for (std::size_t i = 0; i < z.v.size(); ++i) CHECK(z.v[i] == snapshot.v[i]);
}

TEST_CASE("loss gradients match finite differences (network and latent)") {
  std::vector<FrameInit> frames = {{"f", BodyParams{}}};
  GeoDistConfig cfg;
  cfg.latent_width = 6;
  cfg.hidden = {8};
  cfg.x_frequencies = 2;
  cfg.t_frequencies = 2;
  cfg.s_frequencies = 1;
  cfg.beta = 1e-3;
  RngStream rng(6);
  GeoDistModel model = GeoDistModel::init(frames, cfg, rng);
  RngStream scale(7);
  for (const auto& name : model.mutable_net_params().names())
    for (auto& v : model.mutable_net_params().at(name).v) v = 0.1 * scale.normal();

  TransitionBatch tb;
  tb.frame_id = "f";
  const std::size_t B = 4;
  tb.xs = Tensor::zeros({B, 3});
  tb.xm = Tensor::zeros({B, 3});
  tb.x0 = Tensor::zeros({B, 3});
  tb.t.resize(B);
  for (auto& v : tb.xs.v) v = scale.normal();
  for (auto& v : tb.xm.v) v = scale.normal();
  for (auto& v : tb.x0.v) v = scale.normal();
  for (auto& t : tb.t) t = scale.uniform();

  ParamStore net_grads, lat_grads;
  model.loss_grad(tb, net_grads, lat_grads);
  auto loss_fn = [&] { return model.loss(tb); };
  CHECK(testutil::max_grad_rel_error(model.mutable_net_params(), net_grads, loss_fn, 1e-5) <
        1e-4);

  // latent gradient: perturb the latent table directly
  double worst = 0;
  Tensor& z = model.latent("f");
  const Tensor& zg = lat_grads.at("f");
  for (std::size_t i = 0; i < z.v.size(); ++i) {
    double keep = z.v[i];
    z.v[i] = keep + 1e-5;
    double lp = loss_fn();
    z.v[i] = keep - 1e-5;
    double lm = loss_fn();
    z.v[i] = keep;
    double fd = (lp - lm) / 2e-5;
    double denom = std::max({1e-6, std::abs(fd), std::abs(zg.v[i])});
    worst = std::max(worst, std::abs(fd - zg.v[i]) / denom);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("identity frame: training reconstructs the surface to spec tolerance") {
  IdentityFrame f = make_identity_frame(20);
  std::vector<FrameInit> frames = {{"ident", f.body}};
  GeoDistConfig cfg = small_config();
  cfg.steps = 3200;
  RngStream rng(21);
  GeoDistModel model = GeoDistModel::init(frames, cfg, rng);
  std::vector<FrameTrainingData> data = {{"ident", f.body, &f.pairs}};
  RngStream train_rng(22);
  model.train(data, train_rng);

  const std::size_t n = 16384;
  SurfacePoints recon =
      model.reconstruct(f.proxy, f.body, model.latent("ident"), n, SamplerConfig{}, 999);
  RngStream gt_rng(23);
  SurfacePoints reference = sample_surface(f.proxy, n, gt_rng);
  double cd = chamfer(recon.points, reference.points);
  double diag = f.proxy.bounds().diagonal();
  CHECK(cd / (diag * diag) < 1e-4);
}

TEST_CASE("reconstruct: same seed, same output, bitwise") {
  IdentityFrame f = make_identity_frame(30, 1024);
  std::vector<FrameInit> frames = {{"ident", f.body}};
  GeoDistConfig cfg = small_config();
  cfg.steps = 40;
  RngStream rng(31);
  GeoDistModel model = GeoDistModel::init(frames, cfg, rng);
  std::vector<FrameTrainingData> data = {{"ident", f.body, &f.pairs}};
  RngStream train_rng(32);
  model.train(data, train_rng);

  SurfacePoints a =
      model.reconstruct(f.proxy, f.body, model.latent("ident"), 512, SamplerConfig{}, 777);
  SurfacePoints b =
      model.reconstruct(f.proxy, f.body, model.latent("ident"), 512, SamplerConfig{}, 777);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.points[i].x == b.points[i].x);
    CHECK(a.points[i].y == b.points[i].y);
    CHECK(a.points[i].z == b.points[i].z);
  }
}

TEST_CASE("two garment frames share the field and separate via latents") {
  BodyParams body;
  TriMesh proxy = gen_proxy(body);
  GarmentParams ga, gb;
  ga.looseness = 0.01;
  ga.wrinkle_amplitude = 0.01;
  ga.wrinkle_frequency = 3.0;
  gb.looseness = 0.12;
  gb.wrinkle_amplitude = 0.035;
  gb.wrinkle_frequency = 5.0;
  RngStream av_rng_a(41), av_rng_b(42), px_rng(43);
  SurfacePoints avatar_a = gen_avatar(proxy, ga, 0.4, 8192, av_rng_a);
  SurfacePoints avatar_b = gen_avatar(proxy, gb, 1.3, 8192, av_rng_b);
  SurfacePoints proxy_samples = sample_surface(proxy, 8192, px_rng);

  // pairs via the mapping pipeline, as in the real training path
  mapping::MapperConfig mcfg;
  mcfg.hidden = {32, 32};
  mcfg.zm_width = 16;
  mcfg.steps = 600;
  mcfg.batch_points = 1024;
  std::vector<mapping::MapperFrameData> mframes = {{"a", &proxy, &avatar_a.points},
                                                   {"b", &proxy, &avatar_b.points}};
  RngStream mrng(40);
  mapping::MapperModel mapper = mapping::MapperModel::train(mframes, mcfg, mrng);
  RngStream refine_a(401), refine_b(402);
  PairedSet pairs_a =
      mapping::build_frame_mapping(mapper, "a", proxy, proxy_samples, avatar_a, 4, refine_a)
          .pairs;
  PairedSet pairs_b =
      mapping::build_frame_mapping(mapper, "b", proxy, proxy_samples, avatar_b, 4, refine_b)
          .pairs;

  GeoDistConfig cfg = small_config();
  cfg.steps = 4000;
  cfg.frames_per_batch = 2;

  RngStream joint_rng(44);
  GeoDistModel joint =
      GeoDistModel::init({{"a", body}, {"b", body}}, cfg, joint_rng);
  std::vector<FrameTrainingData> both = {{"a", body, &pairs_a}, {"b", body, &pairs_b}};
  RngStream joint_train(45);
  joint.train(both, joint_train);

  // same per-frame row budget for the single-frame baselines
  GeoDistConfig solo_cfg = cfg;
  solo_cfg.steps = 2000;
  solo_cfg.frames_per_batch = 1;
  auto train_solo = [&](const std::string& id, const PairedSet& pairs, std::uint64_t seed) {
    RngStream init_rng(seed);
    GeoDistModel solo = GeoDistModel::init({{id, body}}, solo_cfg, init_rng);
    std::vector<FrameTrainingData> one = {{id, body, &pairs}};
    RngStream train_rng(seed + 1);
    solo.train(one, train_rng);
    return solo;
  };
  GeoDistModel solo_a = train_solo("a", pairs_a, 46);
  GeoDistModel solo_b = train_solo("b", pairs_b, 48);

  const std::size_t n = 8192;
  double joint_cd_a =
      chamfer(joint.reconstruct(proxy, body, joint.latent("a"), n, SamplerConfig{}, 1).points,
              avatar_a.points);
  double joint_cd_b =
      chamfer(joint.reconstruct(proxy, body, joint.latent("b"), n, SamplerConfig{}, 2).points,
              avatar_b.points);
  double solo_cd_a =
      chamfer(solo_a.reconstruct(proxy, body, solo_a.latent("a"), n, SamplerConfig{}, 3).points,
              avatar_a.points);
  double solo_cd_b =
      chamfer(solo_b.reconstruct(proxy, body, solo_b.latent("b"), n, SamplerConfig{}, 3).points,
              avatar_b.points);
  CHECK(joint_cd_a < 2.0 * solo_cd_a);
  CHECK(joint_cd_b < 2.0 * solo_cd_b);

  // the latent must carry the garment: swapping latents moves the output far
  // more than the per-frame reconstruction error
  double swap_cd =
      chamfer(joint.reconstruct(proxy, body, joint.latent("b"), n, SamplerConfig{}, 4).points,
              joint.reconstruct(proxy, body, joint.latent("a"), n, SamplerConfig{}, 4).points);
  CHECK(swap_cd > 10.0 * std::max(joint_cd_a, joint_cd_b));
}

TEST_CASE("supervised_reconstruct: identity mapper maps samples near the surface") {
  IdentityFrame f = make_identity_frame(50, 4096);
  mapping::MapperConfig mcfg;
  mcfg.hidden = {32, 32};
  mcfg.zm_width = 16;
  mcfg.steps = 120;
  mcfg.batch_points = 512;
  std::vector<mapping::MapperFrameData> frames = {{"ident", &f.proxy, &f.avatar.points}};
  RngStream rng(51);
  mapping::MapperModel mapper = mapping::MapperModel::train(frames, mcfg, rng);

  SurfacePoints out = supervised_reconstruct(mapper, "ident", f.proxy, 2048, 52);
  CHECK(out.size() == 2048);
  double cd = chamfer(out.points, f.avatar.points);
  double diag = f.proxy.bounds().diagonal();
  CHECK(cd / (diag * diag) < 1e-3);
}

TEST_CASE("checkpoint round trip: reconstruction survives f32 storage") {
  namespace fs = std::filesystem;
  IdentityFrame f = make_identity_frame(60, 1024);
  std::vector<FrameInit> frames = {{"ident", f.body}};
  GeoDistConfig cfg = small_config();
  cfg.steps = 50;
  RngStream rng(61);
  GeoDistModel model = GeoDistModel::init(frames, cfg, rng);
  std::vector<FrameTrainingData> data = {{"ident", f.body, &f.pairs}};
  RngStream train_rng(62);
  model.train(data, train_rng);

  fs::path dir = fs::temp_directory_path() / "geoflow_geodist_io";
  fs::create_directories(dir);
  model.save(dir / "model.ckpt", dir / "latents.ckpt", dir / "meta.json");
  GeoDistModel loaded = GeoDistModel::load(dir / "model.ckpt", dir / "latents.ckpt",
                                           dir / "meta.json");
  REQUIRE(loaded.has_frame("ident"));
  SurfacePoints a =
      model.reconstruct(f.proxy, f.body, model.latent("ident"), 256, SamplerConfig{}, 7);
  SurfacePoints b =
      loaded.reconstruct(f.proxy, f.body, loaded.latent("ident"), 256, SamplerConfig{}, 7);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a.points[i] - b.points[i]).norm() < 1e-3);
  fs::remove_all(dir);
}

}  // TEST_SUITE
