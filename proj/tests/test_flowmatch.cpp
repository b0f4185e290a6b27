#include <doctest.h>

#include <cmath>
#include <functional>

#include "geoflow/errors.hpp"
#include "geoflow/flow.hpp"
#include "geoflow/optimizer.hpp"
#include "geoflow/rng.hpp"
#include "test_util.hpp"

using namespace geoflow;

namespace {

// analytic field for tests
class LambdaField : public VelocityField {
 public:
  using Fn = std::function<double(double x, double t, std::size_t dim)>;
  LambdaField(std::size_t d, Fn fn) : d_(d), fn_(std::move(fn)) {}
  std::size_t state_dim() const override { return d_; }
  std::size_t cond_dim() const override { return 0; }
  Tensor velocity(const Tensor& x, std::span<const double> t, const Tensor&) const override {
    Tensor u = Tensor::zeros(x.shape);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t j = 0; j < x.cols(); ++j)
        u.v[r * x.cols() + j] = fn_(x.v[r * x.cols() + j], t[r], j);
    return u;
  }

 private:
  std::size_t d_;
  Fn fn_;
};

}  // namespace

TEST_SUITE("flowmatch") {

TEST_CASE("interpolate: endpoints and midpoint") {
  Tensor x0 = Tensor::row(std::vector<double>{0, 0, 0});
  Tensor x1 = Tensor::row(std::vector<double>{2, 4, 6});
  Tensor at0 = interpolate(x0, x1, std::vector<double>{0.0});
  Tensor at1 = interpolate(x0, x1, std::vector<double>{1.0});
  Tensor mid = interpolate(x0, x1, std::vector<double>{0.5});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(at0.v[i] == x0.v[i]);
    CHECK(at1.v[i] == x1.v[i]);
  }
  CHECK(mid.v[0] == doctest::Approx(1));
  CHECK(mid.v[1] == doctest::Approx(2));
  CHECK(mid.v[2] == doctest::Approx(3));
  CHECK_THROWS_AS(interpolate(x0, x1, std::vector<double>{1.5}), InvalidInput);
  CHECK_THROWS_AS(interpolate(x0, x1, std::vector<double>{-0.1}), InvalidInput);
}

TEST_CASE("fm_loss: perfect predictor and constant offset") {
  RngStream rng(1);
  FlowBatch batch;
  batch.x0 = Tensor::zeros({16, 3});
  batch.x1 = Tensor::zeros({16, 3});
  for (auto& v : batch.x0.v) v = rng.normal();
  for (auto& v : batch.x1.v) v = rng.normal();
  batch.t.assign(16, 0.0);
  for (auto& t : batch.t) t = rng.uniform();

  // field that returns exactly x1 - x0 for every row: loss must vanish
  Tensor diff = Tensor::zeros({16, 3});
  for (std::size_t i = 0; i < diff.v.size(); ++i) diff.v[i] = batch.x1.v[i] - batch.x0.v[i];
  class ExactField : public VelocityField {
   public:
    explicit ExactField(Tensor d) : d_(std::move(d)) {}
    std::size_t state_dim() const override { return 3; }
    std::size_t cond_dim() const override { return 0; }
    Tensor velocity(const Tensor&, std::span<const double>, const Tensor&) const override {
      return d_;
    }
    Tensor d_;
  } exact(diff);
  CHECK(fm_loss(exact, batch) == 0.0);

  // zero field with x1 - x0 = (1,0,0): mean squared norm is 1
  FlowBatch unit;
  unit.x0 = Tensor::zeros({8, 3});
  unit.x1 = Tensor::zeros({8, 3});
  for (std::size_t r = 0; r < 8; ++r) unit.x1.v[r * 3] = 1.0;
  unit.t.assign(8, 0.5);
  LambdaField zero(3, [](double, double, std::size_t) { return 0.0; });
  CHECK(fm_loss(zero, unit) == doctest::Approx(1.0));
}

TEST_CASE("fm_loss: Gaussian source against zero target has loss about 3") {
  RngStream rng(123);
  const std::size_t B = 10000;
  FlowBatch batch;
  batch.x0 = Tensor::zeros({B, 3});
  batch.x1 = Tensor::zeros({B, 3});
  for (auto& v : batch.x0.v) v = rng.normal();
  batch.t.assign(B, 0.0);
  for (auto& t : batch.t) t = rng.uniform();
  LambdaField zero(3, [](double, double, std::size_t) { return 0.0; });
  // E|x0|^2 = 3 for a standard normal in 3-D
  CHECK(fm_loss(zero, batch) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("integrate: stationary and constant fields") {
  RngStream rng(4);
  Tensor x0 = Tensor::zeros({5, 3});
  for (auto& v : x0.v) v = rng.normal();
  LambdaField zero(3, [](double, double, std::size_t) { return 0.0; });
  SamplerConfig cfg;
  Tensor out = integrate(zero, x0, Tensor{}, cfg);
  for (std::size_t i = 0; i < x0.v.size(); ++i) CHECK(out.v[i] == x0.v[i]);

  LambdaField constant(3, [](double, double, std::size_t j) { return j == 0 ? 2.0 : -1.0; });
  for (std::size_t steps : {1ul, 7ul, 20ul}) {
    SamplerConfig c{steps, SamplerConfig::Scheme::Euler};
    Tensor y = integrate(constant, x0, Tensor{}, c);
    for (std::size_t r = 0; r < 5; ++r) {
      CHECK(y.v[r * 3 + 0] == doctest::Approx(x0.v[r * 3 + 0] + 2.0).epsilon(1e-12));
      CHECK(y.v[r * 3 + 1] == doctest::Approx(x0.v[r * 3 + 1] - 1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("integrate: exponential ODE accuracy, heun beats euler") {
  LambdaField growth(1, [](double x, double, std::size_t) { return x; });
  Tensor one = Tensor::row(std::vector<double>{1.0});

  SamplerConfig euler1000{1000, SamplerConfig::Scheme::Euler};
  double e_euler1000 = integrate(growth, one, Tensor{}, euler1000).v[0];
  CHECK(std::abs(e_euler1000 - std::exp(1.0)) < 0.01);

  SamplerConfig euler20{20, SamplerConfig::Scheme::Euler};
  SamplerConfig heun20{20, SamplerConfig::Scheme::Heun};
  double err_euler = std::abs(integrate(growth, one, Tensor{}, euler20).v[0] - std::exp(1.0));
  double err_heun = std::abs(integrate(growth, one, Tensor{}, heun20).v[0] - std::exp(1.0));
  CHECK(err_heun <= 0.5 * err_euler);
}

TEST_CASE("integrate: divergence aborts with diagnostics") {
  LambdaField blowup(1, [](double x, double, std::size_t) { return x * 1e300; });
  Tensor x0 = Tensor::row(std::vector<double>{1.0});
  SamplerConfig cfg{20, SamplerConfig::Scheme::Euler};
  CHECK_THROWS_AS(integrate(blowup, x0, Tensor{}, cfg), NumericFailure);
}

TEST_CASE("integrate: step count must be positive") {
  SamplerConfig cfg{0, SamplerConfig::Scheme::Euler};
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("MlpVelocityField: loss gradient matches finite differences, incl. conditioning") {
  ParamStore store;
  RngStream rng(21);
  MlpVelocityField::Options opt;
  opt.state_dim = 2;
  opt.cond_dim = 3;
  opt.x_frequencies = 2;
  opt.t_frequencies = 2;
  opt.hidden = {8};
  opt.zero_init_output = false;
  MlpVelocityField field(store, "u", opt, rng);
  for (const auto& name : store.names())
    for (auto& v : store.at(name).v) v = 0.1 * rng.normal();

  FlowBatch batch;
  const std::size_t B = 4;
  batch.x0 = Tensor::zeros({B, 2});
  batch.x1 = Tensor::zeros({B, 2});
  batch.cond = Tensor::zeros({B, 3});
  batch.t.resize(B);
  for (auto& v : batch.x0.v) v = rng.normal();
  for (auto& v : batch.x1.v) v = rng.normal();
  for (auto& v : batch.cond.v) v = rng.normal();
  for (auto& t : batch.t) t = rng.uniform();

  ParamStore grads;
  Tensor dcond;
  field.fm_loss_grad(batch, grads, &dcond);

  auto loss_fn = [&] { return fm_loss(field, batch); };
  CHECK(testutil::max_grad_rel_error(store, grads, loss_fn, 1e-4) < 1e-4);

  // finite differences through the conditioning block as well
  double worst = 0;
  for (std::size_t i = 0; i < batch.cond.v.size(); ++i) {
    double keep = batch.cond.v[i];
    batch.cond.v[i] = keep + 1e-4;
    double lp = loss_fn();
    batch.cond.v[i] = keep - 1e-4;
    double lm = loss_fn();
    batch.cond.v[i] = keep;
    double fd = (lp - lm) / 2e-4;
    double denom = std::max({1e-6, std::abs(fd), std::abs(dcond.v[i])});
    worst = std::max(worst, std::abs(fd - dcond.v[i]) / denom);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("training a field on an analytic 1-D target decreases the loss") {
  ParamStore store;
  RngStream rng(31);
  MlpVelocityField::Options opt;
  opt.state_dim = 1;
  opt.cond_dim = 0;
  opt.hidden = {32, 32};
  MlpVelocityField field(store, "u", opt, rng);
  AdamW optim({.lr = 3e-3});

  RngStream data(32);
  const std::size_t B = 128;
  double early = 0, late = 0;
  const int steps = 400;
  for (int s = 0; s < steps; ++s) {
    FlowBatch batch;
    batch.x0 = Tensor::zeros({B, 1});
    batch.x1 = Tensor::zeros({B, 1});
    batch.t.resize(B);
    for (auto& v : batch.x0.v) v = data.normal();
    for (auto& v : batch.x1.v) v = 2.0 + 0.5 * data.normal();
    for (auto& t : batch.t) t = data.uniform();
    ParamStore grads;
    double loss = field.fm_loss_grad(batch, grads, nullptr);
    optim.step(store, grads);
    if (s < 50) early += loss;
    if (s >= steps - 50) late += loss;
  }
  CHECK(late < early);

  // samples should land near the target mean
  Tensor x0 = Tensor::zeros({512, 1});
  RngStream noise(33);
  for (auto& v : x0.v) v = noise.normal();
  Tensor x1 = integrate(field, x0, Tensor{}, SamplerConfig{});
  double mean = 0;
  for (double v : x1.v) mean += v;
  mean /= static_cast<double>(x1.v.size());
  CHECK(mean == doctest::Approx(2.0).epsilon(0.15));
}

}  // TEST_SUITE
