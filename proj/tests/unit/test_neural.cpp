#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "xdr/neural.hpp"

using namespace xdr;
using namespace xdr::nn;
using testutil::throws_code;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  }
  return m;
}

// Scalar objective sum(R .* y) for a fixed random R.
GradCheckReport check_dense(std::uint64_t seed, Activation act) {
  std::mt19937_64 rng(seed);
  Dense layer(3, 4, act, rng);
  const Matrix x = random_matrix(rng, 5, 3);
  const Matrix r = random_matrix(rng, 5, 4);
  ParamList params;
  layer.collect(params, "dense");
  auto loss = [&] { return (layer.forward(x).array() * r.array()).sum(); };
  auto backward = [&] {
    zero_grads(params);
    Dense::Cache cache;
    layer.forward(x, &cache);
    layer.backward(cache, r);
  };
  return grad_check(loss, backward, params);
}

GradCheckReport check_gru(std::uint64_t seed, std::size_t steps, std::size_t layers) {
  std::mt19937_64 rng(seed);
  GruNetwork net(3, 4, layers, rng);
  std::vector<Matrix> window;
  for (std::size_t t = 0; t < steps; ++t) window.push_back(random_matrix(rng, 2, 3));
  const Matrix target = random_matrix(rng, 2, 3);
  ParamList params;
  net.collect(params);
  auto loss = [&] { return mse_loss(net.forward(window), target); };
  auto backward = [&] {
    zero_grads(params);
    GruNetwork::Cache cache;
    const Matrix y = net.forward(window, &cache);
    Matrix dy;
    mse_loss(y, target, &dy);
    net.backward(cache, dy);
  };
  return grad_check(loss, backward, params);
}

}  // namespace

TEST_CASE("identity dense layer passes inputs through") {
  std::mt19937_64 rng(1);
  Dense layer(3, 3, Activation::Identity, rng);
  layer.W = Matrix::Identity(3, 3);
  layer.b = Matrix::Zero(1, 3);
  const Matrix x = random_matrix(rng, 4, 3);
  CHECK(layer.forward(x).isApprox(x, 0.0));
}

TEST_CASE("relu blocks negative inputs and their gradient") {
  std::mt19937_64 rng(1);
  Dense layer(1, 1, Activation::Relu, rng);
  layer.W = Matrix::Constant(1, 1, 1.0);
  layer.b = Matrix::Zero(1, 1);
  Dense::Cache cache;
  const Matrix y = layer.forward(Matrix::Constant(1, 1, -2.0), &cache);
  CHECK(y(0, 0) == 0.0);
  layer.dW = Matrix::Zero(1, 1);
  layer.db = Matrix::Zero(1, 1);
  const Matrix dx = layer.backward(cache, Matrix::Constant(1, 1, 1.0));
  CHECK(dx(0, 0) == 0.0);
  CHECK(layer.dW(0, 0) == 0.0);
}

TEST_CASE("dense gradients match central differences") {
  for (Activation act : {Activation::Identity, Activation::Tanh, Activation::Sigmoid, Activation::Relu}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const GradCheckReport rep = check_dense(seed, act);
      CHECK(rep.max_rel_error < 1e-6);
    }
  }
}

TEST_CASE("gru gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CHECK(check_gru(seed, 2, 1).max_rel_error < 1e-5);
    CHECK(check_gru(seed, 3, 2).max_rel_error < 1e-5);
  }
}

TEST_CASE("a corrupted backward pass is caught") {
  std::mt19937_64 rng(3);
  Dense layer(3, 2, Activation::Tanh, rng);
  const Matrix x = random_matrix(rng, 4, 3);
  ParamList params;
  layer.collect(params, "dense");
  auto loss = [&] { return layer.forward(x).sum(); };
  auto backward = [&] {
    zero_grads(params);
    Dense::Cache cache;
    layer.forward(x, &cache);
    layer.backward(cache, Matrix::Ones(4, 2));
    layer.dW(0, 0) *= 1.1;
  };
  const GradCheckReport rep = grad_check(loss, backward, params);
  CHECK_FALSE(rep.within(1e-5));
  CHECK(rep.per_param.at("dense.W") > 1e-5);
}

TEST_CASE("gru cell with zero parameters halves the state") {
  std::mt19937_64 rng(1);
  GruCell cell(2, 3, rng, Init::Zero);
  Matrix h(1, 3);
  h << 0.4, -0.2, 1.0;
  const Matrix next = cell.step(Matrix::Constant(1, 2, 0.7), h);
  CHECK(next.isApprox(0.5 * h));
  CHECK(cell.step(Matrix::Zero(1, 2), Matrix::Zero(1, 3)).isZero(0.0));
}

TEST_CASE("activations stay finite on extreme inputs") {
  Matrix z(1, 4);
  z << -1e308, -800, 800, 1e308;
  for (Activation a : {Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Identity}) {
    CHECK(apply_activation(a, z).allFinite());
  }
  const Matrix s = sigmoid(z);
  CHECK(s(0, 0) >= 0.0);
  CHECK(s(0, 3) <= 1.0);
  CHECK(parse_activation("tanh") == Activation::Tanh);
  CHECK(std::string(activation_name(Activation::Relu)) == "relu");
}

TEST_CASE("sgd step") {
  Matrix p = Matrix::Constant(1, 1, 1.0);
  Matrix g = Matrix::Constant(1, 1, 2.0);
  Optimizer opt({OptimizerKind::Sgd, 0.1});
  opt.apply({{"p", &p, &g}});
  CHECK(p(0, 0) == doctest::Approx(0.8));
  g.setZero();
  opt.apply({{"p", &p, &g}});
  CHECK(p(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("adam minimizes a quadratic") {
  Matrix p = Matrix::Constant(1, 1, 5.0);
  Matrix g(1, 1);
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  Optimizer opt(cfg);
  for (int i = 0; i < 200; ++i) {
    g(0, 0) = 2.0 * p(0, 0);
    opt.apply({{"p", &p, &g}});
  }
  CHECK(std::abs(p(0, 0)) < 0.1);
  CHECK(opt.steps() == 200);
}

TEST_CASE("optimizer rejects changed shapes") {
  Matrix p = Matrix::Zero(1, 2), g = Matrix::Zero(1, 2);
  Optimizer opt;
  opt.apply({{"p", &p, &g}});
  Matrix q = Matrix::Zero(2, 2), gq = Matrix::Zero(2, 2);
  CHECK(throws_code([&] { opt.apply({{"q", &q, &gq}}); }, Errc::ShapeMismatch));
}

TEST_CASE("dense shape errors") {
  std::mt19937_64 rng(1);
  Dense layer(3, 2, Activation::Identity, rng);
  CHECK(throws_code([&] { layer.forward(Matrix::Zero(1, 4)); }, Errc::ShapeMismatch));
}

TEST_CASE("soft update algebra") {
  std::mt19937_64 rng(9);
  Dense a(3, 2, Activation::Tanh, rng), b(3, 2, Activation::Tanh, rng);
  const Matrix old = a.W;
  ParamList pa, pb;
  a.collect(pa, "l");
  b.collect(pb, "l");
  soft_update(pa, pb, 0.25);
  CHECK(a.W.isApprox(0.25 * b.W + 0.75 * old, 1e-15));
  soft_update(pa, pb, 1.0);
  CHECK(a.W == b.W);
  CHECK(a.b == b.b);
}

TEST_CASE("checkpoint round trip and errors") {
  std::mt19937_64 rng(4);
  GruNetwork net(3, 5, 2, rng);
  ParamList params;
  net.collect(params);
  std::stringstream buf;
  write_checkpoint(buf, params);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "XDRM");

  std::mt19937_64 rng2(99);
  GruNetwork other(3, 5, 2, rng2);
  ParamList other_params;
  other.collect(other_params);
  std::stringstream in(bytes);
  load_checkpoint(in, other_params);
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(*params[i].value == *other_params[i].value);

  std::stringstream again(bytes);
  CHECK(read_checkpoint(again).size() == params.size());

  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK(throws_code([&] { read_checkpoint(truncated); }, Errc::BadCheckpoint));
  std::stringstream garbage("NOPE");
  CHECK(throws_code([&] { read_checkpoint(garbage); }, Errc::BadCheckpoint));

  std::mt19937_64 rng3(1);
  GruNetwork wider(3, 6, 2, rng3);
  ParamList wider_params;
  wider.collect(wider_params);
  std::stringstream shape(bytes);
  CHECK(throws_code([&] { load_checkpoint(shape, wider_params); }, Errc::ShapeMismatch));
}

TEST_CASE("identical seeds give identical training trajectories") {
  auto run = [] {
    std::mt19937_64 rng(21);
    GruNetwork net(2, 3, 1, rng);
    ParamList params;
    net.collect(params);
    Optimizer opt;
    std::vector<Matrix> window{Matrix::Constant(1, 2, 0.3), Matrix::Constant(1, 2, 0.6)};
    const Matrix target = Matrix::Constant(1, 2, 0.9);
    for (int i = 0; i < 20; ++i) {
      zero_grads(params);
      GruNetwork::Cache cache;
      Matrix dy;
      mse_loss(net.forward(window, &cache), target, &dy);
      net.backward(cache, dy);
      opt.apply(params);
    }
    return net.head.W;
  };
  CHECK(run() == run());
}

TEST_CASE("mse loss and gradient") {
  Matrix p(1, 2), t(1, 2), g;
  p << 1, 3;
  t << 0, 1;
  CHECK(mse_loss(p, t, &g) == doctest::Approx(2.5));
  CHECK(g(0, 0) == doctest::Approx(1.0));
  CHECK(g(0, 1) == doctest::Approx(2.0));
  CHECK(throws_code([&] { mse_loss(p, Matrix::Zero(2, 2)); }, Errc::ShapeMismatch));
}
