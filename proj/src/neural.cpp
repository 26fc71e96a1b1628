#include "xdr/neural.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "xdr/error.hpp"

namespace xdr::nn {

namespace {

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    raise(Errc::ShapeMismatch, std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                                   ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_cols(const Matrix& m, Eigen::Index cols, const char* what) {
  if (m.cols() != cols) {
    raise(Errc::ShapeMismatch,
          std::string(what) + ": expected " + std::to_string(cols) + " columns, got " + std::to_string(m.cols()));
  }
}

Matrix init_block(Eigen::Index rows, Eigen::Index cols, double fan_in, std::mt19937_64& rng, Init init) {
  Matrix m = Matrix::Zero(rows, cols);
  if (init == Init::Zero) return m;
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix add_row(Matrix m, const Matrix& row) {
  m.rowwise() += row.row(0);
  return m;
}

Matrix col_sum(const Matrix& m) { return m.colwise().sum(); }

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d, sizeof bits);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

bool get_bytes(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!get_bytes(in, b, 4)) raise(Errc::BadCheckpoint, "truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!get_bytes(in, b, 8)) raise(Errc::BadCheckpoint, "truncated checkpoint");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d = 0.0;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(const std::string& name) {
  for (Activation a : {Activation::Identity, Activation::Relu, Activation::Tanh, Activation::Sigmoid}) {
    if (name == activation_name(a)) return a;
  }
  raise(Errc::MalformedConfig, "unknown activation '" + name + "'");
}

Matrix sigmoid(const Matrix& z) { return z.unaryExpr([](double x) { return stable_sigmoid(x); }); }

Matrix apply_activation(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Sigmoid: return sigmoid(z);
  }
  return z;
}

Matrix activation_grad_from_output(Activation a, const Matrix& y) {
  switch (a) {
    case Activation::Identity: return Matrix::Ones(y.rows(), y.cols());
    case Activation::Relu: return y.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::Tanh: return (1.0 - y.array().square()).matrix();
    case Activation::Sigmoid: return (y.array() * (1.0 - y.array())).matrix();
  }
  return Matrix::Ones(y.rows(), y.cols());
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) p.grad->setZero(p.value->rows(), p.value->cols());
}

std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.value->size());
  return n;
}

// ---- Dense ----

Dense::Dense(std::size_t in, std::size_t out, Activation activation, std::mt19937_64& rng, Init init)
    : act(activation) {
  const auto o = static_cast<Eigen::Index>(out);
  const auto i = static_cast<Eigen::Index>(in);
  W = init_block(o, i, static_cast<double>(in), rng, init);
  b = init_block(1, o, static_cast<double>(in), rng, init);
  dW = Matrix::Zero(o, i);
  db = Matrix::Zero(1, o);
}

Matrix Dense::forward(const Matrix& x, Cache* cache) const {
  require_cols(x, W.cols(), "dense input");
  Matrix y = apply_activation(act, add_row(x * W.transpose(), b));
  if (cache) {
    cache->x = x;
    cache->y = y;
  }
  return y;
}

Matrix Dense::backward(const Cache& cache, const Matrix& dy) {
  require_shape(dy, cache.y.rows(), cache.y.cols(), "dense output gradient");
  const Matrix dz = dy.cwiseProduct(activation_grad_from_output(act, cache.y));
  dW.noalias() += dz.transpose() * cache.x;
  db += col_sum(dz);
  return dz * W;
}

void Dense::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".W", &W, &dW});
  out.push_back({prefix + ".b", &b, &db});
}

// ---- GRU ----

GruCell::GruCell(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng, Init init) {
  const auto i = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden_dim);
  const double fi = static_cast<double>(input_dim);
  const double fh = static_cast<double>(hidden_dim);
  Wz = init_block(h, i, fi, rng, init);
  Uz = init_block(h, h, fh, rng, init);
  bz = init_block(1, h, fh, rng, init);
  Wr = init_block(h, i, fi, rng, init);
  Ur = init_block(h, h, fh, rng, init);
  br = init_block(1, h, fh, rng, init);
  Wh = init_block(h, i, fi, rng, init);
  Uh = init_block(h, h, fh, rng, init);
  bh = init_block(1, h, fh, rng, init);
  for (Matrix* g : {&dWz, &dWr, &dWh}) *g = Matrix::Zero(h, i);
  for (Matrix* g : {&dUz, &dUr, &dUh}) *g = Matrix::Zero(h, h);
  for (Matrix* g : {&dbz, &dbr, &dbh}) *g = Matrix::Zero(1, h);
}

Matrix GruCell::step(const Matrix& x, const Matrix& h_prev, Cache* cache) const {
  require_cols(x, Wz.cols(), "gru input");
  require_shape(h_prev, x.rows(), Wz.rows(), "gru hidden state");
  const Matrix z = sigmoid(add_row(x * Wz.transpose() + h_prev * Uz.transpose(), bz));
  const Matrix r = sigmoid(add_row(x * Wr.transpose() + h_prev * Ur.transpose(), br));
  const Matrix c = add_row(x * Wh.transpose() + r.cwiseProduct(h_prev) * Uh.transpose(), bh).array().tanh().matrix();
  Matrix h = (1.0 - z.array()).matrix().cwiseProduct(h_prev) + z.cwiseProduct(c);
  if (cache) *cache = Cache{x, h_prev, z, r, c};
  return h;
}

std::pair<Matrix, Matrix> GruCell::backward_step(const Cache& k, const Matrix& dh) {
  require_shape(dh, k.h_prev.rows(), k.h_prev.cols(), "gru hidden gradient");
  const Matrix dc = dh.cwiseProduct(k.z);
  const Matrix dz = dh.cwiseProduct(k.c - k.h_prev);
  Matrix dh_prev = dh.cwiseProduct((1.0 - k.z.array()).matrix());

  const Matrix dac = dc.cwiseProduct((1.0 - k.c.array().square()).matrix());
  const Matrix rh = k.r.cwiseProduct(k.h_prev);
  dWh.noalias() += dac.transpose() * k.x;
  dUh.noalias() += dac.transpose() * rh;
  dbh += col_sum(dac);
  Matrix dx = dac * Wh;
  const Matrix drh = dac * Uh;
  dh_prev += drh.cwiseProduct(k.r);
  const Matrix dr = drh.cwiseProduct(k.h_prev);

  const Matrix dar = dr.cwiseProduct((k.r.array() * (1.0 - k.r.array())).matrix());
  dWr.noalias() += dar.transpose() * k.x;
  dUr.noalias() += dar.transpose() * k.h_prev;
  dbr += col_sum(dar);
  dx.noalias() += dar * Wr;
  dh_prev.noalias() += dar * Ur;

  const Matrix daz = dz.cwiseProduct((k.z.array() * (1.0 - k.z.array())).matrix());
  dWz.noalias() += daz.transpose() * k.x;
  dUz.noalias() += daz.transpose() * k.h_prev;
  dbz += col_sum(daz);
  dx.noalias() += daz * Wz;
  dh_prev.noalias() += daz * Uz;

  return {std::move(dx), std::move(dh_prev)};
}

std::vector<Matrix> GruCell::backward_sequence(const std::vector<Cache>& caches, const std::vector<Matrix>& dh_out) {
  if (dh_out.size() != caches.size()) raise(Errc::ShapeMismatch, "one hidden gradient per step is required");
  std::vector<Matrix> dxs(caches.size());
  if (caches.empty()) return dxs;
  Matrix dh = Matrix::Zero(caches.back().h_prev.rows(), caches.back().h_prev.cols());
  for (std::size_t t = caches.size(); t-- > 0;) {
    if (dh_out[t].size() != 0) dh += dh_out[t];
    auto [dx, dprev] = backward_step(caches[t], dh);
    dxs[t] = std::move(dx);
    dh = std::move(dprev);
  }
  return dxs;
}

void GruCell::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".Wz", &Wz, &dWz});
  out.push_back({prefix + ".Uz", &Uz, &dUz});
  out.push_back({prefix + ".bz", &bz, &dbz});
  out.push_back({prefix + ".Wr", &Wr, &dWr});
  out.push_back({prefix + ".Ur", &Ur, &dUr});
  out.push_back({prefix + ".br", &br, &dbr});
  out.push_back({prefix + ".Wh", &Wh, &dWh});
  out.push_back({prefix + ".Uh", &Uh, &dUh});
  out.push_back({prefix + ".bh", &bh, &dbh});
}

GruNetwork::GruNetwork(std::size_t io_dim, std::size_t hidden_dim, std::size_t layers, std::mt19937_64& rng,
                       Init init) {
  if (layers < 1 || hidden_dim < 1 || io_dim < 1) raise(Errc::ShapeMismatch, "gru network dimensions must be >= 1");
  for (std::size_t l = 0; l < layers; ++l) cells.emplace_back(l == 0 ? io_dim : hidden_dim, hidden_dim, rng, init);
  head = Dense(hidden_dim, io_dim, Activation::Identity, rng, init);
}

Matrix GruNetwork::forward(const std::vector<Matrix>& window, Cache* cache) const {
  if (window.empty()) raise(Errc::ShapeMismatch, "empty input window");
  if (cache) cache->layers.assign(cells.size(), {});
  std::vector<Matrix> inputs = window;
  for (std::size_t l = 0; l < cells.size(); ++l) {
    const auto& cell = cells[l];
    Matrix h = Matrix::Zero(inputs.front().rows(), static_cast<Eigen::Index>(cell.hidden_dim()));
    std::vector<Matrix> outputs;
    outputs.reserve(inputs.size());
    for (const auto& x : inputs) {
      if (cache) {
        cache->layers[l].emplace_back();
        h = cell.step(x, h, &cache->layers[l].back());
      } else {
        h = cell.step(x, h);
      }
      outputs.push_back(h);
    }
    inputs = std::move(outputs);
  }
  return head.forward(inputs.back(), cache ? &cache->head : nullptr);
}

void GruNetwork::backward(const Cache& cache, const Matrix& dy) {
  Matrix dtop = head.backward(cache.head, dy);
  std::vector<Matrix> dh_out(cache.layers.back().size());
  dh_out.back() = std::move(dtop);
  for (std::size_t l = cells.size(); l-- > 0;) dh_out = cells[l].backward_sequence(cache.layers[l], dh_out);
}

void GruNetwork::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t l = 0; l < cells.size(); ++l) cells[l].collect(out, prefix + ".cell" + std::to_string(l));
  head.collect(out, prefix + ".head");
}

double mse_loss(const Matrix& pred, const Matrix& target, Matrix* grad) {
  require_shape(target, pred.rows(), pred.cols(), "mse target");
  const Matrix diff = pred - target;
  const double n = static_cast<double>(std::max<Eigen::Index>(diff.size(), 1));
  if (grad) *grad = diff * (2.0 / n);
  return diff.squaredNorm() / n;
}

// ---- optimizers ----

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.lr > 0.0)) raise(Errc::InvalidRange, "learning rate must be positive");
}

void Optimizer::apply(const ParamList& params) {
  if (config_.kind == OptimizerKind::Adam && m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  for (const auto& p : params) require_shape(*p.grad, p.value->rows(), p.value->cols(), p.name.c_str());
  ++steps_;
  if (config_.kind == OptimizerKind::Sgd) {
    for (const auto& p : params) *p.value -= config_.lr * *p.grad;
    return;
  }
  if (params.size() != m_.size()) raise(Errc::ShapeMismatch, "parameter list changed between optimizer steps");
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    require_shape(m_[i], p.value->rows(), p.value->cols(), p.name.c_str());
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * *p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad->cwiseProduct(*p.grad);
    const auto mhat = m_[i].array() / c1;
    const auto vhat = v_[i].array() / c2;
    p.value->array() -= config_.lr * mhat / (vhat.sqrt() + config_.eps);
  }
}

GradCheckReport grad_check(const std::function<double()>& loss, const std::function<void()>& backward,
                           const ParamList& params, const GradCheckOptions& options) {
  backward();
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(*p.grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& value = *params[k].value;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + options.step;
      const double up = loss();
      value.data()[i] = saved - options.step;
      const double down = loss();
      value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k].data()[i];
      const double scale = std::max({std::abs(a), std::abs(numeric), options.magnitude_floor});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
    report.per_param[params[k].name] = worst;
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  return report;
}

void soft_update(const ParamList& target, const ParamList& source, double tau) {
  if (target.size() != source.size()) raise(Errc::ShapeMismatch, "soft update between different models");
  for (std::size_t i = 0; i < target.size(); ++i) {
    require_shape(*source[i].value, target[i].value->rows(), target[i].value->cols(), target[i].name.c_str());
    if (tau == 1.0) {
      *target[i].value = *source[i].value;
    } else {
      *target[i].value = tau * *source[i].value + (1.0 - tau) * *target[i].value;
    }
  }
}

// ---- checkpoints ----

void write_checkpoint(std::ostream& out, const ParamList& params) {
  out.write("XDRM", 4);
  put_u16(out, kCheckpointVersion);
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.value->rows()));
    put_u32(out, static_cast<std::uint32_t>(p.value->cols()));
    for (Eigen::Index i = 0; i < p.value->size(); ++i) put_f64(out, p.value->data()[i]);
  }
  if (!out) raise(Errc::Io, "failed to write checkpoint");
}

std::vector<NamedBlock> read_checkpoint(std::istream& in) {
  unsigned char magic[4];
  if (!get_bytes(in, magic, 4) || std::memcmp(magic, "XDRM", 4) != 0) raise(Errc::BadCheckpoint, "bad checkpoint magic");
  unsigned char ver[2];
  if (!get_bytes(in, ver, 2)) raise(Errc::BadCheckpoint, "truncated checkpoint header");
  const auto version = static_cast<std::uint16_t>(ver[0] | (ver[1] << 8));
  if (version != kCheckpointVersion) raise(Errc::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));

  std::vector<NamedBlock> blocks;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t len = get_u32(in);
    if (len > (1u << 16)) raise(Errc::BadCheckpoint, "implausible block name length");
    std::string name(len, '\0');
    if (!get_bytes(in, reinterpret_cast<unsigned char*>(name.data()), len)) raise(Errc::BadCheckpoint, "truncated name");
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) raise(Errc::BadCheckpoint, "implausible block size");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_f64(in);
    blocks.push_back({std::move(name), std::move(m)});
  }
  return blocks;
}

void load_checkpoint(std::istream& in, const ParamList& params) {
  const auto blocks = read_checkpoint(in);
  for (const auto& p : params) {
    const auto it = std::find_if(blocks.begin(), blocks.end(), [&](const NamedBlock& b) { return b.name == p.name; });
    if (it == blocks.end()) raise(Errc::BadCheckpoint, "checkpoint lacks block '" + p.name + "'");
    require_shape(it->value, p.value->rows(), p.value->cols(), p.name.c_str());
    *p.value = it->value;
  }
}

void save_checkpoint_file(const std::string& path, const ParamList& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::Io, "cannot open " + path + " for writing");
  write_checkpoint(out, params);
}

void load_checkpoint_file(const std::string& path, const ParamList& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::MissingCheckpoint, "cannot open checkpoint " + path);
  load_checkpoint(in, params);
}

}  // namespace xdr::nn
