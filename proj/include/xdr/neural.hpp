#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "xdr/linalg.hpp"

namespace xdr::nn {

enum class Activation { Identity, Relu, Tanh, Sigmoid };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

// Overflow-safe elementwise functions.
Matrix apply_activation(Activation a, const Matrix& z);
// Derivative expressed through the activation output y.
Matrix activation_grad_from_output(Activation a, const Matrix& y);
Matrix sigmoid(const Matrix& z);

enum class Init { Uniform, Zero };

// Non-owning view of one parameter block and its gradient accumulator.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
};
using ParamList = std::vector<ParamRef>;

void zero_grads(const ParamList& params);
std::size_t parameter_count(const ParamList& params);

// Fully connected layer on row-major batches: Y = act(X W^T + b).
struct Dense {
  Matrix W;  // out x in
  Matrix b;  // 1 x out
  Matrix dW;
  Matrix db;
  Activation act = Activation::Identity;

  struct Cache {
    Matrix x;
    Matrix y;
  };

  Dense() = default;
  Dense(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng, Init init = Init::Uniform);

  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(W.cols()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(W.rows()); }

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
  // Accumulates dW/db and returns dX.
  Matrix backward(const Cache& cache, const Matrix& dy);
  void collect(ParamList& out, const std::string& prefix);
};

// Gated recurrent unit:
//   z = sigmoid(x Wz^T + h Uz^T + bz)
//   r = sigmoid(x Wr^T + h Ur^T + br)
//   c = tanh(x Wh^T + (r * h) Uh^T + bh)
//   h' = (1 - z) * h + z * c
struct GruCell {
  Matrix Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;
  Matrix dWz, dUz, dbz, dWr, dUr, dbr, dWh, dUh, dbh;

  struct Cache {
    Matrix x, h_prev, z, r, c;
  };

  GruCell() = default;
  GruCell(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng, Init init = Init::Uniform);

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(Wz.cols()); }
  std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(Wz.rows()); }

  Matrix step(const Matrix& x, const Matrix& h_prev, Cache* cache = nullptr) const;
  // Returns (dx, dh_prev); accumulates parameter gradients.
  std::pair<Matrix, Matrix> backward_step(const Cache& cache, const Matrix& dh);
  // Backpropagation through a cached sequence. `dh_out[t]` is the gradient
  // arriving at the hidden output of step t from outside the recurrence.
  // Returns dx for every step.
  std::vector<Matrix> backward_sequence(const std::vector<Cache>& caches, const std::vector<Matrix>& dh_out);
  void collect(ParamList& out, const std::string& prefix);
};

// Stacked GRU over a window followed by a linear head on the last hidden
// state of the top layer. Hidden state starts at zero for every window.
struct GruNetwork {
  std::vector<GruCell> cells;
  Dense head;

  struct Cache {
    std::vector<std::vector<GruCell::Cache>> layers;  // [layer][t]
    Dense::Cache head;
  };

  GruNetwork() = default;
  GruNetwork(std::size_t io_dim, std::size_t hidden_dim, std::size_t layers, std::mt19937_64& rng,
             Init init = Init::Uniform);

  std::size_t io_dim() const noexcept { return head.out_dim(); }
  // `window[t]` is batch x io_dim.
  Matrix forward(const std::vector<Matrix>& window, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Matrix& dy);
  void collect(ParamList& out, const std::string& prefix = "gru");
};

// Mean over all entries of (pred - target)^2; `grad` receives d loss / d pred.
double mse_loss(const Matrix& pred, const Matrix& target, Matrix* grad = nullptr);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {});

  // Updates every block from its gradient. The parameter list must keep the
  // same shapes between calls (ShapeMismatch otherwise).
  void apply(const ParamList& params);
  std::uint64_t steps() const noexcept { return steps_; }
  const OptimizerConfig& config() const noexcept { return config_; }

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

struct GradCheckReport {
  std::map<std::string, double> per_param;  // max relative error per block
  double max_rel_error = 0.0;
  bool within(double tolerance) const noexcept { return max_rel_error <= tolerance; }
};

struct GradCheckOptions {
  double step = 1e-5;
  // Entries whose analytic and numeric magnitudes are both below this are
  // compared absolutely.
  double magnitude_floor = 1e-6;
};

// `loss` evaluates the scalar objective at the current parameter values;
// `backward` must zero and then fill every gradient in `params`.
GradCheckReport grad_check(const std::function<double()>& loss, const std::function<void()>& backward,
                           const ParamList& params, const GradCheckOptions& options = {});

// target <- tau * source + (1 - tau) * target, block by block.
void soft_update(const ParamList& target, const ParamList& source, double tau);

// Flat binary checkpoint: "XDRM", u16 version, then for each block
// u32 name length, name bytes, u32 rows, u32 cols, little-endian f64 data.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NamedBlock {
  std::string name;
  Matrix value;
};

void write_checkpoint(std::ostream& out, const ParamList& params);
std::vector<NamedBlock> read_checkpoint(std::istream& in);
// Loads blocks by name into `params`. Throws BadCheckpoint for missing blocks
// and ShapeMismatch for blocks with the wrong shape.
void load_checkpoint(std::istream& in, const ParamList& params);
void save_checkpoint_file(const std::string& path, const ParamList& params);
void load_checkpoint_file(const std::string& path, const ParamList& params);

}  // namespace xdr::nn
