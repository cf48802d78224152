#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal dense reverse-mode autodiff. A Tape is a dynamic graph rebuilt
// per forward pass; all arrays are row-major float64 matrices (vectors are
// 1xN or Nx1, scalars 1x1). Single-threaded per tape.
namespace pursuit::grad {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// A named trainable parameter living outside any tape. Gradients accumulate
// into `grad`; callers zero them explicitly before each backward pass.
struct Param {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  std::vector<double> grad;

  int size() const { return rows * cols; }
};

class ParamStore {
 public:
  Param& add(const std::string& name, int rows, int cols);
  Param* find(const std::string& name);
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
  void zero_grad();
  int total_size() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

// Checkpoint blob: "NDG1", u32 count, then per parameter
// u32 name_len, name bytes, u32 rank, u32 dims..., little-endian f64 data.
void save_checkpoint(const ParamStore& store, const std::string& path);
void load_checkpoint(ParamStore& store, const std::string& path);
std::vector<std::uint8_t> serialize_params(const ParamStore& store);
std::uint64_t checkpoint_checksum(const ParamStore& store);
std::uint64_t file_checksum(const std::string& path);

enum class Activation { Relu, Tanh, Sigmoid, Softplus, Exp, Log };

struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : std::uint8_t {
  Leaf,
  Matmul,
  Add,
  Sub,
  Mul,
  Div,
  AddRowVec,   // m x n + 1 x n broadcast
  MulColVec,   // m x n * m x 1 broadcast
  Act,
  SoftmaxRows,
  LogsumexpRows,
  SliceCols,
  ConcatCols,
  SumAll,
  MeanAll,
  Scale,      // * constant
  AddConst,   // + constant
  Neg,
};

struct Node {
  Op op = Op::Leaf;
  int a = -1;
  int b = -1;
  int rows = 0;
  int cols = 0;
  double c = 0.0;          // Scale / AddConst operand
  int col_begin = 0;       // SliceCols range
  int col_end = 0;
  Activation act = Activation::Relu;
  Param* param = nullptr;  // leaf bound to an external parameter
  std::vector<double> val;
  std::vector<double> grad;
};

class Tape {
 public:
  Value leaf(const double* data, int rows, int cols);
  Value leaf(const std::vector<double>& data, int rows, int cols);
  Value scalar(double v) { return leaf(&v, 1, 1); }
  Value param(Param& p);

  Value matmul(Value a, Value b);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value div(Value a, Value b);
  Value add_rowvec(Value m, Value row);
  Value mul_colvec(Value m, Value col);
  Value activation(Value x, Activation kind);
  Value relu(Value x) { return activation(x, Activation::Relu); }
  Value tanh(Value x) { return activation(x, Activation::Tanh); }
  Value sigmoid(Value x) { return activation(x, Activation::Sigmoid); }
  Value softplus(Value x) { return activation(x, Activation::Softplus); }
  Value exp(Value x) { return activation(x, Activation::Exp); }
  Value log(Value x) { return activation(x, Activation::Log); }
  Value softmax_rows(Value x);
  Value logsumexp_rows(Value x);    // m x n -> m x 1
  Value slice_cols(Value x, int begin, int end);
  Value concat_cols(Value a, Value b);
  Value sum_all(Value x);
  Value mean_all(Value x);
  Value scale(Value x, double c);
  Value add_const(Value x, double c);
  Value neg(Value x);

  // Populates grads of every node and bound parameter reachable from loss.
  // Calling twice without rebuilding accumulates additively.
  void backward(Value loss);

  const Node& node(Value v) const { return nodes_.at(v.id); }
  const std::vector<double>& val(Value v) const { return nodes_.at(v.id).val; }
  double scalar_val(Value v) const;
  int rows(Value v) const { return nodes_.at(v.id).rows; }
  int cols(Value v) const { return nodes_.at(v.id).cols; }
  std::size_t size() const { return nodes_.size(); }

 private:
  int push(Node n);
  std::vector<Node> nodes_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long step = 0;
  // Indexed in ParamStore order; lazily sized on first use.
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

void adam_step(ParamStore& params, AdamState& state);

// Fully connected layer y = x W + b with W in R^{in x out}.
struct Linear {
  Param* weight = nullptr;
  Param* bias = nullptr;
};

Linear make_linear(ParamStore& store, const std::string& name, int in, int out,
                   std::mt19937_64& rng);
Value apply_linear(Tape& t, const Linear& layer, Value x);

// Max over parameter elements of |analytic - numeric| / max(|a|,|n|,1e-8),
// with numeric from central differences of the rebuilt forward pass.
double grad_check(ParamStore& store,
                  const std::function<Value(Tape&)>& build_loss,
                  double eps = 1e-5);

}  // namespace pursuit::grad
