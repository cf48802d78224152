#include "pursuit/ndgrad.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace pursuit::grad {

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CMatMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace {

std::string shape_str(int r, int c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

[[noreturn]] void dim_error(const char* what, int ar, int ac, int br, int bc) {
  throw DimensionError(std::string(what) + ": " + shape_str(ar, ac) + " vs " +
                       shape_str(br, bc));
}

}  // namespace

Param& ParamStore::add(const std::string& name, int rows, int cols) {
  auto p = std::make_unique<Param>();
  p->name = name;
  p->rows = rows;
  p->cols = cols;
  p->data.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  p->grad.assign(p->data.size(), 0.0);
  params_.push_back(std::move(p));
  return *params_.back();
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

int ParamStore::total_size() const {
  int n = 0;
  for (auto& p : params_) n += p->size();
  return n;
}

// ---------------------------------------------------------------------------
// Checkpoint blob

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back((bits >> (8 * i)) & 0xff);
}

struct Reader {
  const std::uint8_t* p;
  const std::uint8_t* end;
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n)
      throw std::runtime_error("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    p += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
    p += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_params(const ParamStore& store) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'N', 'D', 'G', '1'});
  put_u32(out, static_cast<std::uint32_t>(store.all().size()));
  for (const auto& p : store.all()) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.insert(out.end(), p->name.begin(), p->name.end());
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(p->rows));
    put_u32(out, static_cast<std::uint32_t>(p->cols));
    for (double v : p->data) put_f64(out, v);
  }
  return out;
}

void save_checkpoint(const ParamStore& store, const std::string& path) {
  auto blob = serialize_params(store);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for write: " + path);
  f.write(reinterpret_cast<const char*>(blob.data()),
          static_cast<std::streamsize>(blob.size()));
}

void load_checkpoint(ParamStore& store, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  Reader r{blob.data(), blob.data() + blob.size()};
  if (r.str(4) != "NDG1") throw std::runtime_error("bad checkpoint magic");
  std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    std::uint32_t rank = r.u32();
    if (rank != 2) throw std::runtime_error("unsupported rank in checkpoint");
    int rows = static_cast<int>(r.u32());
    int cols = static_cast<int>(r.u32());
    Param* p = store.find(name);
    if (p == nullptr) p = &store.add(name, rows, cols);
    if (p->rows != rows || p->cols != cols)
      throw DimensionError("checkpoint shape mismatch for " + name + ": " +
                           shape_str(p->rows, p->cols) + " vs " +
                           shape_str(rows, cols));
    for (double& v : p->data) v = r.f64();
  }
}

std::uint64_t checkpoint_checksum(const ParamStore& store) {
  auto blob = serialize_params(store);
  // FNV-1a 64
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : blob) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[4096];
  while (f.read(buf, sizeof buf) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<std::uint8_t>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!f) break;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Tape

int Tape::push(Node n) {
  n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Value Tape::leaf(const double* data, int rows, int cols) {
  Node n;
  n.op = Op::Leaf;
  n.rows = rows;
  n.cols = cols;
  int id = push(std::move(n));
  std::copy(data, data + static_cast<std::size_t>(rows) * cols,
            nodes_[id].val.begin());
  return {id};
}

Value Tape::leaf(const std::vector<double>& data, int rows, int cols) {
  if (data.size() != static_cast<std::size_t>(rows) * cols)
    throw DimensionError("leaf data length does not match shape");
  return leaf(data.data(), rows, cols);
}

Value Tape::param(Param& p) {
  Value v = leaf(p.data.data(), p.rows, p.cols);
  nodes_[v.id].param = &p;
  return v;
}

Value Tape::matmul(Value a, Value b) {
  const Node& na = nodes_.at(a.id);
  const Node& nb = nodes_.at(b.id);
  if (na.cols != nb.rows)
    dim_error("matmul inner dimensions", na.rows, na.cols, nb.rows, nb.cols);
  Node n;
  n.op = Op::Matmul;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = nb.cols;
  int id = push(std::move(n));
  CMatMap A(nodes_[a.id].val.data(), nodes_[a.id].rows, nodes_[a.id].cols);
  CMatMap B(nodes_[b.id].val.data(), nodes_[b.id].rows, nodes_[b.id].cols);
  MatMap C(nodes_[id].val.data(), nodes_[id].rows, nodes_[id].cols);
  C.noalias() = A * B;
  return {id};
}

namespace {
void check_same_shape(const Node& a, const Node& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols)
    dim_error(what, a.rows, a.cols, b.rows, b.cols);
}
}  // namespace

Value Tape::add(Value a, Value b) {
  check_same_shape(nodes_.at(a.id), nodes_.at(b.id), "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  int id = push(std::move(n));
  for (std::size_t i = 0; i < nodes_[id].val.size(); ++i)
    nodes_[id].val[i] = nodes_[a.id].val[i] + nodes_[b.id].val[i];
  return {id};
}

Value Tape::sub(Value a, Value b) {
  check_same_shape(nodes_.at(a.id), nodes_.at(b.id), "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  int id = push(std::move(n));
  for (std::size_t i = 0; i < nodes_[id].val.size(); ++i)
    nodes_[id].val[i] = nodes_[a.id].val[i] - nodes_[b.id].val[i];
  return {id};
}

Value Tape::mul(Value a, Value b) {
  check_same_shape(nodes_.at(a.id), nodes_.at(b.id), "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  int id = push(std::move(n));
  for (std::size_t i = 0; i < nodes_[id].val.size(); ++i)
    nodes_[id].val[i] = nodes_[a.id].val[i] * nodes_[b.id].val[i];
  return {id};
}

Value Tape::div(Value a, Value b) {
  check_same_shape(nodes_.at(a.id), nodes_.at(b.id), "div");
  Node n;
  n.op = Op::Div;
  n.a = a.id;
  n.b = b.id;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  int id = push(std::move(n));
  for (std::size_t i = 0; i < nodes_[id].val.size(); ++i)
    nodes_[id].val[i] = nodes_[a.id].val[i] / nodes_[b.id].val[i];
  return {id};
}

Value Tape::add_rowvec(Value m, Value row) {
  const Node& nm = nodes_.at(m.id);
  const Node& nr = nodes_.at(row.id);
  if (nr.rows != 1 || nr.cols != nm.cols)
    dim_error("add_rowvec", nm.rows, nm.cols, nr.rows, nr.cols);
  Node n;
  n.op = Op::AddRowVec;
  n.a = m.id;
  n.b = row.id;
  n.rows = nm.rows;
  n.cols = nm.cols;
  int id = push(std::move(n));
  for (int i = 0; i < nodes_[id].rows; ++i)
    for (int j = 0; j < nodes_[id].cols; ++j)
      nodes_[id].val[i * nodes_[id].cols + j] =
          nodes_[m.id].val[i * nodes_[id].cols + j] + nodes_[row.id].val[j];
  return {id};
}

Value Tape::mul_colvec(Value m, Value col) {
  const Node& nm = nodes_.at(m.id);
  const Node& nc = nodes_.at(col.id);
  if (nc.cols != 1 || nc.rows != nm.rows)
    dim_error("mul_colvec", nm.rows, nm.cols, nc.rows, nc.cols);
  Node n;
  n.op = Op::MulColVec;
  n.a = m.id;
  n.b = col.id;
  n.rows = nm.rows;
  n.cols = nm.cols;
  int id = push(std::move(n));
  for (int i = 0; i < nodes_[id].rows; ++i)
    for (int j = 0; j < nodes_[id].cols; ++j)
      nodes_[id].val[i * nodes_[id].cols + j] =
          nodes_[m.id].val[i * nodes_[id].cols + j] * nodes_[col.id].val[i];
  return {id};
}

Value Tape::activation(Value x, Activation kind) {
  Node n;
  n.op = Op::Act;
  n.act = kind;
  n.a = x.id;
  n.rows = nodes_.at(x.id).rows;
  n.cols = nodes_.at(x.id).cols;
  int id = push(std::move(n));
  const auto& in = nodes_[x.id].val;
  auto& out = nodes_[id].val;
  switch (kind) {
    case Activation::Relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0 ? in[i] : 0.0;
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < in.size(); ++i)
        out[i] = 1.0 / (1.0 + std::exp(-in[i]));
      break;
    case Activation::Softplus:
      // log(1 + e^x), overflow-safe
      for (std::size_t i = 0; i < in.size(); ++i)
        out[i] = in[i] > 30 ? in[i] : std::log1p(std::exp(in[i]));
      break;
    case Activation::Exp:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
      break;
    case Activation::Log:
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] <= 0) throw DomainError("log of non-positive value");
        out[i] = std::log(in[i]);
      }
      break;
  }
  return {id};
}

Value Tape::softmax_rows(Value x) {
  Node n;
  n.op = Op::SoftmaxRows;
  n.a = x.id;
  n.rows = nodes_.at(x.id).rows;
  n.cols = nodes_.at(x.id).cols;
  int id = push(std::move(n));
  int R = nodes_[id].rows, C = nodes_[id].cols;
  const auto& in = nodes_[x.id].val;
  auto& out = nodes_[id].val;
  for (int i = 0; i < R; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < C; ++j) mx = std::max(mx, in[i * C + j]);
    double sum = 0;
    for (int j = 0; j < C; ++j) {
      out[i * C + j] = std::exp(in[i * C + j] - mx);
      sum += out[i * C + j];
    }
    for (int j = 0; j < C; ++j) out[i * C + j] /= sum;
  }
  return {id};
}

Value Tape::logsumexp_rows(Value x) {
  Node n;
  n.op = Op::LogsumexpRows;
  n.a = x.id;
  n.rows = nodes_.at(x.id).rows;
  n.cols = 1;
  int id = push(std::move(n));
  int R = nodes_[id].rows, C = nodes_[x.id].cols;
  const auto& in = nodes_[x.id].val;
  for (int i = 0; i < R; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < C; ++j) mx = std::max(mx, in[i * C + j]);
    double sum = 0;
    for (int j = 0; j < C; ++j) sum += std::exp(in[i * C + j] - mx);
    nodes_[id].val[i] = mx + std::log(sum);
  }
  return {id};
}

Value Tape::slice_cols(Value x, int begin, int end) {
  const Node& nx = nodes_.at(x.id);
  if (begin < 0 || end > nx.cols || begin >= end)
    throw DimensionError("slice_cols out of range");
  Node n;
  n.op = Op::SliceCols;
  n.a = x.id;
  n.rows = nx.rows;
  n.cols = end - begin;
  n.col_begin = begin;
  n.col_end = end;
  int id = push(std::move(n));
  int C = nodes_[x.id].cols, W = end - begin;
  for (int i = 0; i < nodes_[id].rows; ++i)
    for (int j = 0; j < W; ++j)
      nodes_[id].val[i * W + j] = nodes_[x.id].val[i * C + begin + j];
  return {id};
}

Value Tape::concat_cols(Value a, Value b) {
  const Node& na = nodes_.at(a.id);
  const Node& nb = nodes_.at(b.id);
  if (na.rows != nb.rows)
    dim_error("concat_cols rows", na.rows, na.cols, nb.rows, nb.cols);
  Node n;
  n.op = Op::ConcatCols;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = na.cols + nb.cols;
  int id = push(std::move(n));
  int Ca = nodes_[a.id].cols, Cb = nodes_[b.id].cols, C = Ca + Cb;
  for (int i = 0; i < nodes_[id].rows; ++i) {
    for (int j = 0; j < Ca; ++j)
      nodes_[id].val[i * C + j] = nodes_[a.id].val[i * Ca + j];
    for (int j = 0; j < Cb; ++j)
      nodes_[id].val[i * C + Ca + j] = nodes_[b.id].val[i * Cb + j];
  }
  return {id};
}

Value Tape::sum_all(Value x) {
  Node n;
  n.op = Op::SumAll;
  n.a = x.id;
  n.rows = 1;
  n.cols = 1;
  int id = push(std::move(n));
  double s = 0;
  for (double v : nodes_[x.id].val) s += v;
  nodes_[id].val[0] = s;
  return {id};
}

Value Tape::mean_all(Value x) {
  Node n;
  n.op = Op::MeanAll;
  n.a = x.id;
  n.rows = 1;
  n.cols = 1;
  int id = push(std::move(n));
  double s = 0;
  for (double v : nodes_[x.id].val) s += v;
  nodes_[id].val[0] = s / static_cast<double>(nodes_[x.id].val.size());
  return {id};
}

Value Tape::scale(Value x, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = x.id;
  n.c = c;
  n.rows = nodes_.at(x.id).rows;
  n.cols = nodes_.at(x.id).cols;
  int id = push(std::move(n));
  for (std::size_t i = 0; i < nodes_[id].val.size(); ++i)
    nodes_[id].val[i] = nodes_[x.id].val[i] * c;
  return {id};
}

Value Tape::add_const(Value x, double c) {
  Node n;
  n.op = Op::AddConst;
  n.a = x.id;
  n.c = c;
  n.rows = nodes_.at(x.id).rows;
  n.cols = nodes_.at(x.id).cols;
  int id = push(std::move(n));
  for (std::size_t i = 0; i < nodes_[id].val.size(); ++i)
    nodes_[id].val[i] = nodes_[x.id].val[i] + c;
  return {id};
}

Value Tape::neg(Value x) { return scale(x, -1.0); }

double Tape::scalar_val(Value v) const {
  const Node& n = nodes_.at(v.id);
  if (n.rows != 1 || n.cols != 1)
    throw ContractError("scalar_val on non-scalar node");
  return n.val[0];
}

void Tape::backward(Value loss) {
  Node& ln = nodes_.at(loss.id);
  if (ln.rows != 1 || ln.cols != 1)
    throw ContractError("backward requires a scalar loss");
  // Node grads are scratch per backward pass; only bound parameter grads
  // accumulate across calls.
  for (Node& n : nodes_) n.grad.assign(n.val.size(), 0.0);
  ln.grad[0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    bool any = false;
    for (double g : n.grad)
      if (g != 0) {
        any = true;
        break;
      }
    if (!any && n.op != Op::Leaf) continue;
    switch (n.op) {
      case Op::Leaf:
        if (n.param != nullptr)
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.param->grad[i] += n.grad[i];
        break;
      case Op::Matmul: {
        Node& A = nodes_[n.a];
        Node& B = nodes_[n.b];
        CMatMap Av(A.val.data(), A.rows, A.cols);
        CMatMap Bv(B.val.data(), B.rows, B.cols);
        CMatMap G(n.grad.data(), n.rows, n.cols);
        MatMap Ag(A.grad.data(), A.rows, A.cols);
        MatMap Bg(B.grad.data(), B.rows, B.cols);
        Ag.noalias() += G * Bv.transpose();
        Bg.noalias() += Av.transpose() * G;
        break;
      }
      case Op::Add:
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          nodes_[n.a].grad[i] += n.grad[i];
          nodes_[n.b].grad[i] += n.grad[i];
        }
        break;
      case Op::Sub:
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          nodes_[n.a].grad[i] += n.grad[i];
          nodes_[n.b].grad[i] -= n.grad[i];
        }
        break;
      case Op::Mul:
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          nodes_[n.a].grad[i] += n.grad[i] * nodes_[n.b].val[i];
          nodes_[n.b].grad[i] += n.grad[i] * nodes_[n.a].val[i];
        }
        break;
      case Op::Div:
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          double bi = nodes_[n.b].val[i];
          nodes_[n.a].grad[i] += n.grad[i] / bi;
          nodes_[n.b].grad[i] -= n.grad[i] * nodes_[n.a].val[i] / (bi * bi);
        }
        break;
      case Op::AddRowVec:
        for (int i = 0; i < n.rows; ++i)
          for (int j = 0; j < n.cols; ++j) {
            nodes_[n.a].grad[i * n.cols + j] += n.grad[i * n.cols + j];
            nodes_[n.b].grad[j] += n.grad[i * n.cols + j];
          }
        break;
      case Op::MulColVec:
        for (int i = 0; i < n.rows; ++i)
          for (int j = 0; j < n.cols; ++j) {
            double g = n.grad[i * n.cols + j];
            nodes_[n.a].grad[i * n.cols + j] += g * nodes_[n.b].val[i];
            nodes_[n.b].grad[i] += g * nodes_[n.a].val[i * n.cols + j];
          }
        break;
      case Op::Act: {
        Node& X = nodes_[n.a];
        switch (n.act) {
          case Activation::Relu:
            for (std::size_t i = 0; i < n.grad.size(); ++i)
              X.grad[i] += X.val[i] > 0 ? n.grad[i] : 0.0;
            break;
          case Activation::Tanh:
            for (std::size_t i = 0; i < n.grad.size(); ++i)
              X.grad[i] += n.grad[i] * (1.0 - n.val[i] * n.val[i]);
            break;
          case Activation::Sigmoid:
            for (std::size_t i = 0; i < n.grad.size(); ++i)
              X.grad[i] += n.grad[i] * n.val[i] * (1.0 - n.val[i]);
            break;
          case Activation::Softplus:
            for (std::size_t i = 0; i < n.grad.size(); ++i)
              X.grad[i] += n.grad[i] / (1.0 + std::exp(-X.val[i]));
            break;
          case Activation::Exp:
            for (std::size_t i = 0; i < n.grad.size(); ++i)
              X.grad[i] += n.grad[i] * n.val[i];
            break;
          case Activation::Log:
            for (std::size_t i = 0; i < n.grad.size(); ++i)
              X.grad[i] += n.grad[i] / X.val[i];
            break;
        }
        break;
      }
      case Op::SoftmaxRows: {
        Node& X = nodes_[n.a];
        for (int i = 0; i < n.rows; ++i) {
          double dot = 0;
          for (int j = 0; j < n.cols; ++j)
            dot += n.grad[i * n.cols + j] * n.val[i * n.cols + j];
          for (int j = 0; j < n.cols; ++j)
            X.grad[i * n.cols + j] +=
                n.val[i * n.cols + j] * (n.grad[i * n.cols + j] - dot);
        }
        break;
      }
      case Op::LogsumexpRows: {
        Node& X = nodes_[n.a];
        int C = X.cols;
        for (int i = 0; i < n.rows; ++i) {
          for (int j = 0; j < C; ++j)
            X.grad[i * C + j] +=
                n.grad[i] * std::exp(X.val[i * C + j] - n.val[i]);
        }
        break;
      }
      case Op::SliceCols: {
        Node& X = nodes_[n.a];
        int C = X.cols, W = n.cols;
        for (int i = 0; i < n.rows; ++i)
          for (int j = 0; j < W; ++j)
            X.grad[i * C + n.col_begin + j] += n.grad[i * W + j];
        break;
      }
      case Op::ConcatCols: {
        Node& A = nodes_[n.a];
        Node& B = nodes_[n.b];
        int Ca = A.cols, Cb = B.cols, C = n.cols;
        for (int i = 0; i < n.rows; ++i) {
          for (int j = 0; j < Ca; ++j)
            A.grad[i * Ca + j] += n.grad[i * C + j];
          for (int j = 0; j < Cb; ++j)
            B.grad[i * Cb + j] += n.grad[i * C + Ca + j];
        }
        break;
      }
      case Op::SumAll:
        for (double& g : nodes_[n.a].grad) g += n.grad[0];
        break;
      case Op::MeanAll: {
        double g = n.grad[0] / static_cast<double>(nodes_[n.a].val.size());
        for (double& ag : nodes_[n.a].grad) ag += g;
        break;
      }
      case Op::Scale:
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          nodes_[n.a].grad[i] += n.grad[i] * n.c;
        break;
      case Op::AddConst:
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          nodes_[n.a].grad[i] += n.grad[i];
        break;
      case Op::Neg:
        break;  // unreachable; Neg lowers to Scale
    }
  }
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(ParamStore& params, AdamState& state) {
  const auto& ps = params.all();
  if (state.m.size() != ps.size()) {
    state.m.resize(ps.size());
    state.v.resize(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      state.m[i].assign(ps[i]->data.size(), 0.0);
      state.v[i].assign(ps[i]->data.size(), 0.0);
    }
  }
  state.step += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Param& p = *ps[i];
    if (state.m[i].size() != p.data.size())
      throw DimensionError("adam moment buffer does not match parameter " +
                           p.name);
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      double g = p.grad[j];
      state.m[i][j] = b1 * state.m[i][j] + (1 - b1) * g;
      state.v[i][j] = b2 * state.v[i][j] + (1 - b2) * g * g;
      double mhat = state.m[i][j] / bc1;
      double vhat = state.v[i][j] / bc2;
      p.data[j] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Layers and gradient checking

Linear make_linear(ParamStore& store, const std::string& name, int in, int out,
                   std::mt19937_64& rng) {
  Linear l;
  l.weight = &store.add(name + ".w", in, out);
  l.bias = &store.add(name + ".b", 1, out);
  double bound = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : l.weight->data) v = dist(rng);
  return l;
}

Value apply_linear(Tape& t, const Linear& layer, Value x) {
  return t.add_rowvec(t.matmul(x, t.param(*layer.weight)),
                      t.param(*layer.bias));
}

double grad_check(ParamStore& store,
                  const std::function<Value(Tape&)>& build_loss, double eps) {
  store.zero_grad();
  {
    Tape t;
    Value loss = build_loss(t);
    t.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& p : store.all()) analytic.push_back(p->grad);

  double worst = 0;
  const auto& ps = store.all();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Param& p = *ps[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      double keep = p.data[j];
      p.data[j] = keep + eps;
      double up;
      {
        Tape t;
        up = t.scalar_val(build_loss(t));
      }
      p.data[j] = keep - eps;
      double down;
      {
        Tape t;
        down = t.scalar_val(build_loss(t));
      }
      p.data[j] = keep;
      double numeric = (up - down) / (2 * eps);
      double a = analytic[i][j];
      double err = std::abs(a - numeric) /
                   std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace pursuit::grad
