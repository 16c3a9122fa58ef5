#include "tdq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tdq/error.hpp"
#include "tdq/kernels.hpp"

namespace tdq::tensor {

namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void check_finite(const Tensor& t, Primitive op) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      fail(ErrorKind::Numeric, std::string("non-finite value produced by ") +
                                   to_string(op));
    }
  }
}

[[noreturn]] void shape_error(Primitive op, const std::string& detail) {
  fail(ErrorKind::Shape, std::string(to_string(op)) + ": " + detail);
}

void require_matrix(Primitive op, const Tensor& t, const char* name) {
  if (!t.defined()) shape_error(op, std::string(name) + " is undefined");
  if (t.rank() != 2) {
    shape_error(op, std::string(name) + " must be rank 2, got " +
                        shape_string(t.shape()));
  }
}

void require_same(Primitive op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_error(op, "operand shapes differ: " + shape_string(a.shape()) +
                        " vs " + shape_string(b.shape()));
  }
}

void require_arity(Primitive op, std::span<const Tensor> inputs,
                   std::size_t n) {
  if (inputs.size() != n) {
    shape_error(op, "expected " + std::to_string(n) + " inputs, got " +
                        std::to_string(inputs.size()));
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) fail(ErrorKind::Shape, "zero-sized dimension in " + shape_string(shape));
  }
  if (shape.empty()) fail(ErrorKind::Shape, "tensor rank must be at least 1");
  auto s = std::make_shared<Storage>();
  s->values.assign(product(shape), 0.0);
  s->shape = std::move(shape);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  if (values.size() != t.size()) {
    fail(ErrorKind::Shape, "value count " + std::to_string(values.size()) +
                               " does not match shape " +
                               shape_string(t.shape()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "non-finite tensor value");
  }
  t.storage().values = std::move(values);
  return t;
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({1, n}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1, 1}, {value}, requires_grad);
}

Tensor::Storage& Tensor::storage() const {
  if (!storage_) fail(ErrorKind::State, "access to an undefined tensor");
  return *storage_;
}

const Shape& Tensor::shape() const { return storage().shape; }
std::size_t Tensor::size() const { return storage().values.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return s.size() == 1 ? 1 : s[0];
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.size() == 1 ? s[0] : size() / s[0];
}

std::span<const double> Tensor::values() const { return storage().values; }
std::span<double> Tensor::mutable_values() { return storage().values; }

double Tensor::item() const {
  if (size() != 1) {
    fail(ErrorKind::InvalidInput,
         "item() on non-scalar tensor " + shape_string(shape()));
  }
  return storage().values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (r >= rows() || c >= cols()) fail(ErrorKind::Range, "tensor index out of range");
  return storage().values[r * cols() + c];
}

bool Tensor::requires_grad() const { return storage().requires_grad; }
void Tensor::set_requires_grad(bool on) { storage().requires_grad = on; }

bool Tensor::has_grad() const { return !storage().grad.empty(); }
std::span<const double> Tensor::grad() const { return storage().grad; }
std::span<double> Tensor::mutable_grad() { return storage().grad; }

std::span<double> Tensor::ensure_grad() {
  Storage& s = storage();
  if (s.grad.empty()) s.grad.assign(s.values.size(), 0.0);
  return s.grad;
}

void Tensor::zero_grad() {
  Storage& s = storage();
  std::fill(s.grad.begin(), s.grad.end(), 0.0);
}

void Tensor::clear_grad() {
  Storage& s = storage();
  s.grad.clear();
  s.grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  auto s = std::make_shared<Storage>();
  s->shape = shape();
  s->values = storage().values;
  s->requires_grad = requires_grad();
  return Tensor(std::move(s));
}

// ---------------------------------------------------------------------------
// Free-standing softmax

std::vector<double> softmax(std::span<const double> x) {
  if (x.empty()) fail(ErrorKind::InvalidInput, "softmax of empty vector");
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "softmax input is not finite");
  }
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> log_softmax(std::span<const double> x) {
  if (x.empty()) fail(ErrorKind::InvalidInput, "log_softmax of empty vector");
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "log_softmax input is not finite");
  }
  const double mx = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double v : x) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
  return out;
}

const char* to_string(Primitive op) noexcept {
  switch (op) {
    case Primitive::MatMul: return "matmul";
    case Primitive::Add: return "add";
    case Primitive::AddBias: return "add_bias";
    case Primitive::Mul: return "mul";
    case Primitive::MulCol: return "mul_col";
    case Primitive::Concat: return "concat";
    case Primitive::Slice: return "slice";
    case Primitive::Tanh: return "tanh";
    case Primitive::Sigmoid: return "sigmoid";
    case Primitive::Softmax: return "softmax";
    case Primitive::LogSoftmax: return "log_softmax";
    case Primitive::LogSumExp: return "logsumexp";
    case Primitive::Log: return "log";
    case Primitive::Gather: return "gather";
    case Primitive::Pick: return "pick";
    case Primitive::Sum: return "sum";
    case Primitive::Scale: return "scale";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::record(std::vector<Tensor> inputs, Tensor output, Primitive op,
                    std::function<void(Node&)> rule) {
  check_finite(output, op);
  if (!record_) return output;
  const bool any_grad = std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& t) { return t.requires_grad(); });
  if (!any_grad) return output;
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(inputs), output, std::move(rule)});
  return output;
}

Tensor Tape::apply(Primitive op, std::span<const Tensor> in,
                   const PrimitiveAttrs& attrs) {
  switch (op) {
    case Primitive::MatMul: require_arity(op, in, 2); return matmul(in[0], in[1]);
    case Primitive::Add: require_arity(op, in, 2); return add(in[0], in[1]);
    case Primitive::AddBias: require_arity(op, in, 2); return add_bias(in[0], in[1]);
    case Primitive::Mul: require_arity(op, in, 2); return mul(in[0], in[1]);
    case Primitive::MulCol: require_arity(op, in, 2); return mul_col(in[0], in[1]);
    case Primitive::Concat: return concat_cols(in);
    case Primitive::Slice: require_arity(op, in, 1);
      return slice_cols(in[0], attrs.offset, attrs.length);
    case Primitive::Tanh: require_arity(op, in, 1); return tanh(in[0]);
    case Primitive::Sigmoid: require_arity(op, in, 1); return sigmoid(in[0]);
    case Primitive::Softmax: require_arity(op, in, 1); return softmax_rows(in[0]);
    case Primitive::LogSoftmax: require_arity(op, in, 1); return log_softmax_rows(in[0]);
    case Primitive::LogSumExp: require_arity(op, in, 1); return logsumexp_rows(in[0]);
    case Primitive::Log: require_arity(op, in, 1); return log(in[0]);
    case Primitive::Gather: require_arity(op, in, 1); return gather_rows(in[0], attrs.indices);
    case Primitive::Pick: require_arity(op, in, 1); return pick(in[0], attrs.indices);
    case Primitive::Sum: require_arity(op, in, 1); return sum(in[0]);
    case Primitive::Scale: require_arity(op, in, 1); return scale(in[0], attrs.factor);
  }
  fail(ErrorKind::InvalidInput, "unknown primitive");
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  constexpr auto op = Primitive::MatMul;
  require_matrix(op, a, "lhs");
  require_matrix(op, b, "rhs");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    shape_error(op, "inner dimensions differ: " + shape_string(a.shape()) +
                        " x " + shape_string(b.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  kernels::gemm_nn(m, n, k, a.values().data(), b.values().data(),
                   out.mutable_values().data());
  return record({a, b}, out, op, [m, n, k](Node& node) {
    const double* dc = node.output.grad().data();
    Tensor& lhs = node.inputs[0];
    Tensor& rhs = node.inputs[1];
    if (lhs.requires_grad()) {
      kernels::gemm_nt(m, k, n, dc, rhs.values().data(), lhs.ensure_grad().data());
    }
    if (rhs.requires_grad()) {
      kernels::gemm_tn(k, n, m, lhs.values().data(), dc, rhs.ensure_grad().data());
    }
  });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  constexpr auto op = Primitive::Add;
  require_matrix(op, a, "lhs");
  require_matrix(op, b, "rhs");
  require_same(op, a, b);
  Tensor out = a.clone();
  out.set_requires_grad(false);
  auto o = out.mutable_values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return record({a, b}, out, op, [](Node& node) {
    auto dy = node.output.grad();
    for (Tensor& in : node.inputs) {
      if (!in.requires_grad()) continue;
      auto g = in.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i];
    }
  });
}

Tensor Tape::add_bias(const Tensor& a, const Tensor& bias) {
  constexpr auto op = Primitive::AddBias;
  require_matrix(op, a, "input");
  require_matrix(op, bias, "bias");
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.rows() != 1 || bias.cols() != n) {
    shape_error(op, "bias " + shape_string(bias.shape()) +
                        " does not broadcast over " + shape_string(a.shape()));
  }
  Tensor out = a.clone();
  out.set_requires_grad(false);
  auto o = out.mutable_values();
  auto bv = bias.values();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) o[r * n + c] += bv[c];
  }
  return record({a, bias}, out, op, [m, n](Node& node) {
    auto dy = node.output.grad();
    if (node.inputs[0].requires_grad()) {
      auto g = node.inputs[0].ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i];
    }
    if (node.inputs[1].requires_grad()) {
      auto g = node.inputs[1].ensure_grad();
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) g[c] += dy[r * n + c];
      }
    }
  });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  constexpr auto op = Primitive::Mul;
  require_matrix(op, a, "lhs");
  require_matrix(op, b, "rhs");
  require_same(op, a, b);
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_values();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  return record({a, b}, out, op, [](Node& node) {
    const auto& kt = kernels::active();
    auto dy = node.output.grad();
    Tensor& lhs = node.inputs[0];
    Tensor& rhs = node.inputs[1];
    if (lhs.requires_grad()) {
      kt.fma(dy.size(), dy.data(), rhs.values().data(), lhs.ensure_grad().data());
    }
    if (rhs.requires_grad()) {
      kt.fma(dy.size(), dy.data(), lhs.values().data(), rhs.ensure_grad().data());
    }
  });
}

Tensor Tape::mul_col(const Tensor& a, const Tensor& col) {
  constexpr auto op = Primitive::MulCol;
  require_matrix(op, a, "input");
  require_matrix(op, col, "column");
  const std::size_t m = a.rows(), n = a.cols();
  if (col.rows() != m || col.cols() != 1) {
    shape_error(op, "column " + shape_string(col.shape()) +
                        " does not broadcast over " + shape_string(a.shape()));
  }
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_values();
  auto av = a.values();
  auto cv = col.values();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) o[r * n + c] = av[r * n + c] * cv[r];
  }
  return record({a, col}, out, op, [m, n](Node& node) {
    const auto& kt = kernels::active();
    auto dy = node.output.grad();
    Tensor& in = node.inputs[0];
    Tensor& cl = node.inputs[1];
    if (in.requires_grad()) {
      auto g = in.ensure_grad();
      auto cv = cl.values();
      for (std::size_t r = 0; r < m; ++r) {
        kt.axpy(n, cv[r], dy.data() + r * n, g.data() + r * n);
      }
    }
    if (cl.requires_grad()) {
      auto g = cl.ensure_grad();
      auto av = in.values();
      for (std::size_t r = 0; r < m; ++r) {
        g[r] += kt.dot(n, dy.data() + r * n, av.data() + r * n);
      }
    }
  });
}

Tensor Tape::concat_cols(std::span<const Tensor> parts) {
  constexpr auto op = Primitive::Concat;
  if (parts.empty()) shape_error(op, "no inputs");
  const std::size_t m = parts.front().defined() ? parts.front().rows() : 0;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_matrix(op, p, "part");
    if (p.rows() != m) {
      shape_error(op, "row counts differ: " + std::to_string(m) + " vs " +
                          std::to_string(p.rows()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out = Tensor::zeros({m, total});
  auto o = out.mutable_values();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto pv = parts[i].values();
    const std::size_t w = widths[i];
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(pv.data() + r * w, w, o.data() + r * total + offset);
    }
    offset += w;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return record(std::move(inputs), out, op, [m, total, widths](Node& node) {
    auto dy = node.output.grad();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      const std::size_t w = widths[i];
      if (node.inputs[i].requires_grad()) {
        auto g = node.inputs[i].ensure_grad();
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < w; ++c) g[r * w + c] += dy[r * total + offset + c];
        }
      }
      offset += w;
    }
  });
}

Tensor Tape::slice_cols(const Tensor& a, std::size_t offset,
                        std::size_t length) {
  constexpr auto op = Primitive::Slice;
  require_matrix(op, a, "input");
  const std::size_t m = a.rows(), n = a.cols();
  if (length == 0 || offset + length > n) {
    shape_error(op, "columns [" + std::to_string(offset) + ", " +
                        std::to_string(offset + length) + ") outside " +
                        shape_string(a.shape()));
  }
  Tensor out = Tensor::zeros({m, length});
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(av.data() + r * n + offset, length, o.data() + r * length);
  }
  return record({a}, out, op, [m, n, offset, length](Node& node) {
    auto dy = node.output.grad();
    auto g = node.inputs[0].ensure_grad();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < length; ++c) g[r * n + offset + c] += dy[r * length + c];
    }
  });
}

Tensor Tape::tanh(const Tensor& a) {
  constexpr auto op = Primitive::Tanh;
  require_matrix(op, a, "input");
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(av[i]);
  return record({a}, out, op, [](Node& node) {
    auto dy = node.output.grad();
    auto y = node.output.values();
    auto g = node.inputs[0].ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i] * (1.0 - y[i] * y[i]);
  });
}

Tensor Tape::sigmoid(const Tensor& a) {
  constexpr auto op = Primitive::Sigmoid;
  require_matrix(op, a, "input");
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double x = av[i];
    if (x >= 0) {
      o[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      o[i] = e / (1.0 + e);
    }
  }
  return record({a}, out, op, [](Node& node) {
    auto dy = node.output.grad();
    auto y = node.output.values();
    auto g = node.inputs[0].ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Tensor Tape::softmax_rows(const Tensor& a) {
  constexpr auto op = Primitive::Softmax;
  require_matrix(op, a, "input");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t r = 0; r < m; ++r) {
    const double* x = av.data() + r * n;
    double* y = o.data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      y[c] = std::exp(x[c] - mx);
      total += y[c];
    }
    for (std::size_t c = 0; c < n; ++c) y[c] /= total;
  }
  return record({a}, out, op, [m, n](Node& node) {
    const auto& kt = kernels::active();
    auto dy = node.output.grad();
    auto y = node.output.values();
    auto g = node.inputs[0].ensure_grad();
    for (std::size_t r = 0; r < m; ++r) {
      const double* yr = y.data() + r * n;
      const double* dyr = dy.data() + r * n;
      const double inner = kt.dot(n, yr, dyr);
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += yr[c] * (dyr[c] - inner);
    }
  });
}

Tensor Tape::log_softmax_rows(const Tensor& a) {
  constexpr auto op = Primitive::LogSoftmax;
  require_matrix(op, a, "input");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t r = 0; r < m; ++r) {
    const double* x = av.data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += std::exp(x[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < n; ++c) o[r * n + c] = x[c] - lse;
  }
  return record({a}, out, op, [m, n](Node& node) {
    auto dy = node.output.grad();
    auto y = node.output.values();
    auto g = node.inputs[0].ensure_grad();
    for (std::size_t r = 0; r < m; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < n; ++c) total += dy[r * n + c];
      for (std::size_t c = 0; c < n; ++c) {
        g[r * n + c] += dy[r * n + c] - std::exp(y[r * n + c]) * total;
      }
    }
  });
}

Tensor Tape::logsumexp_rows(const Tensor& a) {
  constexpr auto op = Primitive::LogSumExp;
  require_matrix(op, a, "input");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros({m, 1});
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t r = 0; r < m; ++r) {
    const double* x = av.data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += std::exp(x[c] - mx);
    o[r] = mx + std::log(total);
  }
  return record({a}, out, op, [m, n](Node& node) {
    auto dy = node.output.grad();
    auto y = node.output.values();
    auto x = node.inputs[0].values();
    auto g = node.inputs[0].ensure_grad();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        g[r * n + c] += dy[r] * std::exp(x[r * n + c] - y[r]);
      }
    }
  });
}

Tensor Tape::log(const Tensor& a) {
  constexpr auto op = Primitive::Log;
  require_matrix(op, a, "input");
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (!(av[i] > 0.0)) fail(ErrorKind::Numeric, "log of non-positive value");
    o[i] = std::log(av[i]);
  }
  return record({a}, out, op, [](Node& node) {
    auto dy = node.output.grad();
    auto x = node.inputs[0].values();
    auto g = node.inputs[0].ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i] / x[i];
  });
}

Tensor Tape::gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  constexpr auto op = Primitive::Gather;
  require_matrix(op, table, "table");
  if (ids.empty()) shape_error(op, "empty index list");
  const std::size_t v = table.rows(), d = table.cols();
  for (std::size_t id : ids) {
    if (id >= v) {
      fail(ErrorKind::Range, "gather: row " + std::to_string(id) +
                                 " outside table of " + std::to_string(v) + " rows");
    }
  }
  Tensor out = Tensor::zeros({ids.size(), d});
  auto o = out.mutable_values();
  auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(tv.data() + ids[i] * d, d, o.data() + i * d);
  }
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return record({table}, out, op, [d, rows = std::move(rows)](Node& node) {
    auto dy = node.output.grad();
    auto g = node.inputs[0].ensure_grad();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < d; ++c) g[rows[i] * d + c] += dy[i * d + c];
    }
  });
}

Tensor Tape::pick(const Tensor& a, std::span<const std::size_t> cols) {
  constexpr auto op = Primitive::Pick;
  require_matrix(op, a, "input");
  const std::size_t m = a.rows(), n = a.cols();
  if (cols.size() != m) {
    shape_error(op, "need one column per row: " + std::to_string(cols.size()) +
                        " indices for " + shape_string(a.shape()));
  }
  for (std::size_t c : cols) {
    if (c >= n) fail(ErrorKind::Range, "pick: column " + std::to_string(c) + " out of range");
  }
  Tensor out = Tensor::zeros({m, 1});
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t r = 0; r < m; ++r) o[r] = av[r * n + cols[r]];
  std::vector<std::size_t> chosen(cols.begin(), cols.end());
  return record({a}, out, op, [n, chosen = std::move(chosen)](Node& node) {
    auto dy = node.output.grad();
    auto g = node.inputs[0].ensure_grad();
    for (std::size_t r = 0; r < chosen.size(); ++r) g[r * n + chosen[r]] += dy[r];
  });
}

Tensor Tape::sum(const Tensor& a) {
  constexpr auto op = Primitive::Sum;
  require_matrix(op, a, "input");
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor out = Tensor::scalar(total);
  return record({a}, out, op, [](Node& node) {
    const double dy = node.output.grad()[0];
    auto g = node.inputs[0].ensure_grad();
    for (double& v : g) v += dy;
  });
}

Tensor Tape::scale(const Tensor& a, double factor) {
  constexpr auto op = Primitive::Scale;
  require_matrix(op, a, "input");
  if (!std::isfinite(factor)) fail(ErrorKind::InvalidInput, "scale factor is not finite");
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * factor;
  return record({a}, out, op, [factor](Node& node) {
    const auto& kt = kernels::active();
    auto dy = node.output.grad();
    auto g = node.inputs[0].ensure_grad();
    kt.axpy(g.size(), factor, dy.data(), g.data());
  });
}

void Tape::backward(const Tensor& loss) {
  if (backward_done_) {
    fail(ErrorKind::State, "backward already ran on this tape; call reset() first");
  }
  if (!loss.defined() || loss.size() != 1) {
    fail(ErrorKind::InvalidInput, "backward needs a single-element loss");
  }
  if (nodes_.empty()) fail(ErrorKind::State, "backward on an empty tape");
  backward_done_ = true;
  Tensor root = loss;
  root.ensure_grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward(*it);
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

}  // namespace tdq::tensor
