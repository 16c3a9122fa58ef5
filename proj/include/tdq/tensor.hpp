#pragma once

// Dense row-major double tensors and a define-by-run reverse-mode tape.
//
// A Tensor is a shared handle: copies alias the same storage. Parameters are
// created with requires_grad and mutated only by optimizers and gradient
// checks; tensors produced by a Tape are read-only results.
//
// All tape primitives operate on rank-2 tensors. Row vectors are [1, n] and a
// scalar is [1, 1].

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tdq::tensor {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return storage_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Rank-2 accessors; rank-1 tensors read as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  // Allocates a zero gradient if none exists yet.
  std::span<double> ensure_grad();
  void zero_grad();
  void clear_grad();

  // Deep copy without gradient.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const noexcept {
    return storage_ == other.storage_;
  }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Storage> s) : storage_(std::move(s)) {}
  Storage& storage() const;

  std::shared_ptr<Storage> storage_;
};

// Numerically stable softmax of a plain vector. Throws InvalidInput on empty
// input or non-finite entries.
std::vector<double> softmax(std::span<const double> x);
std::vector<double> log_softmax(std::span<const double> x);

enum class Primitive {
  MatMul,
  Add,
  AddBias,
  Mul,
  MulCol,
  Concat,
  Slice,
  Tanh,
  Sigmoid,
  Softmax,
  LogSoftmax,
  LogSumExp,
  Log,
  Gather,
  Pick,
  Sum,
  Scale,
};

const char* to_string(Primitive op) noexcept;

// Non-tensor arguments for parameterised primitives.
struct PrimitiveAttrs {
  double factor = 1.0;                 // Scale
  std::size_t offset = 0;              // Slice
  std::size_t length = 0;              // Slice
  std::vector<std::size_t> indices;    // Gather rows / Pick columns
};

class Tape {
 public:
  // A non-recording tape evaluates primitives without keeping the graph.
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor apply(Primitive op, std::span<const Tensor> inputs,
               const PrimitiveAttrs& attrs = {});

  // [m,k] x [k,n] -> [m,n]
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  // a[m,n] + bias[1,n] broadcast over rows
  Tensor add_bias(const Tensor& a, const Tensor& bias);
  Tensor mul(const Tensor& a, const Tensor& b);
  // a[m,n] * col[m,1] broadcast over columns
  Tensor mul_col(const Tensor& a, const Tensor& col);
  Tensor concat_cols(std::span<const Tensor> parts);
  Tensor slice_cols(const Tensor& a, std::size_t offset, std::size_t length);
  Tensor tanh(const Tensor& a);
  Tensor sigmoid(const Tensor& a);
  Tensor softmax_rows(const Tensor& a);
  Tensor log_softmax_rows(const Tensor& a);
  // [m,n] -> [m,1]
  Tensor logsumexp_rows(const Tensor& a);
  Tensor log(const Tensor& a);
  // table[V,d], ids -> [len(ids), d]
  Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
  // a[m,n], one column per row -> [m,1]
  Tensor pick(const Tensor& a, std::span<const std::size_t> cols);
  // -> [1,1]
  Tensor sum(const Tensor& a);
  Tensor scale(const Tensor& a, double factor);

  // Reverse sweep from a single-element tensor. May be called once per
  // recording; reset() clears the tape for reuse.
  void backward(const Tensor& loss);
  void reset();

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void(Node&)> backward;
  };

  Tensor record(std::vector<Tensor> inputs, Tensor output, Primitive op,
                std::function<void(Node&)> rule);

  std::vector<Node> nodes_;
  bool record_;
  bool backward_done_ = false;
};

}  // namespace tdq::tensor
