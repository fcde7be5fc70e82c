#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace darer {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major boolean matrix. Used for attention masks and adjacency views.
class BoolMatrix {
 public:
  BoolMatrix() = default;
  BoolMatrix(std::size_t rows, std::size_t cols, bool fill = false)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool operator()(std::size_t i, std::size_t j) const { return bits_[i * cols_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { bits_[i * cols_ + j] = v ? 1 : 0; }
  std::size_t count() const;
  BoolMatrix transposed() const;

  bool operator==(const BoolMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
};

/// Shared handle to a dense array of doubles. Copies alias the same storage.
///
/// Rank-1 tensors behave as a single row wherever an operation expects a
/// matrix; rank-0 tensors are scalars.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                        bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->value.size(); }
  /// Rows of the matrix view (1 for rank 0 and 1).
  std::size_t rows() const;
  /// Columns of the matrix view.
  std::size_t cols() const;

  std::span<double> data() { return impl_->value; }
  std::span<const double> data() const { return impl_->value; }
  const std::vector<double>& values() const { return impl_->value; }

  double item() const;
  double at(std::size_t i) const { return impl_->value[i]; }
  double at(std::size_t i, std::size_t j) const { return impl_->value[i * cols() + j]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient values; zeros if nothing has been accumulated yet.
  std::vector<double> grad() const;
  /// Mutable gradient storage, allocated (zeroed) on first use.
  std::span<double> grad_storage() const;
  void zero_grad() const;

  /// Detached deep copy.
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Ordered record of differentiable operations.
///
/// Operations append a backward closure when a tape is active on the
/// current thread and at least one input requires a gradient. Recording
/// order is a topological order, so backward replays entries in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn);
  /// Seeds d(loss)=1 and replays every entry in reverse order. The tape is
  /// consumed: a second call without new recordings throws TapeError.
  void backward(const Tensor& loss);
  void clear();
  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<BackwardFn> entries_;
  bool consumed_ = false;
};

/// Installs a tape as the thread's active tape for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Active tape on this thread, or nullptr (inference: nothing is recorded).
Tape* active_tape();

/// Runs backward on the active tape.
void backward(const Tensor& loss);

/// Helper for defining operations. When recording is needed the output is
/// marked as requiring a gradient and `fn` is queued; `fn` receives the
/// output's gradient and is only invoked if that gradient was populated.
void record_op(Tensor& out, std::initializer_list<const Tensor*> inputs,
               std::function<void(std::span<const double> out_grad)> fn);
void record_op(Tensor& out, const std::vector<Tensor>& inputs,
               std::function<void(std::span<const double> out_grad)> fn);

}  // namespace darer
