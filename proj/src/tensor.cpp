#include "darer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace darer {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::size_t BoolMatrix::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BoolMatrix BoolMatrix::transposed() const {
  BoolMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t.set(j, i, (*this)(i, j));
  return t;
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->value.assign(1, 0.0); }

Tensor::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<TensorImpl>()) {
  for (auto s : shape)
    if (s == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  impl_->value.assign(shape_numel(shape), 0.0);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (auto s : shape)
    if (s == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != values.size())
    throw DimensionError("shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  impl_->shape = std::move(shape);
  impl_->value = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return Tensor(std::move(shape), requires_grad); }

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.impl_->value.begin(), t.impl_->value.end(), v);
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor(Shape{}, {v}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(v), requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& x : t.impl_->value) x = dist(rng);
  return t;
}

std::size_t Tensor::rows() const {
  const auto& s = impl_->shape;
  if (s.size() <= 1) return 1;
  if (s.size() == 2) return s[0];
  throw DimensionError("matrix view of rank-" + std::to_string(s.size()) + " tensor " + shape_str(s));
}

std::size_t Tensor::cols() const {
  const auto& s = impl_->shape;
  if (s.empty()) return 1;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw DimensionError("matrix view of rank-" + std::to_string(s.size()) + " tensor " + shape_str(s));
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return impl_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

std::span<double> Tensor::grad_storage() const {
  if (impl_->grad.empty()) impl_->grad.assign(numel(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() const {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t;
  t.impl_->shape = impl_->shape;
  t.impl_->value = impl_->value;
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

void Tape::record(BackwardFn fn) {
  consumed_ = false;
  entries_.push_back(std::move(fn));
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw DimensionError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  if (consumed_) throw TapeError("backward called twice without a new forward pass");
  consumed_ = true;
  if (!loss.requires_grad()) {
    entries_.clear();
    return;
  }
  Tensor seed = loss;
  seed.grad_storage()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
}

void Tape::clear() {
  entries_.clear();
  consumed_ = false;
}

void backward(const Tensor& loss) {
  Tape* tape = active_tape();
  if (!tape) throw TapeError("backward called with no active tape");
  tape->backward(loss);
}

namespace {

template <typename Range>
void record_impl(Tensor& out, const Range& inputs,
                 std::function<void(std::span<const double>)> fn) {
  Tape* tape = active_tape();
  if (!tape) return;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in->requires_grad();
  if (!needs) return;
  out.set_requires_grad(true);
  std::shared_ptr<TensorImpl> out_impl = out.shared();
  tape->record([out_impl, fn = std::move(fn)]() {
    if (out_impl->grad.empty()) return;
    fn(out_impl->grad);
  });
}

}  // namespace

void record_op(Tensor& out, std::initializer_list<const Tensor*> inputs,
               std::function<void(std::span<const double>)> fn) {
  record_impl(out, inputs, std::move(fn));
}

void record_op(Tensor& out, const std::vector<Tensor>& inputs,
               std::function<void(std::span<const double>)> fn) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& t : inputs) ptrs.push_back(&t);
  record_impl(out, ptrs, std::move(fn));
}

}  // namespace darer
