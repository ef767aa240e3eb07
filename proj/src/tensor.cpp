#include "pc/tensor.hpp"

#include <cmath>
#include <sstream>

namespace pc {

OpCounters& counters() {
  static thread_local OpCounters c;
  return c;
}

size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(shape_numel(shape_), real(0));
}

Tensor::Tensor(Shape shape, std::vector<real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size())
    throw ShapeError("Tensor: shape " + pc::shape_str(shape_) + " needs " +
                     std::to_string(shape_numel(shape_)) + " values, got " +
                     std::to_string(data_.size()));
}

Tensor Tensor::full(Shape shape, real value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::vec(std::initializer_list<real> values) {
  return Tensor({values.size()}, std::vector<real>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<real>> rows) {
  size_t r = rows.size();
  size_t c = r ? rows.begin()->size() : 0;
  std::vector<real> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor::matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

size_t Tensor::extent(size_t axis) const {
  if (axis >= shape_.size())
    throw ShapeError("Tensor::extent: axis " + std::to_string(axis) +
                     " out of rank " + std::to_string(shape_.size()));
  return shape_[axis];
}

size_t Tensor::rows() const {
  if (rank() != 2)
    throw ShapeError("Tensor::rows: want rank 2, have " + shape_str());
  return shape_[0];
}

size_t Tensor::cols() const {
  if (rank() != 2)
    throw ShapeError("Tensor::cols: want rank 2, have " + shape_str());
  return shape_[1];
}

real& Tensor::at(size_t r, size_t c) {
  if (r >= rows() || c >= cols())
    throw IndexError("Tensor::at(" + std::to_string(r) + ", " +
                     std::to_string(c) + ") out of " + shape_str());
  return data_[r * shape_[1] + c];
}

real Tensor::at(size_t r, size_t c) const {
  return const_cast<Tensor*>(this)->at(r, c);
}

std::string Tensor::shape_str() const { return pc::shape_str(shape_); }

void Tensor::fill(real value) {
  for (real& x : data_) x = value;
}

bool Tensor::all_finite() const {
  for (real x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_numel(shape) != data_.size())
    throw ShapeError("reshape: " + shape_str() + " to " +
                     pc::shape_str(shape) + " changes element count");
  shape_ = std::move(shape);
  return std::move(*this);
}

Tensor uniform_scaled(Shape shape, size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw ConfigError("uniform_scaled: fan_in must be positive");
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (real& x : t.flat()) x = static_cast<real>(rng.uniform_open(-bound, bound));
  return t;
}

Tensor ParamInit::make(Shape shape, size_t fan_in) const {
  if (scheme == Scheme::kZeros) return Tensor::zeros(std::move(shape));
  Rng rng(seed);
  return uniform_scaled(std::move(shape), fan_in, rng);
}

}  // namespace pc
