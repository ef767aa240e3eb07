#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "pc/errors.hpp"
#include "pc/rng.hpp"

namespace pc {

#ifdef PC_REAL_FLOAT32
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<size_t>;

// Work tally maintained by the kernels. One instance per thread; reset it
// around a region to measure that region. Matrix multiply-adds count as two
// operations, elementwise transcendentals as one per element, and `lookups`
// counts embedding-table rows fetched.
struct OpCounters {
  uint64_t flops = 0;
  uint64_t lookups = 0;
  void reset() {
    flops = 0;
    lookups = 0;
  }
};
OpCounters& counters();

// Dense row-major tensor. Plain value type: copy copies the buffer, move
// steals it. Distinct tensors never alias, so passing copies between threads
// is safe; concurrent mutation of one tensor is not synchronized.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<real> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, real value);
  static Tensor scalar(real value) { return Tensor({1}, {value}); }
  static Tensor vec(std::initializer_list<real> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<real>> rows);

  size_t rank() const { return shape_.size(); }
  const Shape& shape() const { return shape_; }
  size_t extent(size_t axis) const;
  size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // 2-D accessors; rows()/cols() require rank 2.
  size_t rows() const;
  size_t cols() const;
  real& at(size_t r, size_t c);
  real at(size_t r, size_t c) const;

  real& operator[](size_t i) { return data_[i]; }
  real operator[](size_t i) const { return data_[i]; }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }
  real* row_ptr(size_t r) { return data_.data() + r * cols(); }
  const real* row_ptr(size_t r) const { return data_.data() + r * cols(); }
  std::span<real> flat() { return {data_.data(), data_.size()}; }
  std::span<const real> flat() const { return {data_.data(), data_.size()}; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

  void fill(real value);
  bool all_finite() const;

  // Reinterprets the buffer under a new shape with the same element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  std::vector<real> data_;
};

std::string shape_str(const Shape& s);
size_t shape_numel(const Shape& s);

// Uniform on the open interval (-1/sqrt(fan_in), +1/sqrt(fan_in)).
Tensor uniform_scaled(Shape shape, size_t fan_in, Rng& rng);

// Parameter initialization recipe: pure function of (seed, shape, fan_in).
struct ParamInit {
  enum class Scheme { kUniformScaled, kZeros };
  Scheme scheme = Scheme::kUniformScaled;
  uint64_t seed = 0;
  Tensor make(Shape shape, size_t fan_in) const;
};

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

}  // namespace pc
