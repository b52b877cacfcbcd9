#pragma once

// Dense double-precision containers plus the small set of numeric
// primitives everything else is assembled from. Layout is row-major
// and all math is 64-bit; checkpoint bytes depend on both.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgsm {

using Vector = std::vector<double>;

inline std::string shape_str(std::size_t rows, std::size_t cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

class Matrix {
public:
  // Default-constructed matrices are empty placeholders (e.g. a gradient
  // slot for a frozen tensor); sized matrices always have rows, cols >= 1.
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw std::invalid_argument("Matrix: dimensions must be positive, got " +
                                  shape_str(rows, cols));
    }
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) {
      throw std::invalid_argument("Matrix::from_rows: no rows");
    }
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
      if (row.size() != m.cols_) {
        throw std::invalid_argument("Matrix::from_rows: ragged rows");
      }
      std::size_t c = 0;
      for (double v : row) m(r, c++) = v;
      ++r;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  Vector row_copy(std::size_t r) const {
    return Vector(row_ptr(r), row_ptr(r) + cols_);
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::span<double> flat() { return {data_.data(), data_.size()}; }
  std::span<const double> flat() const { return {data_.data(), data_.size()}; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// deterministic RNG
// ---------------------------------------------------------------------------

// xoshiro256** with splitmix64 seeding. Fixed algorithm, integer-only state
// transitions: the same seed yields the same stream on every platform, which
// the training-reproducibility checks rely on.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1), 53 bits of mantissa
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) {
      throw std::invalid_argument("Rng::next_below: bound must be positive");
    }
    return next_u64() % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_below(i)]);
    }
  }

private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

// ---------------------------------------------------------------------------
// core operations
// ---------------------------------------------------------------------------

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " +
                                shape_str(a.rows(), a.cols()) + " * " +
                                shape_str(b.rows(), b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* bk = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// y = m * x for m (r x c), x length c
inline Vector matvec(const Matrix& m, const Vector& x) {
  if (m.cols() != x.size()) {
    throw std::invalid_argument("matvec: shape mismatch " +
                                shape_str(m.rows(), m.cols()) + " * vec[" +
                                std::to_string(x.size()) + "]");
  }
  Vector y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row_ptr(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

// y += m^T * v for m (r x c), v length r; y length c
inline void add_matvec_transposed(const Matrix& m, const Vector& v, Vector& y) {
  if (m.rows() != v.size() || m.cols() != y.size()) {
    throw std::invalid_argument("add_matvec_transposed: shape mismatch " +
                                shape_str(m.rows(), m.cols()));
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] += vi * row[j];
  }
}

// m += u * v^T for u length rows, v length cols
inline void add_outer(Matrix& m, const Vector& u, const Vector& v) {
  if (m.rows() != u.size() || m.cols() != v.size()) {
    throw std::invalid_argument("add_outer: shape mismatch " +
                                shape_str(m.rows(), m.cols()));
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < v.size(); ++j) row[j] += ui * v[j];
  }
}

inline void axpy(double a, const Vector& x, Vector& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("axpy: length mismatch");
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline Vector softmax(const Vector& x) {
  if (x.empty()) {
    throw std::invalid_argument("softmax: empty input");
  }
  double max_val = x[0];
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw std::domain_error("softmax: non-finite input entry");
    }
    if (v > max_val) max_val = v;
  }
  Vector y(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - max_val);
    sum += y[i];
  }
  for (double& v : y) v /= sum;
  return y;
}

enum class Activation { Sigmoid, Tanh };

inline double sigmoid(double x) {
  // split on sign to avoid exp overflow
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Vector activate(const Vector& x, Activation kind) {
  Vector y(x.size());
  if (kind == Activation::Sigmoid) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  }
  return y;
}

// derivative expressed through the forward output y:
// sigmoid' = y(1-y), tanh' = 1-y^2
inline Vector activation_grad_from_output(const Vector& y, Activation kind) {
  Vector g(y.size());
  if (kind == Activation::Sigmoid) {
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] * (1.0 - y[i]);
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = 1.0 - y[i] * y[i];
  }
  return g;
}

inline Matrix seeded_uniform(Rng& rng, std::size_t rows, std::size_t cols,
                             double half_range) {
  if (half_range <= 0.0) {
    throw std::invalid_argument("seeded_uniform: half_range must be positive");
  }
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-half_range, half_range);
  return m;
}

inline void fill_uniform(Rng& rng, Vector& v, double half_range) {
  for (double& x : v) x = rng.uniform(-half_range, half_range);
}

// Scales every tensor by max_norm/g when the global L2 norm g exceeds
// max_norm; returns the scale applied (1 when no clipping happened).
inline double clip_global_norm(const std::vector<std::span<double>>& tensors,
                               double max_norm) {
  if (max_norm <= 0.0) {
    throw std::invalid_argument("clip_global_norm: max_norm must be positive");
  }
  double sq = 0.0;
  for (const auto& t : tensors) {
    for (double v : t) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return 1.0;
  const double scale = max_norm / norm;
  for (const auto& t : tensors) {
    for (double& v : t) v *= scale;
  }
  return scale;
}

}  // namespace tgsm
