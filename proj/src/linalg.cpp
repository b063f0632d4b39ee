#include "broadface/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "broadface/errors.hpp"

namespace broadface {

namespace {

bool finite_range(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void require_same_size(const char* what, std::size_t expected, std::size_t actual) {
  if (expected != actual) throw DimensionMismatch(what, expected, actual);
}

}  // namespace

bool Vector::all_finite() const noexcept { return finite_range(data_); }

Vector& Vector::operator+=(std::span<const double> other) {
  require_same_size("vector add", size(), other.size());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other[i];
  return *this;
}

Vector& Vector::operator-=(std::span<const double> other) {
  require_same_size("vector subtract", size(), other.size());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other[i];
  return *this;
}

Vector& Vector::operator*=(double scale) noexcept {
  for (double& v : data_) v *= scale;
  return *this;
}

Vector operator+(Vector a, std::span<const double> b) { return a += b; }
Vector operator-(Vector a, std::span<const double> b) { return a -= b; }
Vector operator*(double scale, Vector v) { return v *= scale; }

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_same_size("matrix data", rows_ * cols_, data_.size());
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require_same_size("matrix row", cols_, r.size());
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const noexcept { return finite_range(data_); }

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size("dot", a.size(), b.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double l2_norm(std::span<const double> a) noexcept {
  double sum = 0.0;
  for (double v : a) sum += v * v;
  return std::sqrt(sum);
}

Vector l2_normalize(std::span<const double> a) {
  const double norm = l2_norm(a);
  if (!(norm > kNormEpsilon)) throw NearZeroNorm("cannot normalize a vector with norm " + std::to_string(norm));
  Vector out(a);
  const double inv = 1.0 / norm;
  out *= inv;
  return out;
}

Vector matvec(const Matrix& m, std::span<const double> v) {
  require_same_size("matvec", m.cols(), v.size());
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double sum = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) sum += row[c] * v[c];
    out[r] = sum;
  }
  return out;
}

void axpy(double scale, std::span<const double> x, std::span<double> out) {
  require_same_size("axpy", out.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += scale * x[i];
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) throw NearZeroNorm("cosine similarity of a zero vector");
  return dot(a, b) / (na * nb);
}

}  // namespace broadface
