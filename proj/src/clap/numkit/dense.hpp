#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "clap/common.hpp"
#include "clap/rng.hpp"

namespace clap::numkit {

// Row-major dense matrix of 64-bit floats. Entries are expected to stay
// finite; validate_finite() is the explicit check applied at data
// boundaries (file loads, checkpoint loads).
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const DenseMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(double v);
  void validate_finite(const char* what) const;  // throws NumericError

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a(m,k) * b(k,n) -> (m,n)
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// a(m,k) * b(n,k)^T -> (m,n)
DenseMatrix matmul_bt(const DenseMatrix& a, const DenseMatrix& b);
// a(k,m)^T * b(k,n) -> (m,n)
DenseMatrix matmul_at(const DenseMatrix& a, const DenseMatrix& b);

void add_inplace(DenseMatrix& a, const DenseMatrix& b);
void scale_inplace(DenseMatrix& a, double s);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double l2_distance(std::span<const double> a, std::span<const double> b);

// Rows scaled to unit L2 norm. Zero rows stay zero. Norms are returned for
// the backward pass.
DenseMatrix normalize_rows(const DenseMatrix& x,
                           std::vector<double>* norms = nullptr);
// Gradient through row normalization: dx_i = (dz_i - (dz_i . z_i) z_i) / n_i.
DenseMatrix normalize_rows_backward(const DenseMatrix& z,
                                    const std::vector<double>& norms,
                                    const DenseMatrix& grad_z);

// FNV over raw byte patterns, for frozen-parameter assertions.
std::uint64_t checksum(std::span<const double> values,
                       std::uint64_t h = kFnvOffset);

}  // namespace clap::numkit
