#include "clap/numkit/dense.hpp"

#include <cmath>
#include <cstring>

#include "clap/rng.hpp"

namespace clap::numkit {

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(
    const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  DenseMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols())
      throw UsageError("from_rows: ragged row lengths");
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void DenseMatrix::fill(double v) {
  for (double& x : data_) x = v;
}

void DenseMatrix::validate_finite(const char* what) const {
  for (double x : data_) {
    if (!std::isfinite(x))
      throw NumericError(std::string(what) + ": non-finite entry");
  }
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw UsageError("matmul: shape mismatch");
  DenseMatrix out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

DenseMatrix matmul_bt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw UsageError("matmul_bt: shape mismatch");
  DenseMatrix out(a.rows(), b.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = dot(a.row(i), b.row(j));
    }
  }
  return out;
}

DenseMatrix matmul_at(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw UsageError("matmul_at: shape mismatch");
  DenseMatrix out(a.cols(), b.cols(), 0.0);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

void add_inplace(DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw UsageError("add_inplace: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

void scale_inplace(DenseMatrix& a, double s) {
  for (double& x : a.data()) x *= s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("l2_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

DenseMatrix normalize_rows(const DenseMatrix& x, std::vector<double>* norms) {
  DenseMatrix z(x.rows(), x.cols());
  if (norms) norms->assign(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double n = l2_norm(x.row(i));
    if (norms) (*norms)[i] = n;
    if (n == 0.0) continue;
    for (std::size_t j = 0; j < x.cols(); ++j) z(i, j) = x(i, j) / n;
  }
  return z;
}

DenseMatrix normalize_rows_backward(const DenseMatrix& z,
                                    const std::vector<double>& norms,
                                    const DenseMatrix& grad_z) {
  if (!z.same_shape(grad_z) || norms.size() != z.rows())
    throw UsageError("normalize_rows_backward: shape mismatch");
  DenseMatrix dx(z.rows(), z.cols(), 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double n = norms[i];
    if (n == 0.0) continue;
    double g_dot_z = dot(grad_z.row(i), z.row(i));
    for (std::size_t j = 0; j < z.cols(); ++j) {
      dx(i, j) = (grad_z(i, j) - g_dot_z * z(i, j)) / n;
    }
  }
  return dx;
}

std::uint64_t checksum(std::span<const double> values, std::uint64_t h) {
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = fnv1a64_u64(bits, h);
  }
  return h;
}

}  // namespace clap::numkit
