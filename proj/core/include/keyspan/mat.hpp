#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace keyspan {

using Vec = std::vector<double>;

// Dense row-major matrix. Everything numeric in the model runs on this
// one type in double precision; no BLAS, so results are bit-stable across
// machines.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c) {}

  double& operator()(int i, int j) {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }

  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const {
    return a.data() + static_cast<std::size_t>(i) * cols;
  }

  std::size_t size() const { return a.size(); }
  void zero() { a.assign(a.size(), 0.0); }
};

// out = x * w, shapes (n×k)·(k×m).
inline void matmul(const Mat& x, const Mat& w, Mat& out) {
  assert(x.cols == w.rows);
  out = Mat(x.rows, w.cols);
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    for (int k = 0; k < x.cols; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      const double* wk = w.row(k);
      for (int j = 0; j < w.cols; ++j) oi[j] += xv * wk[j];
    }
  }
}

// out += xᵀ * y, shapes (n×k)ᵀ·(n×m) → (k×m). Used for weight gradients.
inline void matmul_at_b_accum(const Mat& x, const Mat& y, Mat& out) {
  assert(x.rows == y.rows && out.rows == x.cols && out.cols == y.cols);
  for (int n = 0; n < x.rows; ++n) {
    const double* xn = x.row(n);
    const double* yn = y.row(n);
    for (int k = 0; k < x.cols; ++k) {
      const double xv = xn[k];
      if (xv == 0.0) continue;
      double* ok = out.row(k);
      for (int j = 0; j < y.cols; ++j) ok[j] += xv * yn[j];
    }
  }
}

// out = x * wᵀ, shapes (n×m)·(k×m)ᵀ → (n×k). Used for input gradients.
inline void matmul_b_t(const Mat& x, const Mat& w, Mat& out) {
  assert(x.cols == w.cols);
  out = Mat(x.rows, w.rows);
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    for (int k = 0; k < w.rows; ++k) {
      const double* wk = w.row(k);
      double s = 0.0;
      for (int j = 0; j < x.cols; ++j) s += xi[j] * wk[j];
      oi[k] = s;
    }
  }
}

inline void add_row_bias(Mat& x, const Mat& b) {
  assert(b.rows == 1 && b.cols == x.cols);
  for (int i = 0; i < x.rows; ++i) {
    double* xi = x.row(i);
    for (int j = 0; j < x.cols; ++j) xi[j] += b(0, j);
  }
}

}  // namespace keyspan
