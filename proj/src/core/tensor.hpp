#pragma once

#include <cstddef>
#include <vector>

namespace egopnr {

using Vec = std::vector<double>;

// Dense row-major matrix. Small enough on purpose; the whole model fits in
// cache and every reduction below runs in a fixed order.
struct Mat {
  int rows = 0;
  int cols = 0;
  Vec a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return a.size(); }
  void fill(double v) { a.assign(a.size(), v); }
};

// y = W x + b
inline void affine(const Mat& w, const double* x, const Vec& b, double* y) {
  for (int r = 0; r < w.rows; ++r) {
    const double* wr = w.row(r);
    double acc = b[static_cast<std::size_t>(r)];
    for (int c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// x_grad += W^T g
inline void add_matvec_transposed(const Mat& w, const double* g, double* x_grad) {
  for (int r = 0; r < w.rows; ++r) {
    const double* wr = w.row(r);
    const double gr = g[r];
    if (gr == 0.0) continue;
    for (int c = 0; c < w.cols; ++c) x_grad[c] += wr[c] * gr;
  }
}

// W_grad += g x^T, b_grad += g
inline void add_outer(Mat& w_grad, Vec& b_grad, const double* g, const double* x) {
  for (int r = 0; r < w_grad.rows; ++r) {
    double* wr = w_grad.row(r);
    const double gr = g[r];
    b_grad[static_cast<std::size_t>(r)] += gr;
    for (int c = 0; c < w_grad.cols; ++c) wr[c] += gr * x[c];
  }
}

}  // namespace egopnr
