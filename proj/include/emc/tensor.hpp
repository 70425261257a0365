#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace emc {

// Dense row-major 2-D array of doubles. Rows are the batch dimension for
// activations; parameters use (out x in).
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(0.0); }

  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// c = a * b            (a: m x k, b: k x n)
void matmul(const Tensor2& a, const Tensor2& b, Tensor2& c);
// c += a^T * b         (a: k x m, b: k x n, c: m x n)
void matmul_at_b_acc(const Tensor2& a, const Tensor2& b, Tensor2& c);
// c = a * b^T          (a: m x k, b: n x k, c: m x n)
void matmul_a_bt(const Tensor2& a, const Tensor2& b, Tensor2& c);

}  // namespace emc
