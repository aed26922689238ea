#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace duet {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  void fill(double v) { data_.assign(data_.size(), v); }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Counter-style seeded generator (splitmix64). Identical seed and call
// sequence gives a bit-exact identical stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1), 53-bit resolution.
  double next_double();
  // Uniform integer in [0, n), exact (Lemire with rejection). n >= 1.
  int next_int(int n);
  // Derive an independent child stream.
  Rng split() { return Rng(next_u64()); }

 private:
  std::uint64_t state_;
};

bool all_finite(std::span<const double> x);

// Numerically stable softmax via max subtraction. Throws on non-finite input.
Vec softmax(const Vec& logits);
// Softmax restricted to `allowed` entries; masked entries get exact 0.
Vec softmax_masked(const Vec& logits, const std::vector<bool>& allowed);
Vec log_softmax(const Vec& logits);
Vec log_softmax_masked(const Vec& logits, const std::vector<bool>& allowed);
double logsumexp(const Vec& x);

// Samples an index from a probability vector. Throws if probs do not sum to
// 1 within 1e-6 or contain negative/non-finite entries.
int categorical_sample(const Vec& probs, Rng& rng);

enum class OptimizerMode { ascent, adam };

struct OptimizerConfig {
  double learning_rate = 0.05;
  OptimizerMode mode = OptimizerMode::ascent;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First-order ascent optimizer. Plain mode applies params += lr * grad
// exactly; adam mode keeps per-parameter moment accumulators.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(std::span<double> params, std::span<const double> grad);
  std::int64_t step_count() const { return step_count_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::int64_t step_count_ = 0;
  Vec m_, v_;
};

struct SymEig {
  Vec values;   // ascending not guaranteed; paired with columns of vectors
  Mat vectors;  // column i is the eigenvector for values[i]
};

// Cyclic Jacobi eigendecomposition for symmetric matrices.
SymEig sym_eig(const Mat& a, int max_sweeps = 64);

}  // namespace duet
