#include "duet/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace duet {

std::uint64_t Rng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int Rng::next_int(int n) {
  if (n < 1) throw std::invalid_argument("Rng::next_int: n must be >= 1");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  while (true) {
    const std::uint64_t x = next_u64();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
    const std::uint64_t low = static_cast<std::uint64_t>(m);
    if (low >= bound || low >= (-bound) % bound) {
      return static_cast<int>(m >> 64);
    }
  }
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

namespace {

void require_finite(const Vec& x, const char* who) {
  if (!all_finite(x)) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

double masked_max(const Vec& x, const std::vector<bool>& allowed) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (allowed[i]) m = std::max(m, x[i]);
  }
  if (!std::isfinite(m)) throw std::invalid_argument("softmax: no allowed entries");
  return m;
}

}  // namespace

Vec softmax(const Vec& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  require_finite(logits, "softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    // exp underflows to 0 for spreads beyond ~745; keep entries positive
    out[i] = std::max(std::exp(logits[i] - m), std::numeric_limits<double>::min());
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Vec softmax_masked(const Vec& logits, const std::vector<bool>& allowed) {
  if (logits.size() != allowed.size()) {
    throw std::invalid_argument("softmax_masked: mask size mismatch");
  }
  require_finite(logits, "softmax_masked");
  const double m = masked_max(logits, allowed);
  Vec out(logits.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (allowed[i]) {
      out[i] = std::exp(logits[i] - m);
      sum += out[i];
    }
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (allowed[i]) out[i] /= sum;
  }
  return out;
}

Vec log_softmax(const Vec& logits) {
  if (logits.empty()) throw std::invalid_argument("log_softmax: empty input");
  require_finite(logits, "log_softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  Vec out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

Vec log_softmax_masked(const Vec& logits, const std::vector<bool>& allowed) {
  if (logits.size() != allowed.size()) {
    throw std::invalid_argument("log_softmax_masked: mask size mismatch");
  }
  require_finite(logits, "log_softmax_masked");
  const double m = masked_max(logits, allowed);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (allowed[i]) sum += std::exp(logits[i] - m);
  }
  const double lse = m + std::log(sum);
  Vec out(logits.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (allowed[i]) out[i] = logits[i] - lse;
  }
  return out;
}

double logsumexp(const Vec& x) {
  if (x.empty()) throw std::invalid_argument("logsumexp: empty input");
  require_finite(x, "logsumexp");
  const double m = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - m);
  return m + std::log(sum);
}

int categorical_sample(const Vec& probs, Rng& rng) {
  if (probs.empty()) throw std::invalid_argument("categorical_sample: empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("categorical_sample: invalid probability entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("categorical_sample: probabilities do not sum to 1");
  }
  const double u = rng.next_double();
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return last_positive;  // u landed past cum due to rounding
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) {
    throw std::invalid_argument("Optimizer::step: shape mismatch");
  }
  ++step_count_;
  if (cfg_.mode == OptimizerMode::ascent) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] += cfg_.learning_rate * grad[i];
    }
    return;
  }
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double mhat = m_[i] / b1t;
    const double vhat = v_[i] / b2t;
    params[i] += cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
}

SymEig sym_eig(const Mat& a, int max_sweeps) {
  if (a.rows() != a.cols()) throw std::invalid_argument("sym_eig: matrix not square");
  const std::size_t n = a.rows();
  Mat m = a;
  Mat v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(m(p, q)) < 1e-300) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymEig out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = m(i, i);
  out.vectors = std::move(v);
  return out;
}

}  // namespace duet
