#include "duet/reward.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace duet {

RewardBreakdown RewardBreakdown::make(std::vector<Term> terms) {
  RewardBreakdown b;
  b.terms = std::move(terms);
  b.total = 0.0;
  for (const Term& t : b.terms) b.total += t.weight * t.value;
  return b;
}

bool RewardBreakdown::has(const std::string& name) const {
  return std::any_of(terms.begin(), terms.end(),
                     [&](const Term& t) { return t.name == name; });
}

double RewardBreakdown::component(const std::string& name) const {
  for (const Term& t : terms) {
    if (t.name == name) return t.value;
  }
  throw std::invalid_argument("RewardBreakdown: no component " + name);
}

double format_reward(const Caption& caption) {
  return caption.well_formed() ? 1.0 : 0.0;
}

double rouge_l(std::span<const int> candidate, std::span<const int> reference) {
  if (reference.empty()) throw std::invalid_argument("rouge_l: empty reference");
  if (candidate.empty()) return 0.0;

  const std::size_t n = candidate.size(), m = reference.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[m];
  const double p = lcs / static_cast<double>(n);
  const double r = lcs / static_cast<double>(m);
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

namespace {

// Clipped count of candidate n-grams also present in the reference.
std::pair<long, long> clipped_ngram_counts(std::span<const int> cand, std::span<const int> ref,
                                           int n) {
  const auto ngrams = [n](std::span<const int> s) {
    std::map<std::vector<int>, long> counts;
    if (static_cast<int>(s.size()) >= n) {
      for (std::size_t i = 0; i + n <= s.size(); ++i) {
        counts[std::vector<int>(s.begin() + i, s.begin() + i + n)]++;
      }
    }
    return counts;
  };
  const auto cand_counts = ngrams(cand);
  const auto ref_counts = ngrams(ref);
  long matched = 0, total = 0;
  for (const auto& [gram, count] : cand_counts) {
    total += count;
    const auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) matched += std::min(count, it->second);
  }
  return {matched, total};
}

}  // namespace

double bleu(std::span<const int> candidate, std::span<const int> reference, int max_n,
            bool smooth) {
  if (reference.empty()) throw std::invalid_argument("bleu: empty reference");
  if (max_n < 1 || max_n > 4) throw std::invalid_argument("bleu: max_n must be in 1..4");
  if (candidate.empty()) return 0.0;

  double log_precision_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto [matched, total] = clipped_ngram_counts(candidate, reference, n);
    double p;
    if (smooth) {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    } else {
      if (matched == 0 || total == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    }
    log_precision_sum += std::log(p);
  }
  const double bp = std::exp(std::min(
      0.0, 1.0 - static_cast<double>(reference.size()) / static_cast<double>(candidate.size())));
  return bp * std::exp(log_precision_sum / max_n);
}

namespace {

Vec normalized_histogram(const std::vector<int>& symbols, int dim) {
  Vec h(dim, 0.0);
  for (int s : symbols) {
    if (s >= 0 && s < dim) h[s] += 1.0;
  }
  double norm = 0.0;
  for (double v : h) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : h) v /= norm;
  }
  return h;
}

}  // namespace

Vec embed_frame(const Frame& frame, const Vocab& vocab) {
  return normalized_histogram({frame.slots.begin(), frame.slots.end()}, vocab.symbol_count);
}

Vec embed_video(const SymbolicVideo& video, const Vocab& vocab) {
  std::vector<int> symbols;
  symbols.reserve(video.frames.size() * Vocab::kArity);
  for (const Frame& f : video.frames) symbols.insert(symbols.end(), f.slots.begin(), f.slots.end());
  return normalized_histogram(symbols, vocab.symbol_count);
}

Vec embed_caption(const Caption& caption, const Vocab& vocab) {
  std::vector<int> symbols;
  for (int token : caption.answer_or_content(vocab)) {
    if (auto s = vocab.symbol_of_token(token)) symbols.push_back(*s);
  }
  return normalized_histogram(symbols, vocab.symbol_count);
}

double cosine(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double clip_v(const SymbolicVideo& a, const SymbolicVideo& b, const Vocab& vocab) {
  if (a.empty() || b.empty()) throw std::invalid_argument("clip_v: empty video");
  const int n = std::max(a.length(), b.length());
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Frame& fa = a.frames[std::min(i, a.length() - 1)];
    const Frame& fb = b.frames[std::min(i, b.length() - 1)];
    sum += cosine(embed_frame(fa, vocab), embed_frame(fb, vocab));
  }
  return sum / n;
}

double clip_t(const Caption& caption, const SymbolicVideo& video, const Vocab& vocab) {
  const Vec ce = embed_caption(caption, vocab);
  Vec pooled(vocab.symbol_count, 0.0);
  for (const Frame& f : video.frames) {
    const Vec fe = embed_frame(f, vocab);
    for (int i = 0; i < vocab.symbol_count; ++i) pooled[i] += fe[i];
  }
  if (!video.empty()) {
    for (double& v : pooled) v /= video.length();
  }
  return cosine(ce, pooled);
}

namespace {

Vec set_mean(const std::vector<Vec>& set, std::size_t dim) {
  Vec mu(dim, 0.0);
  for (const Vec& x : set) {
    for (std::size_t i = 0; i < dim; ++i) mu[i] += x[i];
  }
  for (double& v : mu) v /= static_cast<double>(set.size());
  return mu;
}

// Population covariance, regularized when the set cannot be full rank.
Mat set_covariance(const std::vector<Vec>& set, const Vec& mu) {
  const std::size_t dim = mu.size();
  Mat cov(dim, dim, 0.0);
  for (const Vec& x : set) {
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        cov(i, j) += (x[i] - mu[i]) * (x[j] - mu[j]);
      }
    }
  }
  for (double& v : cov.flat()) v /= static_cast<double>(set.size());
  if (set.size() < dim + 1) {
    for (std::size_t i = 0; i < dim; ++i) cov(i, i) += 1e-6;
  }
  return cov;
}

Mat mat_mul(const Mat& a, const Mat& b) {
  Mat out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

// Symmetric PSD square root via Jacobi eigendecomposition.
Mat sqrt_psd(const Mat& a) {
  const SymEig eig = sym_eig(a);
  const std::size_t n = a.rows();
  Mat out(n, n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = std::max(0.0, eig.values[k]);
    const double s = std::sqrt(lam);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out(i, j) += s * eig.vectors(i, k) * eig.vectors(j, k);
      }
    }
  }
  return out;
}

}  // namespace

double frechet_proxy(const std::vector<Vec>& set_a, const std::vector<Vec>& set_b) {
  if (set_a.empty() || set_b.empty()) throw std::invalid_argument("frechet_proxy: empty set");
  const std::size_t dim = set_a.front().size();
  for (const auto& x : set_a) {
    if (x.size() != dim) throw std::invalid_argument("frechet_proxy: inconsistent dimensions");
  }
  for (const auto& x : set_b) {
    if (x.size() != dim) throw std::invalid_argument("frechet_proxy: inconsistent dimensions");
  }

  const Vec mu_a = set_mean(set_a, dim);
  const Vec mu_b = set_mean(set_b, dim);
  const Mat cov_a = set_covariance(set_a, mu_a);
  const Mat cov_b = set_covariance(set_b, mu_b);

  double mean_term = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = mu_a[i] - mu_b[i];
    mean_term += d * d;
  }

  double trace_a = 0.0, trace_b = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    trace_a += cov_a(i, i);
    trace_b += cov_b(i, i);
  }

  // Eigenvalues of cov_a*cov_b equal those of the symmetric product
  // sqrt(cov_a)*cov_b*sqrt(cov_a).
  const Mat root_a = sqrt_psd(cov_a);
  const Mat sym_prod = mat_mul(mat_mul(root_a, cov_b), root_a);
  const SymEig eig = sym_eig(sym_prod);
  double trace_sqrt = 0.0;
  for (double lam : eig.values) {
    if (lam < -1e-8) {
      throw std::runtime_error("frechet_proxy: covariance product not PSD (eigenvalue " +
                               std::to_string(lam) + ")");
    }
    trace_sqrt += std::sqrt(std::max(0.0, lam));
  }

  const double d2 = mean_term + trace_a + trace_b - 2.0 * trace_sqrt;
  return std::max(0.0, d2);
}

RewardBreakdown stage1_reward(const Caption& caption, const SymbolicVideo& generated_video,
                              const Caption& gt_caption, const SymbolicVideo& gt_video,
                              const Vocab& vocab, const StageWeights& weights, bool include_rt1,
                              bool include_rv1) {
  if (gt_video.empty()) throw std::invalid_argument("stage1_reward: empty ground-truth video");
  const std::vector<int> gt_answer = gt_caption.answer_or_content(vocab);
  if (gt_answer.empty()) throw std::invalid_argument("stage1_reward: empty ground-truth caption");

  std::vector<RewardBreakdown::Term> terms;
  terms.push_back({"r_f", format_reward(caption), weights.f});
  if (include_rt1) {
    const std::vector<int> cand = caption.answer_or_content(vocab);
    terms.push_back({"r_t1", rouge_l(cand, gt_answer), weights.t1});
  }
  if (include_rv1) {
    terms.push_back({"r_v1", clip_v(generated_video, gt_video, vocab), weights.v1});
  }
  return RewardBreakdown::make(std::move(terms));
}

RewardBreakdown stage2_reward(const SymbolicVideo& generated_video, const Caption& anchor,
                              const SymbolicVideo& gt_video, const Vocab& vocab,
                              const StageWeights& weights, bool include_rv2, bool include_rc2) {
  if (anchor.tokens.empty()) throw std::invalid_argument("stage2_reward: empty anchor");

  std::vector<RewardBreakdown::Term> terms;
  if (include_rv2) {
    terms.push_back({"r_v2", clip_v(generated_video, gt_video, vocab), weights.v2});
  }
  if (include_rc2) {
    terms.push_back({"r_c2", clip_t(anchor, generated_video, vocab), weights.c2});
  }
  return RewardBreakdown::make(std::move(terms));
}

}  // namespace duet
