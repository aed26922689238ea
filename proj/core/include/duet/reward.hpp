#pragma once

#include <span>
#include <string>
#include <vector>

#include "duet/caption.hpp"
#include "duet/math.hpp"
#include "duet/world.hpp"

namespace duet {

// Weighted composite of scalar rewards. The total is the left-to-right fold
// of weight * value over terms, so re-deriving it from a logged record
// reproduces it bit for bit.
struct RewardBreakdown {
  struct Term {
    std::string name;
    double value = 0.0;
    double weight = 1.0;
  };

  std::vector<Term> terms;
  double total = 0.0;

  static RewardBreakdown make(std::vector<Term> terms);
  bool has(const std::string& name) const;
  double component(const std::string& name) const;  // throws if absent
};

// 1 iff the caption matches the reason-then-answer template.
double format_reward(const Caption& caption);

// LCS-based F1 over token sequences. Throws on empty reference.
double rouge_l(std::span<const int> candidate, std::span<const int> reference);

// Geometric mean of clipped n-gram precisions (n = 1..max_n) times the
// brevity penalty. Unsmoothed by default: any zero precision zeroes the
// score; smoothing adds +1 to numerator and denominator of each precision.
double bleu(std::span<const int> candidate, std::span<const int> reference, int max_n,
            bool smooth = false);

// L2-normalized symbol histograms; the zero vector only for empty content.
Vec embed_frame(const Frame& frame, const Vocab& vocab);
Vec embed_video(const SymbolicVideo& video, const Vocab& vocab);
// Answer-span tokens (all content tokens when malformed) mapped through the
// token-symbol table into symbol space.
Vec embed_caption(const Caption& caption, const Vocab& vocab);

double cosine(const Vec& a, const Vec& b);

// Mean cosine over aligned frame pairs; the longer video's excess frames pair
// with the last frame of the shorter. Throws on empty input.
double clip_v(const SymbolicVideo& a, const SymbolicVideo& b, const Vocab& vocab);

// Cosine between the caption embedding and the mean-pooled frame embeddings.
double clip_t(const Caption& caption, const SymbolicVideo& video, const Vocab& vocab);

// Symbolic Frechet distance d^2 = |mu_a - mu_b|^2 + Tr(Sa + Sb - 2(Sa Sb)^{1/2}),
// with the matrix square root taken from eigenvalues of Sa*Sb. Covariances of
// sets smaller than dim+1 are regularized by +1e-6 I. Eigenvalues below -1e-8
// raise; small negatives are clamped to zero.
double frechet_proxy(const std::vector<Vec>& set_a, const std::vector<Vec>& set_b);

struct StageWeights {
  double f = 1.0;
  double t1 = 1.0;
  double v1 = 1.0;
  double v2 = 1.0;
  double c2 = 1.0;
};

RewardBreakdown stage1_reward(const Caption& caption, const SymbolicVideo& generated_video,
                              const Caption& gt_caption, const SymbolicVideo& gt_video,
                              const Vocab& vocab, const StageWeights& weights = {},
                              bool include_rt1 = true, bool include_rv1 = true);

RewardBreakdown stage2_reward(const SymbolicVideo& generated_video, const Caption& anchor,
                              const SymbolicVideo& gt_video, const Vocab& vocab,
                              const StageWeights& weights = {}, bool include_rv2 = true,
                              bool include_rc2 = true);

}  // namespace duet
