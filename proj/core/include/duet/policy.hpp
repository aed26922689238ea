#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "duet/caption.hpp"
#include "duet/math.hpp"
#include "duet/world.hpp"

namespace duet {

enum class PolicyKind { captioner, frame };

// Output tokens with the per-token log-probabilities recorded by whichever
// policy generated them.
struct Trajectory {
  std::vector<int> tokens;
  Vec logps;
  bool terminated = false;  // stopped at the end token rather than max length

  int length() const { return static_cast<int>(tokens.size()); }
};

// Conditioning context for one autoregressive generation. Implementations
// produce a deterministic feature vector for the step following `prefix`
// and may restrict which tokens are legal at a step.
class SequenceContext {
 public:
  virtual ~SequenceContext() = default;
  virtual int feature_dim() const = 0;
  virtual int vocab_size() const = 0;
  virtual int end_token() const = 0;
  virtual int max_len() const = 0;
  virtual void features(std::span<const int> prefix, Vec& out) const = 0;
  virtual bool token_allowed(int /*token*/, int /*step*/) const { return true; }

  Vec features_at(std::span<const int> prefix) const {
    Vec f(feature_dim(), 0.0);
    features(prefix, f);
    return f;
  }
  std::vector<bool> allowed_mask(int step) const;
};

// Caption-side conditioning: input video bags, question bag, previous output
// token, and output position.
class CaptionContext final : public SequenceContext {
 public:
  CaptionContext(const Vocab& vocab, const SymbolicVideo& input, const Question& question,
                 int max_len = 48);

  int feature_dim() const override;
  int vocab_size() const override { return vocab_.token_count(); }
  int end_token() const override { return Vocab::kEnd; }
  int max_len() const override { return max_len_; }
  void features(std::span<const int> prefix, Vec& out) const override;

  static constexpr int kPositionBuckets = 16;

  // Feature block offsets, in layout order.
  int bag_offset() const { return 1; }
  int positional_offset() const { return 1 + vocab_.symbol_count; }
  int last_frame_offset() const { return 1 + 2 * vocab_.symbol_count; }
  int question_offset() const {
    return last_frame_offset() + Vocab::kArity * vocab_.symbol_count;
  }
  int prev_token_offset() const { return question_offset() + vocab_.token_count(); }
  int position_offset() const { return prev_token_offset() + vocab_.token_count() + 1; }

 private:
  Vocab vocab_;
  int max_len_;
  Vec input_bag_;         // symbol counts / frame count
  Vec input_positional_;  // symbol counts weighted by frame position
  Frame last_frame_{};
  Vec question_bag_;
};

// Frame-side conditioning. The caption contributes its semantic core only
// (the answer's action and object words); identities and scene placement
// are carried by the reference frames: their bags, the last reference
// frame, the previous emission, the same-slot emission one frame back, and
// slot/frame position. Emission vocabulary is symbol_count + 1; the extra
// index is the end token, legal only at frame boundaries after the first
// frame.
class FrameContext final : public SequenceContext {
 public:
  FrameContext(const Vocab& vocab, const Caption& conditioning, const SymbolicVideo& ref_source,
               int n_ref = 6, int max_frames = 5);

  int feature_dim() const override;
  int vocab_size() const override { return vocab_.symbol_count + 1; }
  int end_token() const override { return vocab_.symbol_count; }
  int max_len() const override { return max_frames_ * Vocab::kArity; }
  void features(std::span<const int> prefix, Vec& out) const override;
  bool token_allowed(int token, int step) const override;

  int ref_count() const { return static_cast<int>(refs_.size()); }

  // Feature block offsets, in layout order.
  int think_bag_offset() const { return 1; }
  int action_word_offset() const { return 1 + vocab_.token_count(); }
  int object_word_offset() const { return 1 + 2 * vocab_.token_count(); }
  int ref_bag_offset() const { return 1 + 3 * vocab_.token_count(); }
  int ref_positional_offset() const { return ref_bag_offset() + vocab_.symbol_count; }
  int last_ref_offset() const { return ref_positional_offset() + vocab_.symbol_count; }
  int prev_offset() const { return last_ref_offset() + Vocab::kArity * vocab_.symbol_count; }
  int prev_frame_offset() const { return prev_offset() + vocab_size() + 1; }

 private:
  Vocab vocab_;
  int max_frames_;
  std::vector<Frame> refs_;
  Vec think_bag_;
  int action_word_ = -1;  // answer token in the action position
  int object_word_ = -1;  // answer token in the object position
  Vec ref_bag_;
  Vec ref_positional_;
  Frame last_ref_{};
};

// Single-layer linear-softmax policy: logits = W^T f with W of shape
// (feature_dim x vocab).
class Policy {
 public:
  Policy() = default;
  Policy(PolicyKind kind, int feature_dim, int vocab_size)
      : kind_(kind), weights_(feature_dim, vocab_size, 0.0) {}

  PolicyKind kind() const { return kind_; }
  int feature_dim() const { return static_cast<int>(weights_.rows()); }
  int vocab_size() const { return static_cast<int>(weights_.cols()); }
  Mat& weights() { return weights_; }
  const Mat& weights() const { return weights_; }

  Vec logits(const Vec& features) const;

  // Deep copy; the snapshot is unaffected by later updates to this policy.
  Policy snapshot() const { return *this; }

  friend bool operator==(const Policy& a, const Policy& b) {
    return a.kind_ == b.kind_ && a.weights_ == b.weights_;
  }

 private:
  PolicyKind kind_ = PolicyKind::captioner;
  Mat weights_;
};

Policy make_captioner(const Vocab& vocab, int max_len = 48);
Policy make_frame_policy(const Vocab& vocab, int n_ref = 6, int max_frames = 5);

// Ancestral sampling; records exact per-token log-probabilities.
Trajectory sample_trajectory(const Policy& policy, const SequenceContext& ctx, Rng& rng);
// Argmax decoding (ties to the lowest index); log-probs recorded the same way.
Trajectory greedy_trajectory(const Policy& policy, const SequenceContext& ctx);

// Teacher-forced per-token log-probabilities of traj.tokens under `policy`.
Vec log_probs(const Policy& policy, const SequenceContext& ctx, const Trajectory& traj);

// d log pi(o_t | c) / dW = outer(f_t, onehot(o_t) - softmax_t).
Mat grad_log_prob(const Policy& policy, const SequenceContext& ctx, const Trajectory& traj,
                  int token_index);
// acc += coeff * d log pi(o_t | c) / dW, without allocating.
void accumulate_grad_log_prob(const Policy& policy, const SequenceContext& ctx,
                              const Trajectory& traj, int token_index, double coeff, Mat& acc);

SymbolicVideo trajectory_to_video(const Trajectory& traj, const Vocab& vocab);
Caption trajectory_to_caption(const Trajectory& traj, const Vocab& vocab);

// Spec-facing featurization helpers: features for the next step after the
// given prefix.
Vec featurize_caption_ctx(const Vocab& vocab, const SymbolicVideo& input, const Question& q,
                          const std::vector<int>& prefix);
Vec featurize_frame_ctx(const Vocab& vocab, const Caption& conditioning,
                        const SymbolicVideo& ref_source, const std::vector<int>& prefix,
                        int n_ref = 6);

// Checkpoint: header (kind, vocab size, feature dim) + row-major doubles.
void save_policy(const Policy& policy, const std::filesystem::path& path);
Policy load_policy(const std::filesystem::path& path);
// In-memory serialization used for freeze contracts and determinism checks.
std::string policy_bytes(const Policy& policy);

}  // namespace duet
