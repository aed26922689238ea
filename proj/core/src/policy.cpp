#include "duet/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace duet {

std::vector<bool> SequenceContext::allowed_mask(int step) const {
  std::vector<bool> mask(vocab_size());
  for (int t = 0; t < vocab_size(); ++t) mask[t] = token_allowed(t, step);
  return mask;
}

namespace {

void bag_add(Vec& bag, int index, double value) { bag[index] += value; }

Vec token_bag(const std::vector<int>& tokens, int dim) {
  Vec bag(dim, 0.0);
  for (int t : tokens) {
    if (t >= 0 && t < dim) bag[t] += 1.0;
  }
  return bag;
}

void reset(Vec& out, int dim) {
  if (static_cast<int>(out.size()) != dim) {
    out.assign(dim, 0.0);
  } else {
    std::fill(out.begin(), out.end(), 0.0);
  }
}

}  // namespace

CaptionContext::CaptionContext(const Vocab& vocab, const SymbolicVideo& input,
                               const Question& question, int max_len)
    : vocab_(vocab), max_len_(max_len) {
  input_bag_.assign(vocab_.symbol_count, 0.0);
  input_positional_.assign(vocab_.symbol_count, 0.0);
  const int n = input.length();
  for (int f = 0; f < n; ++f) {
    const double w = static_cast<double>(f + 1) / n;
    for (int s : input.frames[f].slots) {
      if (s >= 0 && s < vocab_.symbol_count) {
        bag_add(input_bag_, s, 1.0 / n);
        bag_add(input_positional_, s, w / n);
      }
    }
  }
  if (n > 0) last_frame_ = input.frames.back();
  question_bag_ = token_bag(question.tokens, vocab_.token_count());
}

int CaptionContext::feature_dim() const {
  return position_offset() + kPositionBuckets;
}

void CaptionContext::features(std::span<const int> prefix, Vec& out) const {
  reset(out, feature_dim());
  const int step = static_cast<int>(prefix.size());

  out[0] = 1.0;
  int off = bag_offset();
  for (int i = 0; i < vocab_.symbol_count; ++i) out[off + i] = input_bag_[i];
  off = positional_offset();
  for (int i = 0; i < vocab_.symbol_count; ++i) out[off + i] = input_positional_[i];
  off = last_frame_offset();
  for (int slot = 0; slot < Vocab::kArity; ++slot) {
    const int s = last_frame_.slots[slot];
    if (s >= 0 && s < vocab_.symbol_count) out[off + slot * vocab_.symbol_count + s] = 1.0;
  }
  off = question_offset();
  for (int i = 0; i < vocab_.token_count(); ++i) out[off + i] = question_bag_[i];
  off = prev_token_offset();
  const int prev_index = prefix.empty() ? vocab_.token_count() : prefix.back();
  if (prev_index >= 0 && prev_index <= vocab_.token_count()) out[off + prev_index] = 1.0;
  off = position_offset();
  out[off + std::min(step, kPositionBuckets - 1)] = 1.0;
}

FrameContext::FrameContext(const Vocab& vocab, const Caption& conditioning,
                           const SymbolicVideo& ref_source, int n_ref, int max_frames)
    : vocab_(vocab), max_frames_(max_frames) {
  const int available = ref_source.length();
  const int take = std::min(n_ref, available);
  refs_.assign(ref_source.frames.end() - take, ref_source.frames.end());
  if (!refs_.empty()) last_ref_ = refs_.back();

  // The caption's semantic core: the action and object words of the answer
  // (positions 1 and 2 of the canonical actor-action-object-location form).
  // Malformed captions degrade to their first content tokens.
  const int dim = vocab_.token_count();
  std::vector<int> answer;
  if (conditioning.well_formed()) {
    think_bag_ = token_bag(conditioning.think_tokens(), dim);
    answer = conditioning.answer_tokens();
  } else {
    const auto content = conditioning.content_tokens(vocab_);
    think_bag_ = token_bag(content, dim);
    answer = content;
  }
  if (answer.size() > 1) action_word_ = answer[1];
  if (answer.size() > 2) object_word_ = answer[2];

  ref_bag_.assign(vocab_.symbol_count, 0.0);
  ref_positional_.assign(vocab_.symbol_count, 0.0);
  const int n = static_cast<int>(refs_.size());
  for (int f = 0; f < n; ++f) {
    const double w = static_cast<double>(f + 1) / n;
    for (int s : refs_[f].slots) {
      if (s >= 0 && s < vocab_.symbol_count) {
        bag_add(ref_bag_, s, 1.0 / n);
        bag_add(ref_positional_, s, w / n);
      }
    }
  }
}

int FrameContext::feature_dim() const {
  return prev_frame_offset() + (vocab_size() + 1) + Vocab::kArity + max_frames_;
}

void FrameContext::features(std::span<const int> prefix, Vec& out) const {
  reset(out, feature_dim());
  const int step = static_cast<int>(prefix.size());

  out[0] = 1.0;
  int off = think_bag_offset();
  for (int i = 0; i < vocab_.token_count(); ++i) out[off + i] = think_bag_[i];
  off = action_word_offset();
  if (action_word_ >= 0 && action_word_ < vocab_.token_count()) out[off + action_word_] = 1.0;
  off = object_word_offset();
  if (object_word_ >= 0 && object_word_ < vocab_.token_count()) out[off + object_word_] = 1.0;
  off = ref_bag_offset();
  for (int i = 0; i < vocab_.symbol_count; ++i) out[off + i] = ref_bag_[i];
  off = ref_positional_offset();
  for (int i = 0; i < vocab_.symbol_count; ++i) out[off + i] = ref_positional_[i];
  off = last_ref_offset();
  for (int slot = 0; slot < Vocab::kArity; ++slot) {
    const int s = last_ref_.slots[slot];
    if (s >= 0 && s < vocab_.symbol_count) out[off + slot * vocab_.symbol_count + s] = 1.0;
  }
  off = prev_offset();
  const int prev_index = prefix.empty() ? vocab_size() : prefix.back();
  if (prev_index >= 0 && prev_index <= vocab_size()) out[off + prev_index] = 1.0;
  off = prev_frame_offset();
  const int prev_frame_index =
      step >= Vocab::kArity ? prefix[step - Vocab::kArity] : vocab_size();
  if (prev_frame_index >= 0 && prev_frame_index <= vocab_size()) {
    out[off + prev_frame_index] = 1.0;
  }
  off += vocab_size() + 1;
  out[off + step % Vocab::kArity] = 1.0;
  off += Vocab::kArity;
  out[off + std::min(step / Vocab::kArity, max_frames_ - 1)] = 1.0;
}

bool FrameContext::token_allowed(int token, int step) const {
  if (token == end_token()) {
    return step > 0 && step % Vocab::kArity == 0;  // only at frame boundaries
  }
  return token >= 0 && token < vocab_.symbol_count;
}

Vec Policy::logits(const Vec& features) const {
  if (static_cast<int>(features.size()) != feature_dim()) {
    throw std::invalid_argument("Policy::logits: feature dimension mismatch");
  }
  Vec out(vocab_size(), 0.0);
  const double* w = weights_.data();
  for (int i = 0; i < feature_dim(); ++i) {
    const double f = features[i];
    if (f == 0.0) continue;
    const double* row = w + static_cast<std::size_t>(i) * vocab_size();
    for (int j = 0; j < vocab_size(); ++j) out[j] += f * row[j];
  }
  return out;
}

Policy make_captioner(const Vocab& vocab, int max_len) {
  const CaptionContext probe(vocab, SymbolicVideo{}, Question{}, max_len);
  return Policy(PolicyKind::captioner, probe.feature_dim(), probe.vocab_size());
}

Policy make_frame_policy(const Vocab& vocab, int n_ref, int max_frames) {
  const FrameContext probe(vocab, Caption{}, SymbolicVideo{}, n_ref, max_frames);
  return Policy(PolicyKind::frame, probe.feature_dim(), probe.vocab_size());
}

namespace {

void check_compatible(const Policy& policy, const SequenceContext& ctx) {
  if (policy.feature_dim() != ctx.feature_dim() || policy.vocab_size() != ctx.vocab_size()) {
    throw std::invalid_argument("policy/context dimension mismatch");
  }
}

Trajectory decode(const Policy& policy, const SequenceContext& ctx, Rng* rng) {
  check_compatible(policy, ctx);
  Trajectory traj;
  Vec features(ctx.feature_dim(), 0.0);
  for (int t = 0; t < ctx.max_len(); ++t) {
    ctx.features(traj.tokens, features);
    const Vec logits = policy.logits(features);
    const std::vector<bool> mask = ctx.allowed_mask(t);
    const Vec logp = log_softmax_masked(logits, mask);
    int token;
    if (rng != nullptr) {
      token = categorical_sample(softmax_masked(logits, mask), *rng);
    } else {
      token = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < ctx.vocab_size(); ++j) {
        if (mask[j] && logp[j] > best) {
          best = logp[j];
          token = j;
        }
      }
    }
    traj.tokens.push_back(token);
    traj.logps.push_back(logp[token]);
    if (token == ctx.end_token()) {
      traj.terminated = true;
      break;
    }
  }
  return traj;
}

}  // namespace

Trajectory sample_trajectory(const Policy& policy, const SequenceContext& ctx, Rng& rng) {
  return decode(policy, ctx, &rng);
}

Trajectory greedy_trajectory(const Policy& policy, const SequenceContext& ctx) {
  return decode(policy, ctx, nullptr);
}

Vec log_probs(const Policy& policy, const SequenceContext& ctx, const Trajectory& traj) {
  check_compatible(policy, ctx);
  Vec out(traj.tokens.size(), 0.0);
  Vec features(ctx.feature_dim(), 0.0);
  const std::span<const int> tokens(traj.tokens);
  for (int t = 0; t < traj.length(); ++t) {
    const int token = traj.tokens[t];
    if (token < 0 || token >= ctx.vocab_size()) {
      throw std::invalid_argument("log_probs: token out of vocabulary at position " +
                                  std::to_string(t));
    }
    if (!ctx.token_allowed(token, t)) {
      throw std::invalid_argument("log_probs: token disallowed at position " + std::to_string(t));
    }
    ctx.features(tokens.first(t), features);
    const Vec logp = log_softmax_masked(policy.logits(features), ctx.allowed_mask(t));
    out[t] = logp[token];
  }
  return out;
}

void accumulate_grad_log_prob(const Policy& policy, const SequenceContext& ctx,
                              const Trajectory& traj, int token_index, double coeff, Mat& acc) {
  check_compatible(policy, ctx);
  if (token_index < 0 || token_index >= traj.length()) {
    throw std::invalid_argument("grad_log_prob: token index out of range");
  }
  if (!acc.same_shape(policy.weights())) {
    throw std::invalid_argument("grad_log_prob: accumulator shape mismatch");
  }
  const Vec features = ctx.features_at(std::span<const int>(traj.tokens).first(token_index));
  const std::vector<bool> mask = ctx.allowed_mask(token_index);
  const Vec probs = softmax_masked(policy.logits(features), mask);
  const int target = traj.tokens[token_index];
  if (!mask[target]) {
    throw std::invalid_argument("grad_log_prob: token disallowed at position " +
                                std::to_string(token_index));
  }
  const int vocab = ctx.vocab_size();
  double* a = acc.data();
  for (int i = 0; i < ctx.feature_dim(); ++i) {
    const double f = features[i];
    if (f == 0.0) continue;
    double* row = a + static_cast<std::size_t>(i) * vocab;
    const double cf = coeff * f;
    for (int j = 0; j < vocab; ++j) {
      const double indicator = j == target ? 1.0 : 0.0;
      row[j] += cf * (indicator - probs[j]);
    }
  }
}

Mat grad_log_prob(const Policy& policy, const SequenceContext& ctx, const Trajectory& traj,
                  int token_index) {
  Mat g(policy.weights().rows(), policy.weights().cols(), 0.0);
  accumulate_grad_log_prob(policy, ctx, traj, token_index, 1.0, g);
  return g;
}

SymbolicVideo trajectory_to_video(const Trajectory& traj, const Vocab& vocab) {
  SymbolicVideo v;
  Frame f{};
  int slot = 0;
  for (int token : traj.tokens) {
    if (token == vocab.symbol_count) break;  // end token
    f.slots[slot++] = token;
    if (slot == Vocab::kArity) {
      v.frames.push_back(f);
      slot = 0;
    }
  }
  return v;  // trailing partial frame dropped
}

Caption trajectory_to_caption(const Trajectory& traj, const Vocab& vocab) {
  return Caption::from_tokens(traj.tokens, vocab);
}

Vec featurize_caption_ctx(const Vocab& vocab, const SymbolicVideo& input, const Question& q,
                          const std::vector<int>& prefix) {
  const CaptionContext ctx(vocab, input, q);
  return ctx.features_at(prefix);
}

Vec featurize_frame_ctx(const Vocab& vocab, const Caption& conditioning,
                        const SymbolicVideo& ref_source, const std::vector<int>& prefix,
                        int n_ref) {
  const FrameContext ctx(vocab, conditioning, ref_source, n_ref);
  return ctx.features_at(prefix);
}

namespace {

constexpr char kMagic[8] = {'D', 'U', 'E', 'T', 'P', 'O', 'L', '1'};

void append_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

}  // namespace

std::string policy_bytes(const Policy& policy) {
  std::string out;
  append_bytes(out, kMagic, sizeof(kMagic));
  const std::uint32_t kind = policy.kind() == PolicyKind::captioner ? 0 : 1;
  const std::uint32_t vocab = static_cast<std::uint32_t>(policy.vocab_size());
  const std::uint32_t fdim = static_cast<std::uint32_t>(policy.feature_dim());
  append_bytes(out, &kind, sizeof(kind));
  append_bytes(out, &vocab, sizeof(vocab));
  append_bytes(out, &fdim, sizeof(fdim));
  append_bytes(out, policy.weights().data(), policy.weights().size() * sizeof(double));
  return out;
}

void save_policy(const Policy& policy, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path.string());
  const std::string bytes = policy_bytes(policy);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("save_policy: write failed for " + path.string());
}

Policy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path.string());
  char magic[8];
  std::uint32_t kind = 0, vocab = 0, fdim = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&kind), sizeof(kind));
  in.read(reinterpret_cast<char*>(&vocab), sizeof(vocab));
  in.read(reinterpret_cast<char*>(&fdim), sizeof(fdim));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0 || kind > 1) {
    throw std::runtime_error("load_policy: bad header in " + path.string());
  }
  Policy policy(kind == 0 ? PolicyKind::captioner : PolicyKind::frame, static_cast<int>(fdim),
                static_cast<int>(vocab));
  in.read(reinterpret_cast<char*>(policy.weights().data()),
          static_cast<std::streamsize>(policy.weights().size() * sizeof(double)));
  if (!in) throw std::runtime_error("load_policy: truncated file " + path.string());
  return policy;
}

}  // namespace duet
