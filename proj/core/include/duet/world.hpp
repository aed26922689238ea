#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "duet/caption.hpp"
#include "duet/math.hpp"
#include "duet/vocab.hpp"

namespace duet {

// One observation: a symbol per role slot (actor, object, action, location).
struct Frame {
  std::array<int, Vocab::kArity> slots{};

  int actor() const { return slots[0]; }
  int object() const { return slots[1]; }
  int action() const { return slots[2]; }
  int location() const { return slots[3]; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct SymbolicVideo {
  std::vector<Frame> frames;

  bool empty() const { return frames.empty(); }
  int length() const { return static_cast<int>(frames.size()); }

  friend bool operator==(const SymbolicVideo&, const SymbolicVideo&) = default;
};

enum class QuestionKind { procedural, predictive };

const char* to_string(QuestionKind kind);
QuestionKind question_kind_from_string(const std::string& s);

struct Question {
  QuestionKind kind = QuestionKind::procedural;
  std::vector<int> tokens;

  friend bool operator==(const Question&, const Question&) = default;
};

struct Episode {
  std::int64_t id = 0;
  SymbolicVideo input_video;
  Question question;
  std::vector<int> cot;  // reference reasoning tokens
  Caption gt_caption;
  SymbolicVideo gt_video;

  friend bool operator==(const Episode& a, const Episode& b) {
    return a.id == b.id && a.input_video == b.input_video && a.question == b.question &&
           a.cot == b.cot && a.gt_caption == b.gt_caption && a.gt_video == b.gt_video;
  }
};

// Deterministic next-event dynamics. Entries are keyed on the last frame's
// (action, object) signature, the question kind, and for predictive
// questions the hypothesis action posed in the question. The table is total
// over role-valid frames by construction; a lookup of an invalid signature
// names it in the error.
class RuleTable {
 public:
  struct Event {
    int action = 0;
    int object = 0;
    int location_delta = 1;  // applied to the last frame's location, mod role size
  };

  static RuleTable make(const Vocab& vocab, std::uint64_t seed);

  // hypothesis_action: the hypothesised action symbol for predictive lookups,
  // ignored for procedural ones.
  Event lookup(const Frame& last, QuestionKind kind, int hypothesis_action = -1) const;
  // The event realised as a full frame (actor kept, location shifted).
  Frame apply(const Frame& last, const Event& e) const;

  const Vocab& vocab() const { return vocab_; }

 private:
  RuleTable(Vocab vocab) : vocab_(std::move(vocab)) {}

  Vocab vocab_;
  std::unordered_map<std::uint64_t, Event> table_;
};

struct WorldConfig {
  Vocab vocab;
  int input_min_frames = 4;
  int input_max_frames = 8;
  int gt_min_frames = 3;
  int gt_max_frames = 5;
  int qa_max_retries = 8;
};

// External annotator boundary (the captioning service in a full-scale
// pipeline). The rule-based implementation reads the modal symbols of a clip.
struct Annotator {
  virtual ~Annotator() = default;
  virtual Caption annotate(const SymbolicVideo& clip) const = 0;
};

class RuleBasedAnnotator : public Annotator {
 public:
  explicit RuleBasedAnnotator(Vocab vocab) : vocab_(std::move(vocab)) {}
  Caption annotate(const SymbolicVideo& clip) const override;

 private:
  Vocab vocab_;
};

Episode generate_episode(const RuleTable& rules, QuestionKind kind, Rng& rng,
                         const WorldConfig& cfg);

// Splits a long video at the given strictly increasing boundaries and drops
// segments shorter than 3 frames.
std::vector<SymbolicVideo> shot_split(const SymbolicVideo& long_video,
                                      const std::vector<int>& boundaries);

// Picks the segment scoring highest caption-video alignment (ties go to the
// earliest) and clamps it to at most 5 frames by centered truncation.
SymbolicVideo clip_select(const std::vector<SymbolicVideo>& segments, const Caption& caption,
                          const Vocab& vocab);

struct QaSample {
  Question question;
  std::vector<int> cot;
  Caption answer_caption;
  int clip_index = 0;  // the clip the question is about
};

// Builds a question about clip k answered by clip k+1's caption, regenerating
// with less question context while the leakage self-check fails.
QaSample qa_generate(const std::vector<std::pair<SymbolicVideo, Caption>>& clips, Rng& rng,
                     const Vocab& vocab, int max_retries = 8);

// Checks that no answer-span token appears verbatim among the question tokens.
bool leakage_free(const Question& question, const Caption& answer);

struct Dataset {
  Vocab vocab;
  std::vector<Episode> episodes;
};

void write_dataset(const std::vector<Episode>& episodes, const Vocab& vocab,
                   const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

struct CorpusCounts {
  int procedural = 2000;
  int predictive = 2000;
};

// Deterministic corpus generation; ids start at id_base and increase by 1.
std::vector<Episode> generate_dataset(const RuleTable& rules, const CorpusCounts& counts,
                                      std::int64_t id_base, Rng& rng, const WorldConfig& cfg);

}  // namespace duet
