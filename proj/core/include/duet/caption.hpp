#pragma once

#include <optional>
#include <vector>

#include "duet/vocab.hpp"

namespace duet {

// Token sequence following the reason-then-answer template
//   [Think] think... [/Think] [Ans] answer... [/Ans]
// plus an optional trailing end token. Spans are parsed on construction;
// a caption is well formed iff both spans are present, non-empty, and no
// stray delimiter or premature end token appears anywhere.
struct Caption {
  struct Spans {
    int think_begin = 0, think_end = 0;    // [begin, end) into tokens
    int answer_begin = 0, answer_end = 0;
  };

  std::vector<int> tokens;
  std::optional<Spans> spans;

  static Caption from_tokens(std::vector<int> tokens, const Vocab& vocab);

  bool well_formed() const { return spans.has_value(); }

  std::vector<int> think_tokens() const;
  std::vector<int> answer_tokens() const;
  // Answer span when well formed, otherwise every content token (the
  // fallback scoring surface for malformed captions).
  std::vector<int> answer_or_content(const Vocab& vocab) const;
  std::vector<int> content_tokens(const Vocab& vocab) const;

  friend bool operator==(const Caption& a, const Caption& b) { return a.tokens == b.tokens; }
};

}  // namespace duet
