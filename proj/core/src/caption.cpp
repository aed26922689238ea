#include "duet/caption.hpp"

namespace duet {

namespace {

// Matches OPEN_THINK content+ CLOSE_THINK OPEN_ANS content+ CLOSE_ANS with
// nothing before or after; content tokens must not be delimiters or end.
std::optional<Caption::Spans> parse_spans(const std::vector<int>& tokens, const Vocab& vocab) {
  std::vector<int> body = tokens;
  if (!body.empty() && body.back() == Vocab::kEnd) body.pop_back();
  const int n = static_cast<int>(body.size());
  if (n < 6) return std::nullopt;
  if (body[0] != Vocab::kThinkOpen || body[n - 1] != Vocab::kAnswerClose) return std::nullopt;

  Caption::Spans s;
  s.think_begin = 1;
  int i = 1;
  while (i < n && vocab.is_content(body[i])) ++i;
  s.think_end = i;
  if (s.think_end == s.think_begin) return std::nullopt;  // empty think span
  if (i >= n || body[i] != Vocab::kThinkClose) return std::nullopt;
  ++i;
  if (i >= n || body[i] != Vocab::kAnswerOpen) return std::nullopt;
  ++i;
  s.answer_begin = i;
  while (i < n && vocab.is_content(body[i])) ++i;
  s.answer_end = i;
  if (s.answer_end == s.answer_begin) return std::nullopt;  // empty answer span
  if (i != n - 1) return std::nullopt;                      // stray tokens before [/Ans]
  return s;
}

}  // namespace

Caption Caption::from_tokens(std::vector<int> tokens, const Vocab& vocab) {
  Caption c;
  c.tokens = std::move(tokens);
  c.spans = parse_spans(c.tokens, vocab);
  return c;
}

std::vector<int> Caption::think_tokens() const {
  if (!spans) return {};
  return {tokens.begin() + spans->think_begin, tokens.begin() + spans->think_end};
}

std::vector<int> Caption::answer_tokens() const {
  if (!spans) return {};
  return {tokens.begin() + spans->answer_begin, tokens.begin() + spans->answer_end};
}

std::vector<int> Caption::content_tokens(const Vocab& vocab) const {
  std::vector<int> out;
  for (int t : tokens) {
    if (vocab.is_content(t)) out.push_back(t);
  }
  return out;
}

std::vector<int> Caption::answer_or_content(const Vocab& vocab) const {
  if (spans) return answer_tokens();
  return content_tokens(vocab);
}

}  // namespace duet
