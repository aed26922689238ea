#pragma once

#include <optional>
#include <string>
#include <vector>

namespace duet {

enum class Role { actor = 0, object = 1, action = 2, location = 3 };

// Shared symbol and token vocabulary. Symbols live on a 4-role partition of
// [0, symbol_count); caption/question tokens are delimiters, one word per
// symbol, and a small set of function words.
struct Vocab {
  int symbol_count = 32;  // must be divisible by 4 and >= 8

  static constexpr int kArity = 4;  // one slot per role
  static constexpr int kEnd = 0;
  static constexpr int kThinkOpen = 1;
  static constexpr int kThinkClose = 2;
  static constexpr int kAnswerOpen = 3;
  static constexpr int kAnswerClose = 4;
  static constexpr int kWordBase = 5;
  static constexpr int kFunctionWords = 6;

  void validate() const;

  int role_size() const { return symbol_count / 4; }
  int role_begin(Role r) const { return static_cast<int>(r) * role_size(); }
  Role role_of(int symbol) const;
  bool symbol_valid(int symbol) const { return symbol >= 0 && symbol < symbol_count; }

  int token_count() const { return kWordBase + symbol_count + kFunctionWords; }
  int word(int symbol) const;
  // Inverse of word(); empty for non-word tokens.
  std::optional<int> symbol_of_token(int token) const;

  int tok_what() const { return kWordBase + symbol_count + 0; }
  int tok_next() const { return kWordBase + symbol_count + 1; }
  int tok_after() const { return kWordBase + symbol_count + 2; }
  int tok_if() const { return kWordBase + symbol_count + 3; }
  int tok_then() const { return kWordBase + symbol_count + 4; }
  int tok_qmark() const { return kWordBase + symbol_count + 5; }

  bool token_valid(int token) const { return token >= 0 && token < token_count(); }
  bool is_delimiter(int token) const {
    return token == kThinkOpen || token == kThinkClose || token == kAnswerOpen ||
           token == kAnswerClose;
  }
  // Word or function token: anything that may appear inside a span.
  bool is_content(int token) const {
    return token_valid(token) && token != kEnd && !is_delimiter(token);
  }

  // Pairs (token, symbol) for every word token, in token order. Published
  // alongside dataset files so readers can map caption words into symbol
  // space without re-deriving the layout.
  std::vector<std::pair<int, int>> token_symbol_table() const;

  std::string describe_symbol(int symbol) const;
  std::string describe_token(int token) const;
};

}  // namespace duet
