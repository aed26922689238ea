#include "duet/vocab.hpp"

#include <stdexcept>

namespace duet {

void Vocab::validate() const {
  if (symbol_count < 8 || symbol_count % 4 != 0) {
    throw std::invalid_argument("Vocab: symbol_count must be >= 8 and divisible by 4");
  }
}

Role Vocab::role_of(int symbol) const {
  if (!symbol_valid(symbol)) throw std::invalid_argument("Vocab: symbol out of range");
  return static_cast<Role>(symbol / role_size());
}

int Vocab::word(int symbol) const {
  if (!symbol_valid(symbol)) throw std::invalid_argument("Vocab: symbol out of range");
  return kWordBase + symbol;
}

std::optional<int> Vocab::symbol_of_token(int token) const {
  if (token >= kWordBase && token < kWordBase + symbol_count) return token - kWordBase;
  return std::nullopt;
}

std::vector<std::pair<int, int>> Vocab::token_symbol_table() const {
  std::vector<std::pair<int, int>> table;
  table.reserve(symbol_count);
  for (int s = 0; s < symbol_count; ++s) table.emplace_back(word(s), s);
  return table;
}

std::string Vocab::describe_symbol(int symbol) const {
  static const char* kRoleNames[] = {"actor", "object", "action", "location"};
  if (!symbol_valid(symbol)) return "sym<invalid:" + std::to_string(symbol) + ">";
  const Role r = role_of(symbol);
  const int idx = symbol - role_begin(r);
  return std::string(kRoleNames[static_cast<int>(r)]) + std::to_string(idx);
}

std::string Vocab::describe_token(int token) const {
  switch (token) {
    case kEnd: return "<end>";
    case kThinkOpen: return "[Think]";
    case kThinkClose: return "[/Think]";
    case kAnswerOpen: return "[Ans]";
    case kAnswerClose: return "[/Ans]";
    default: break;
  }
  if (auto s = symbol_of_token(token)) return describe_symbol(*s);
  if (token == tok_what()) return "what";
  if (token == tok_next()) return "next";
  if (token == tok_after()) return "after";
  if (token == tok_if()) return "if";
  if (token == tok_then()) return "then";
  if (token == tok_qmark()) return "?";
  return "tok<invalid:" + std::to_string(token) + ">";
}

}  // namespace duet
