#include "alter/tokenizer.hpp"


namespace alter {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

enum class Kind { space, digit, punct, word };

Kind classify(unsigned char c) {
  if (is_space(c)) return Kind::space;
  if (is_digit(c)) return Kind::digit;
  if (is_token_punct(c)) return Kind::punct;
  return Kind::word;
}

template <typename Emit>
void scan(std::string_view text, Emit&& emit) {
  std::size_t i = 0;
  while (i < text.size()) {
    const Kind kind = classify(static_cast<unsigned char>(text[i]));
    if (kind == Kind::space) {
      ++i;
      continue;
    }
    std::size_t start = i++;
    if (kind != Kind::punct) {
      while (i < text.size() && classify(static_cast<unsigned char>(text[i])) == kind) ++i;
    }
    emit(text.substr(start, i - start));
  }
}

std::shared_ptr<const Tokenizer>& tokenizer_slot() {
  static std::shared_ptr<const Tokenizer> slot = std::make_shared<RuleTokenizer>();
  return slot;
}

}  // namespace

bool is_token_punct(unsigned char c) {
  return c < 0x80 && ((c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
                      (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E));
}

std::vector<std::string> RuleTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> tokens;
  scan(text, [&](std::string_view token) { tokens.emplace_back(token); });
  return tokens;
}

std::size_t RuleTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  scan(text, [&](std::string_view) { ++n; });
  return n;
}

const Tokenizer& default_tokenizer() { return *tokenizer_slot(); }

void set_default_tokenizer(std::shared_ptr<const Tokenizer> tokenizer) {
  tokenizer_slot() = tokenizer ? std::move(tokenizer) : std::make_shared<RuleTokenizer>();
}

std::size_t count_tokens(std::string_view text) { return default_tokenizer().count(text); }

}  // namespace alter
