#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace alter {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

/// Splits on whitespace, then separates digit runs and single ASCII punctuation
/// characters from word runs. Non-ASCII bytes belong to word runs.
class RuleTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();
/// Replaces the process-wide tokenizer used by count_tokens. Not thread-safe
/// with respect to concurrent count_tokens calls.
void set_default_tokenizer(std::shared_ptr<const Tokenizer> tokenizer);

std::size_t count_tokens(std::string_view text);

bool is_token_punct(unsigned char c);

}  // namespace alter
