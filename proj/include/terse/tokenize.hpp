#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace terse {

enum class token_scheme { whitespace, unicode_words };

std::string_view to_string(token_scheme s);
token_scheme parse_token_scheme(std::string_view name);

struct token_list {
    std::vector<std::string> tokens;
    token_scheme scheme = token_scheme::unicode_words;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

/// A token together with its half-open code point range in the source text.
struct located_token {
    std::string text;
    std::size_t cp_begin = 0;
    std::size_t cp_end = 0;
};

/// Splits `text` into tokens.
///
/// whitespace: maximal runs of non-White_Space code points.
/// unicode_words: maximal runs of letters/digits; every other visible code
/// point (punctuation, symbols) is a token by itself.
///
/// Classification is table-driven and does not depend on the C locale.
/// Invalid UTF-8 bytes are decoded as U+FFFD.
token_list tokenize(std::string_view text, token_scheme scheme, bool lowercase = false);

std::vector<located_token> tokenize_located(std::string_view text, token_scheme scheme);

std::size_t count_tokens(std::string_view text, token_scheme scheme);

/// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
std::string to_lower(std::string_view text);

/// Token counter backed by an external command: the text is written to a
/// temporary file, the command is run with that file on stdin, and its stdout
/// must be a single non-negative integer.
class external_token_counter {
  public:
    explicit external_token_counter(std::string command);
    std::size_t count(std::string_view text) const;

  private:
    std::string command_;
};

}  // namespace terse
