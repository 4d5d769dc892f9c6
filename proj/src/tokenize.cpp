#include "terse/tokenize.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "terse/error.hpp"

namespace terse {
namespace {

constexpr char32_t replacement_char = 0xFFFD;

struct decoded {
    char32_t cp;
    std::size_t len;
};

decoded decode_one(std::string_view s, std::size_t i) {
    auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        return {b0, 1};
    }
    std::size_t need = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        need = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        need = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        need = 3;
        cp = b0 & 0x07;
    } else {
        return {replacement_char, 1};
    }
    if (i + need >= s.size()) {
        return {replacement_char, 1};
    }
    for (std::size_t k = 1; k <= need; ++k) {
        unsigned char bk = byte(i + k);
        if ((bk & 0xC0) != 0x80) {
            return {replacement_char, 1};
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    return {cp, need + 1};
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Unicode White_Space property.
bool is_space(char32_t c) {
    return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
           c == 0x205F || c == 0x3000;
}

bool in(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

// Punctuation and symbol blocks outside ASCII. Everything else above U+007F
// that is not whitespace or a control/format character counts as a word
// character, which covers letters, marks and digits of all scripts.
bool is_non_ascii_punct(char32_t c) {
    if (in(c, 0xA1, 0xBF)) {
        // ª µ º and superscript/fraction digits are word characters.
        return !(c == 0xAA || c == 0xB5 || c == 0xBA || c == 0xB2 || c == 0xB3 || c == 0xB9 ||
                 in(c, 0xBC, 0xBE));
    }
    return c == 0xD7 || c == 0xF7 || in(c, 0x2010, 0x2027) || in(c, 0x2030, 0x205E) ||
           in(c, 0x20A0, 0x20CF) || in(c, 0x2100, 0x214F) || in(c, 0x2190, 0x23FF) ||
           in(c, 0x2500, 0x27BF) || in(c, 0x2E00, 0x2E7F) || in(c, 0x3001, 0x3003) ||
           in(c, 0x3008, 0x3011) || in(c, 0x3014, 0x301F) || in(c, 0xFE10, 0xFE1F) ||
           in(c, 0xFE30, 0xFE4F) || in(c, 0xFF01, 0xFF0F) || in(c, 0xFF1A, 0xFF20) ||
           in(c, 0xFF3B, 0xFF40) || in(c, 0xFF5B, 0xFF65) || in(c, 0x1F000, 0x1FAFF) ||
           c == replacement_char;
}

bool is_ignorable(char32_t c) {
    // C0/C1 controls that are not whitespace, and zero-width format characters.
    return c < 0x20 || c == 0x7F || in(c, 0x80, 0x9F) || in(c, 0x200B, 0x200F) || c == 0xFEFF;
}

bool is_word_char(char32_t c) {
    if (c < 0x80) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    }
    return !is_space(c) && !is_ignorable(c) && !is_non_ascii_punct(c);
}

char32_t lower_cp(char32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 0x20;
    if (c < 0x80) return c;
    if ((in(c, 0xC0, 0xDE)) && c != 0xD7) return c + 0x20;
    if (in(c, 0x100, 0x17F) && c != 0x130 && c != 0x131 && c != 0x138 && c != 0x149 &&
        c != 0x17F) {
        // Latin Extended-A alternates upper/lower, with a parity shift in 0x139..0x148
        // and 0x179..0x17E.
        bool odd_block = in(c, 0x139, 0x148) || in(c, 0x179, 0x17E);
        bool is_upper = odd_block ? (c % 2 == 1) : (c % 2 == 0);
        return is_upper ? c + 1 : c;
    }
    if (in(c, 0x391, 0x3A9) && c != 0x3A2) return c + 0x20;
    if (in(c, 0x410, 0x42F)) return c + 0x20;
    if (in(c, 0x400, 0x40F)) return c + 0x50;
    return c;
}

template <typename Emit>
void scan(std::string_view text, token_scheme scheme, Emit&& emit) {
    std::string current;
    std::size_t cur_begin = 0;
    std::size_t cp_index = 0;
    auto flush = [&](std::size_t end) {
        if (!current.empty()) {
            emit(std::move(current), cur_begin, end);
            current.clear();
        }
    };
    for (std::size_t i = 0; i < text.size();) {
        auto [cp, len] = decode_one(text, i);
        std::string_view raw = (cp == replacement_char && len == 1 &&
                                static_cast<unsigned char>(text[i]) >= 0x80)
                                   ? std::string_view{"\xEF\xBF\xBD"}
                                   : text.substr(i, len);
        if (scheme == token_scheme::whitespace) {
            if (is_space(cp)) {
                flush(cp_index);
            } else {
                if (current.empty()) cur_begin = cp_index;
                current.append(raw);
            }
        } else {
            if (is_word_char(cp)) {
                if (current.empty()) cur_begin = cp_index;
                current.append(raw);
            } else {
                flush(cp_index);
                if (!is_space(cp) && !is_ignorable(cp)) {
                    emit(std::string(raw), cp_index, cp_index + 1);
                }
            }
        }
        i += len;
        ++cp_index;
    }
    flush(cp_index);
}

}  // namespace

std::string_view to_string(token_scheme s) {
    return s == token_scheme::whitespace ? "whitespace" : "unicode_words";
}

token_scheme parse_token_scheme(std::string_view name) {
    if (name == "whitespace") return token_scheme::whitespace;
    if (name == "unicode_words") return token_scheme::unicode_words;
    throw error("unknown token scheme: " + std::string(name));
}

std::string to_lower(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        auto [cp, len] = decode_one(text, i);
        if (cp == replacement_char && len == 1 && static_cast<unsigned char>(text[i]) >= 0x80) {
            out.append(text.substr(i, 1));
        } else {
            append_utf8(out, lower_cp(cp));
        }
        i += len;
    }
    return out;
}

token_list tokenize(std::string_view text, token_scheme scheme, bool lowercase) {
    token_list out;
    out.scheme = scheme;
    scan(text, scheme, [&](std::string tok, std::size_t, std::size_t) {
        out.tokens.push_back(lowercase ? to_lower(tok) : std::move(tok));
    });
    return out;
}

std::vector<located_token> tokenize_located(std::string_view text, token_scheme scheme) {
    std::vector<located_token> out;
    scan(text, scheme, [&](std::string tok, std::size_t b, std::size_t e) {
        out.push_back({std::move(tok), b, e});
    });
    return out;
}

std::size_t count_tokens(std::string_view text, token_scheme scheme) {
    std::size_t n = 0;
    scan(text, scheme, [&](std::string&&, std::size_t, std::size_t) { ++n; });
    return n;
}

external_token_counter::external_token_counter(std::string command) : command_(std::move(command)) {}

std::size_t external_token_counter::count(std::string_view text) const {
    std::random_device rd;
    auto path = std::filesystem::temp_directory_path() /
                ("terse-tok-" + std::to_string(rd()) + std::to_string(rd()) + ".txt");
    {
        std::ofstream f(path, std::ios::binary);
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
    }
    std::string cmd = command_ + " < '" + path.string() + "'";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        std::filesystem::remove(path);
        throw error("cannot run tokenizer command: " + command_);
    }
    std::string output;
    std::array<char, 256> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) {
        output += buf.data();
    }
    int status = ::pclose(pipe);
    std::filesystem::remove(path);
    if (status != 0) {
        throw error("tokenizer command failed: " + command_);
    }
    try {
        std::size_t pos = 0;
        long long v = std::stoll(output, &pos);
        if (v < 0) throw std::invalid_argument("negative");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw error("tokenizer command printed no count: '" + output + "'");
    }
}

}  // namespace terse
