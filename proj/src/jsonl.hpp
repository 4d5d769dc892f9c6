#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "terse/error.hpp"

namespace terse::detail {

using json = nlohmann::json;

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw file_not_found(path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw file_not_found(path.string());
    }
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path,
                                 std::ios::openmode extra = std::ios::trunc) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | extra);
    if (!out) {
        throw error("cannot open for writing: " + path.string());
    }
    return out;
}

/// Calls `fn(line, line_no)` for every non-blank line; line numbers are 1-based.
inline void for_each_line(const std::filesystem::path& path,
                          const std::function<void(std::string_view, std::size_t)>& fn) {
    auto in = open_input(path);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        fn(line, no);
    }
}

inline json parse_json_line(std::string_view line, std::size_t no) {
    try {
        auto j = json::parse(line);
        if (!j.is_object()) {
            throw parse_error(no, "expected a JSON object");
        }
        return j;
    } catch (const json::parse_error& e) {
        throw parse_error(no, e.what());
    }
}

inline std::string slurp(const std::filesystem::path& path) {
    auto in = open_input(path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace terse::detail
