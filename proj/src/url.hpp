#pragma once

#include <string>
#include <string_view>

#include "terse/error.hpp"

namespace terse::detail {

struct url_parts {
    std::string origin;  // scheme://host[:port]
    std::string path;    // "" or starts with '/', no trailing '/'
};

inline url_parts split_url(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw error("URL must include a scheme: " + std::string(url));
    }
    auto path_begin = url.find('/', scheme_end + 3);
    url_parts out;
    if (path_begin == std::string_view::npos) {
        out.origin = std::string(url);
    } else {
        out.origin = std::string(url.substr(0, path_begin));
        out.path = std::string(url.substr(path_begin));
    }
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

}  // namespace terse::detail
