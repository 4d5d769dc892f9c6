#pragma once

#include <string>
#include <string_view>

namespace terse {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Incremental SHA-256 over several fields. Each field is length-prefixed so
/// ("ab","c") and ("a","bc") hash differently.
class field_hasher {
  public:
    field_hasher();
    ~field_hasher();
    field_hasher(const field_hasher&) = delete;
    field_hasher& operator=(const field_hasher&) = delete;

    field_hasher& add(std::string_view field);
    std::string hex();

  private:
    void* ctx_;
};

}  // namespace terse
