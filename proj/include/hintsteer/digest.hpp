#pragma once

#include <string>
#include <string_view>

namespace hintsteer {

// Lowercase hex SHA-256 of the exact bytes.
std::string Sha256Hex(std::string_view bytes);

}  // namespace hintsteer
