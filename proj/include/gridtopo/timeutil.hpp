#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace gridtopo {

// RFC 3339 timestamp ("2024-01-01T00:15:00Z", offsets and fractional seconds
// accepted; fractions are truncated). Returns unix seconds.
std::optional<std::int64_t> parse_rfc3339(const std::string& text);

// Unix seconds -> "YYYY-MM-DDThh:mm:ssZ".
std::string format_rfc3339(std::int64_t unix_seconds);

}  // namespace gridtopo
