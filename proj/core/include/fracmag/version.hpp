#pragma once

namespace fracmag {

/// Library version as "major.minor.patch".
const char* version_string() noexcept;

}  // namespace fracmag
