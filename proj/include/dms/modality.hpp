#pragma once

#include <string>
#include <string_view>

namespace dms {

enum class Modality { rgb, ir };

inline const char* to_string(Modality m) noexcept { return m == Modality::rgb ? "rgb" : "ir"; }

/// Parses "rgb" or "ir"; throws ParseError otherwise.
Modality parse_modality(std::string_view text);

} // namespace dms
