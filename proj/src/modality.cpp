#include "dms/modality.hpp"

#include "dms/error.hpp"

namespace dms {

Modality parse_modality(std::string_view text) {
    if (text == "rgb") return Modality::rgb;
    if (text == "ir") return Modality::ir;
    throw ParseError("unknown modality '" + std::string(text) + "'");
}

} // namespace dms
