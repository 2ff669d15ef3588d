#pragma once

#include <string>
#include <string_view>

namespace hiertax::utf8 {

/// Byte length of the sequence starting at `lead`; 1 for invalid bytes.
std::size_t sequence_length(unsigned char lead) noexcept;

/// Invalid sequences decode to U+FFFD.
std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);

/// ASCII and Latin-1 Supplement lowercase mapping; other code points pass
/// through unchanged.
char32_t to_lower(char32_t c) noexcept;

bool is_space(char32_t c) noexcept;

}  // namespace hiertax::utf8
