#pragma once

#include <string>
#include <string_view>

namespace mrag::unicode {

/// Decodes UTF-8 into Unicode scalar values. Throws mrag::PreconditionError on
/// malformed input (overlong forms, surrogates, truncated sequences).
std::u32string decode(std::string_view utf8);

std::string encode(std::u32string_view scalars);
void append(std::string& out, char32_t scalar);

/// Number of scalar values in a UTF-8 string.
std::size_t length(std::string_view utf8);

bool is_whitespace(char32_t c);

/// Strips leading and trailing Unicode whitespace.
std::string_view trim(std::string_view utf8);

/// Simple one-to-one lowercase mapping for Latin, Greek and Cyrillic blocks.
/// Scripts without case (CJK, Thai, Arabic, ...) pass through unchanged.
char32_t to_lower(char32_t c);
std::u32string to_lower(std::u32string_view s);

}  // namespace mrag::unicode
