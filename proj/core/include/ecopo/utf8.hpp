#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ecopo {

/// Decodes UTF-8 bytes into codepoints. Throws FormatError on invalid sequences.
std::u32string utf8_decode(std::string_view bytes);

std::string utf8_encode(std::u32string_view text);
std::string utf8_encode(char32_t c);

/// Reads a whole UTF-8 text file and splits it into lines ('\n', tolerating
/// trailing '\r'). The final line needs no terminator. Throws Error on I/O failure.
std::vector<std::string> read_lines(const std::string& path);

}  // namespace ecopo
