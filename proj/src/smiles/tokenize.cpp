//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <cctype>

#include "fedretro/smiles.hpp"

namespace fedretro::smiles {

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    std::size_t len = 1;
    if (c == '[') {
      const auto close = text.find(']', i);
      if (close == std::string_view::npos)
        throw TokenError("dangling '['", i);
      len = close - i + 1;
    } else if (c == '%') {
      if (i + 2 >= text.size()
          || !std::isdigit(static_cast<unsigned char>(text[i + 1]))
          || !std::isdigit(static_cast<unsigned char>(text[i + 2])))
        throw TokenError("dangling '%'", i);
      len = 3;
    } else if ((c == 'C' || c == 'B') && i + 1 < text.size()
               && text[i + 1] == (c == 'C' ? 'l' : 'r')) {
      len = 2;
    }
    seq.tokens.emplace_back(text.substr(i, len));
    i += len;
  }
  return seq;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (const auto &t: tokens)
    out += t;
  return out;
}

std::string detokenize(const TokenSeq &seq) {
  return detokenize(std::span<const std::string>(seq.tokens));
}

}  // namespace fedretro::smiles
