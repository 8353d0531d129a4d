/*  Copyright 2026 The promptforge authors.

    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License. */

#include "promptforge/tokenizer.hpp"

#include "promptforge/errors.hpp"
#include "promptforge/template_lang.hpp"

namespace promptforge {

Tokenizer Tokenizer::by_name(std::string_view name) {
  if (name == "whitespace") return Tokenizer(Kind::Whitespace);
  if (name == "byte") return Tokenizer(Kind::Byte);
  throw ValidationError("unknown tokenizer '" + std::string(name) + "'");
}

const char* Tokenizer::name() const noexcept {
  return kind_ == Kind::Byte ? "byte" : "whitespace";
}

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  if (kind_ == Kind::Byte) {
    out.reserve(text.size());
    for (char c : text) out.emplace_back(1, c);
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && tmpl::is_ascii_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !tmpl::is_ascii_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace promptforge
