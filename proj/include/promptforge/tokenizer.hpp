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

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace promptforge {

/// Built-in deterministic tokenizers: "whitespace" splits on runs of ASCII
/// whitespace; "byte" yields one token per byte.
class Tokenizer {
 public:
  enum class Kind { Whitespace, Byte };

  Tokenizer() = default;
  explicit Tokenizer(Kind kind) : kind_(kind) {}

  /// Throws ValidationError for an unknown name.
  static Tokenizer by_name(std::string_view name);

  Kind kind() const noexcept { return kind_; }
  const char* name() const noexcept;
  std::vector<std::string> tokenize(std::string_view text) const;

 private:
  Kind kind_ = Kind::Whitespace;
};

}  // namespace promptforge
