// Copyright 2026 The apirec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace apirec {

// Lowercased alphanumeric runs; every other ASCII byte separates words.
// Bytes >= 0x80 are kept inside words so UTF-8 text survives.
std::vector<std::string> word_tokens(std::string_view text);

enum class SubtokenMode { kQuery, kApi };

// kQuery: same as word_tokens.
// kApi: whitespace-separated API renderings split around '.', which becomes
// its own subtoken; identifier case is preserved ("Float.parseFloat" ->
// "Float", ".", "parseFloat").
std::vector<std::string> subtokenize(std::string_view text, SubtokenMode mode);

}  // namespace apirec
