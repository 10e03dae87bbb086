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

#include "apirec/text.hpp"

#include <gtest/gtest.h>

#include "apirec/hashing.hpp"

namespace apirec {
namespace {

using Tokens = std::vector<std::string>;

TEST(Subtokenize, ApiModeKeepsDotsAsTokens) {
  EXPECT_EQ(subtokenize("Float.parseFloat", SubtokenMode::kApi), (Tokens{"Float", ".", "parseFloat"}));
  EXPECT_EQ(subtokenize("Integer.parseInt Long.parseLong", SubtokenMode::kApi),
            (Tokens{"Integer", ".", "parseInt", "Long", ".", "parseLong"}));
}

TEST(Subtokenize, QueryModeLowercasesWords) {
  EXPECT_EQ(subtokenize("parse string to object", SubtokenMode::kQuery),
            (Tokens{"parse", "string", "to", "object"}));
  EXPECT_EQ(subtokenize("Parse, a String!", SubtokenMode::kQuery), (Tokens{"parse", "a", "string"}));
}

TEST(Subtokenize, EmptyInput) {
  EXPECT_TRUE(subtokenize("", SubtokenMode::kApi).empty());
  EXPECT_TRUE(subtokenize("", SubtokenMode::kQuery).empty());
  EXPECT_TRUE(word_tokens("  ,. ").empty());
}

TEST(Hashing, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hashing, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Hashing, DerivedSeedsDependOnKey) {
  EXPECT_EQ(derive_seed(1, "x"), derive_seed(1, "x"));
  EXPECT_NE(derive_seed(1, "x"), derive_seed(1, "y"));
  EXPECT_NE(derive_seed(1, "x"), derive_seed(2, "x"));
}

}  // namespace
}  // namespace apirec
