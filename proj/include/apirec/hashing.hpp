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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace apirec {

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::filesystem::path& path);

// 64-bit FNV-1a; stable across platforms, used for token bucketing.
std::uint64_t fnv1a64(std::string_view text);

// Seed for a per-record RNG stream derived from a global seed and a record
// key, so sampling does not depend on processing order.
// splitmix64 finaliser: a cheap, well-mixed 64-bit hash of an integer.
std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key);

}  // namespace apirec
