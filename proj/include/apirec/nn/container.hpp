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
#include <string>

#include "apirec/nn/parameters.hpp"

namespace apirec::nn {

// On-disk model container:
//   magic "APIRECM\0", u32 version, kind, config (JSON text), u64 seed,
//   u32 tensor count, then per tensor: name, u32 rows, u32 cols, f32 data.
// Strings are u32 length + bytes; integers and floats little-endian.
struct ContainerHeader {
  std::string kind;
  std::string config_json;
  std::uint64_t seed = 0;
};

void write_container(const std::filesystem::path& path, const ContainerHeader& header,
                     const ParameterSet& params);

// Reads the header only.
ContainerHeader read_container_header(const std::filesystem::path& path);

// Reads the header and copies every tensor into the matching parameter of
// `params`; names and shapes must agree exactly. Throws DataError.
ContainerHeader read_container(const std::filesystem::path& path, const std::string& expected_kind,
                               ParameterSet& params);

}  // namespace apirec::nn
