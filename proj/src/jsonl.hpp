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

// JSON-lines helpers shared by the record loaders. Not installed.

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "apirec/error.hpp"
#include "json.hpp"

namespace apirec::detail {

using Json = nlohmann::ordered_json;

template <typename T, typename Format>
void write_jsonl(const std::filesystem::path& path, std::span<const T> items, Format format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& item : items) out << format(item).dump() << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

// Blank lines are skipped; any other failure becomes a ParseError carrying
// the line number.
template <typename T, typename Parse>
std::vector<T> load_jsonl(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<T> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      items.push_back(parse(Json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return items;
}

}  // namespace apirec::detail
