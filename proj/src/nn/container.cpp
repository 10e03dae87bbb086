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

#include "apirec/nn/container.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "apirec/error.hpp"

namespace apirec::nn {
namespace {

constexpr std::array<char, 8> kMagic = {'A', 'P', 'I', 'R', 'E', 'C', 'M', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("truncated model file " + path.string());
  return value;
}

std::string get_string(std::istream& in, const std::filesystem::path& path) {
  const auto size = get<std::uint32_t>(in, path);
  if (size > (1u << 30)) throw DataError("corrupt string length in " + path.string());
  std::string s(size, '\0');
  in.read(s.data(), size);
  if (!in) throw DataError("truncated model file " + path.string());
  return s;
}

ContainerHeader read_header(std::istream& in, const std::filesystem::path& path) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError(path.string() + " is not a model container");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw DataError("unsupported model container version " + std::to_string(version));
  }
  ContainerHeader header;
  header.kind = get_string(in, path);
  header.config_json = get_string(in, path);
  header.seed = get<std::uint64_t>(in, path);
  return header;
}

}  // namespace

void write_container(const std::filesystem::path& path, const ContainerHeader& header,
                     const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put_string(out, header.kind);
  put_string(out, header.config_json);
  put<std::uint64_t>(out, header.seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.items().size()));
  for (const auto& p : params.items()) {
    put_string(out, p->name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

ContainerHeader read_container_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_header(in, path);
}

ContainerHeader read_container(const std::filesystem::path& path, const std::string& expected_kind,
                               ParameterSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  ContainerHeader header = read_header(in, path);
  if (header.kind != expected_kind) {
    throw DataError(path.string() + " holds a '" + header.kind + "' model, expected '" +
                    expected_kind + "'");
  }
  const auto count = get<std::uint32_t>(in, path);
  if (count != params.items().size()) {
    throw DataError(path.string() + ": tensor count does not match the configured model");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(in, path);
    const auto rows = get<std::uint32_t>(in, path);
    const auto cols = get<std::uint32_t>(in, path);
    Parameter& p = *params.items()[i];
    if (p.name != name || p.value.rows() != rows || p.value.cols() != cols) {
      throw DataError(path.string() + ": tensor '" + name + "' does not match the model layout");
    }
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    if (!in) throw DataError("truncated model file " + path.string());
  }
  return header;
}

}  // namespace apirec::nn
