// Copyright 2026 The cohortguard Authors
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

#include "cohortguard/embedding_matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "cohortguard/error.hpp"

namespace cohortguard {
namespace {

static_assert(std::numeric_limits<float>::is_iec559);
static_assert(sizeof(float) == 4);

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xffu));
  }
}

template <typename T>
T get_le(std::span<const std::byte> bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(std::to_integer<unsigned>(bytes[offset + i]))
             << (8 * i);
  }
  return value;
}

}  // namespace

double dot(std::span<const float> a, std::span<const float> b) {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += static_cast<double>(a[k]) * b[k];
    s1 += static_cast<double>(a[k + 1]) * b[k + 1];
    s2 += static_cast<double>(a[k + 2]) * b[k + 2];
    s3 += static_cast<double>(a[k + 3]) * b[k + 3];
  }
  for (; k < n; ++k) s0 += static_cast<double>(a[k]) * b[k];
  return (s0 + s1) + (s2 + s3);
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim,
                                 std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) {
    throw ValidationError("embedding matrix: dim must be positive");
  }
  if (rows_ > data_.max_size() / dim_ || data_.size() != rows_ * dim_) {
    std::ostringstream msg;
    msg << "embedding matrix: " << data_.size() << " values do not fill "
        << rows_ << "x" << dim_;
    throw ValidationError(msg.str());
  }
  squared_norms_.resize(rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    auto r = row(i);
    for (float x : r) {
      if (!std::isfinite(x)) {
        throw ValidationError("embedding matrix: non-finite value in row " +
                              std::to_string(i));
      }
    }
    squared_norms_[i] = cohortguard::squared_norm(r);
    if (!(squared_norms_[i] > 0.0)) {
      throw ValidationError("embedding matrix: zero-norm row " +
                            std::to_string(i));
    }
  }
}

bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  // Bitwise: -0.0f and 0.0f are different stored values.
  return a.rows_ == b.rows_ && a.dim_ == b.dim_ &&
         a.data_.size() == b.data_.size() &&
         std::memcmp(a.data_.data(), b.data_.data(),
                     a.data_.size() * sizeof(float)) == 0;
}

std::vector<std::byte> encode_svem(const EmbeddingMatrix& matrix) {
  if (matrix.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError("SVEM: dim does not fit in 32 bits");
  }
  std::vector<std::byte> out;
  out.reserve(kSvemHeaderBytes + matrix.data().size() * 4);
  for (char c : {'S', 'V', 'E', 'M'}) {
    out.push_back(static_cast<std::byte>(c));
  }
  put_le<std::uint16_t>(out, kSvemVersion);
  put_le<std::uint16_t>(out, 0);
  put_le<std::uint64_t>(out, matrix.rows());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.dim()));
  put_le<std::uint32_t>(out, 0);
  for (float x : matrix.data()) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

EmbeddingMatrix decode_svem(std::span<const std::byte> bytes) {
  if (bytes.size() < kSvemHeaderBytes) {
    throw FormatError("SVEM: truncated header: expected " +
                      std::to_string(kSvemHeaderBytes) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  char magic[4];
  std::memcpy(magic, bytes.data(), 4);
  if (std::string_view(magic, 4) != "SVEM") {
    throw FormatError("SVEM: bad magic \"" + std::string(magic, 4) +
                      "\" (expected \"SVEM\")");
  }
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kSvemVersion) {
    throw FormatError("SVEM: unsupported version " + std::to_string(version));
  }
  const auto flags = get_le<std::uint16_t>(bytes, 6);
  if (flags != 0) {
    throw FormatError("SVEM: unsupported flags " + std::to_string(flags));
  }
  const auto rows = get_le<std::uint64_t>(bytes, 8);
  const auto dim = get_le<std::uint32_t>(bytes, 16);
  const auto reserved = get_le<std::uint32_t>(bytes, 20);
  if (reserved != 0) {
    throw FormatError("SVEM: reserved header field is not zero");
  }
  if (dim == 0) {
    throw FormatError("SVEM: dim must be positive");
  }
  const std::uint64_t max_values =
      std::numeric_limits<std::uint64_t>::max() / 4 / dim;
  if (rows > max_values) {
    throw FormatError("SVEM: row_count " + std::to_string(rows) +
                      " overflows the payload size");
  }
  const std::uint64_t expected = rows * dim * 4;
  const std::uint64_t actual = bytes.size() - kSvemHeaderBytes;
  if (actual < expected) {
    throw FormatError("SVEM: truncated payload: expected " +
                      std::to_string(expected) + " bytes, got " +
                      std::to_string(actual));
  }
  if (actual > expected) {
    throw FormatError("SVEM: trailing bytes after payload: expected " +
                      std::to_string(expected) + " bytes, got " +
                      std::to_string(actual));
  }
  std::vector<float> data(rows * dim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(
        get_le<std::uint32_t>(bytes, kSvemHeaderBytes + 4 * i));
  }
  return EmbeddingMatrix(rows, dim, std::move(data));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open embeddings file " + path.string());
  }
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw FormatError("read error on " + path.string());
  }
  try {
    return decode_svem(std::as_bytes(std::span(raw)));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io_format) {
      throw FormatError(path.string() + ": " + e.what());
    }
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_embeddings(const EmbeddingMatrix& matrix,
                      const std::filesystem::path& path) {
  const auto bytes = encode_svem(matrix);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError("cannot create embeddings file " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw FormatError("write error on " + path.string());
  }
}

}  // namespace cohortguard
