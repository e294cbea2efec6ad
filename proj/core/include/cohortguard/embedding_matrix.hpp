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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cohortguard {

/// Dense row-major matrix of speaker embeddings.
///
/// Values are stored exactly as the extractor produced them (no
/// re-normalization). Construction rejects non-finite values and zero-norm
/// rows, so every row is a valid cosine operand. Squared row norms are
/// computed once with dot() and cached.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  /// Throws ValidationError when data.size() != rows * dim, dim == 0, or any
  /// row is non-finite or has zero norm (the message names the row).
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  double squared_norm(std::size_t i) const { return squared_norms_[i]; }

  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<double> squared_norms_;
};

/// Dot product accumulated in double precision with a fixed summation
/// order, so dot(a, b) == dot(b, a) bitwise.
double dot(std::span<const float> a, std::span<const float> b);

inline double squared_norm(std::span<const float> v) { return dot(v, v); }

// SVEM binary container, version 1. Layout (all little-endian):
//   0..3   "SVEM"
//   4..5   u16 version = 1
//   6..7   u16 flags = 0
//   8..15  u64 row_count
//   16..19 u32 dim
//   20..23 u32 reserved = 0
//   24..   row_count * dim IEEE-754 binary32, row-major
inline constexpr std::size_t kSvemHeaderBytes = 24;
inline constexpr std::uint16_t kSvemVersion = 1;

/// Serializes to an in-memory SVEM image.
std::vector<std::byte> encode_svem(const EmbeddingMatrix& matrix);

/// Parses an SVEM image. Throws FormatError for header and size problems and
/// ValidationError for non-finite or zero-norm rows.
EmbeddingMatrix decode_svem(std::span<const std::byte> bytes);

EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingMatrix& matrix,
                      const std::filesystem::path& path);

}  // namespace cohortguard
