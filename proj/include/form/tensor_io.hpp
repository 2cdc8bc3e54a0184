// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "form/common.hpp"

namespace form {

// Single-file tensor container: a JSON manifest followed by one contiguous
// little-endian payload.
//
//   [ "FTNS" ][ u32 manifest length ][ manifest JSON ][ payload bytes ]
//
// The manifest lists every entry as {name, dtype, rows, cols, byte_offset}
// plus a free-form "meta" object. dtype is "f8" (double) for matrices and
// "u8" for byte arrays (masks). Matrices are stored column-major. Loading a
// container and saving it again reproduces the payload bit for bit.
class TensorFile {
 public:
  std::map<std::string, Matrix> tensors;
  std::map<std::string, std::vector<std::uint8_t>> bytes;
  nlohmann::json meta() const;
  void set_meta(const nlohmann::json& m);

  // Writes atomically: the container is assembled in a sibling temp file
  // and renamed into place, so a concurrent reader never sees a torn file.
  void save(const std::filesystem::path& path) const;
  static TensorFile load(const std::filesystem::path& path);

  TensorFile();
  TensorFile(const TensorFile&);
  TensorFile(TensorFile&&) noexcept;
  TensorFile& operator=(const TensorFile&);
  TensorFile& operator=(TensorFile&&) noexcept;
  ~TensorFile();

 private:
  // Owned as a pointer so the header only needs json_fwd.
  std::unique_ptr<nlohmann::json> meta_;
};

}  // namespace form
