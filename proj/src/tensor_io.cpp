// SPDX-License-Identifier: Apache-2.0
#include "form/tensor_io.hpp"

#include <unistd.h>

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace form {

namespace fs = std::filesystem;
using nlohmann::json;

TensorFile::TensorFile() : meta_(std::make_unique<json>(json::object())) {}
TensorFile::TensorFile(const TensorFile& o)
    : tensors(o.tensors), bytes(o.bytes), meta_(std::make_unique<json>(*o.meta_)) {}
TensorFile::TensorFile(TensorFile&&) noexcept = default;
TensorFile& TensorFile::operator=(const TensorFile& o) {
  if (this != &o) {
    tensors = o.tensors;
    bytes = o.bytes;
    *meta_ = *o.meta_;
  }
  return *this;
}
TensorFile& TensorFile::operator=(TensorFile&&) noexcept = default;
TensorFile::~TensorFile() = default;

json TensorFile::meta() const { return *meta_; }
void TensorFile::set_meta(const json& m) { *meta_ = m; }

namespace {
constexpr char kMagic[4] = {'F', 'T', 'N', 'S'};
}

void TensorFile::save(const fs::path& path) const {
  json manifest;
  manifest["meta"] = *meta_;
  manifest["entries"] = json::array();

  std::uint64_t offset = 0;
  std::vector<std::pair<const void*, std::size_t>> chunks;
  for (const auto& [name, m] : tensors) {
    json e;
    e["name"] = name;
    e["dtype"] = "f8";
    e["rows"] = m.rows();
    e["cols"] = m.cols();
    e["byte_offset"] = offset;
    manifest["entries"].push_back(e);
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
    chunks.emplace_back(m.data(), n);
    offset += n;
  }
  for (const auto& [name, b] : bytes) {
    json e;
    e["name"] = name;
    e["dtype"] = "u8";
    e["rows"] = b.size();
    e["cols"] = 1;
    e["byte_offset"] = offset;
    manifest["entries"].push_back(e);
    chunks.emplace_back(b.data(), b.size());
    offset += b.size();
  }

  const std::string header = manifest.dump();
  const fs::path tmp = path.parent_path() / (path.filename().string() + ".tmp." +
                                             std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(kMagic, 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [ptr, n] : chunks) {
      out.write(static_cast<const char*>(ptr), static_cast<std::streamsize>(n));
    }
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
  }
}

TensorFile TensorFile::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError(path.string() + ": not a tensor container");
  }
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string header(hlen, '\0');
  in.read(header.data(), hlen);
  if (!in) throw ParseError(path.string() + ": truncated manifest");

  json manifest;
  try {
    manifest = json::parse(header);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": bad manifest: " + e.what());
  }

  const std::streampos payload_start = in.tellg();
  TensorFile tf;
  if (manifest.contains("meta")) tf.set_meta(manifest["meta"]);
  for (const auto& e : manifest["entries"]) {
    const std::string name = e.at("name");
    const std::string dtype = e.at("dtype");
    const std::uint64_t off = e.at("byte_offset");
    const std::int64_t rows = e.at("rows");
    const std::int64_t cols = e.at("cols");
    in.seekg(payload_start + static_cast<std::streamoff>(off));
    if (dtype == "f8") {
      Matrix m(rows, cols);
      in.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
      if (!in) throw ParseError(path.string() + ": truncated payload for " + name);
      tf.tensors.emplace(name, std::move(m));
    } else if (dtype == "u8") {
      std::vector<std::uint8_t> b(static_cast<std::size_t>(rows * cols));
      in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size()));
      if (!in) throw ParseError(path.string() + ": truncated payload for " + name);
      tf.bytes.emplace(name, std::move(b));
    } else {
      throw ParseError(path.string() + ": unknown dtype '" + dtype + "' for " + name);
    }
  }
  return tf;
}

}  // namespace form
