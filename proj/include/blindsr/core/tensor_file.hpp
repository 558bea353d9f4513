#pragma once

// On-disk tensor container.
//
//   bytes [0, 8)    magic "BSRTNSR1"
//   bytes [8, 16)   header length N, uint64 little-endian
//   bytes [16, 16+N) UTF-8 JSON header
//   remainder       payload: every array's float32 values, little-endian,
//                   concatenated in header order
//
// Header fields: format, version, dtype ("f32"), endianness ("little"),
// arrays: [{name, dims, tag}], meta: free-form object.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"

namespace blindsr {

struct NamedArray {
  std::string name;
  std::vector<std::int64_t> dims;
  std::string tag;
  std::vector<float> values;

  std::size_t expected_size() const {
    std::size_t n = 1;
    for (auto d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
};

struct TensorArchive {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const {
    for (const auto& a : arrays) {
      if (a.name == name) return &a;
    }
    return nullptr;
  }
};

namespace detail {

inline constexpr char kTensorMagic[8] = {'B', 'S', 'R', 'T', 'N', 'S', 'R', '1'};

inline std::uint32_t float_bits_le(float v) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) {
    u = ((u & 0xffu) << 24) | ((u & 0xff00u) << 8) | ((u >> 8) & 0xff00u) | (u >> 24);
  }
  return u;
}

inline float float_from_le(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(ParseErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError(ParseErrorKind::io, "short write to " + path.string());
}

}  // namespace detail

inline std::string encode_archive(const TensorArchive& archive) {
  nlohmann::json header;
  header["format"] = "blindsr-tensor";
  header["version"] = 1;
  header["dtype"] = "f32";
  header["endianness"] = "little";
  header["meta"] = archive.meta;
  header["arrays"] = nlohmann::json::array();
  std::size_t total = 0;
  for (const auto& a : archive.arrays) {
    if (a.values.size() != a.expected_size()) {
      throw InvalidArgument("array '" + a.name + "' length does not match its dims");
    }
    header["arrays"].push_back({{"name", a.name}, {"dims", a.dims}, {"tag", a.tag}});
    total += a.values.size();
  }
  const std::string head = header.dump();

  std::string out;
  out.reserve(16 + head.size() + 4 * total);
  out.append(detail::kTensorMagic, 8);
  detail::put_u64_le(out, head.size());
  out.append(head);
  for (const auto& a : archive.arrays) {
    for (float v : a.values) {
      const std::uint32_t u = detail::float_bits_le(v);
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xffu));
    }
  }
  return out;
}

inline TensorArchive decode_archive(const std::string& bytes) {
  using detail::get_u64_le;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 16) throw ParseError(ParseErrorKind::truncated_payload, "file shorter than preamble");
  if (std::memcmp(bytes.data(), detail::kTensorMagic, 8) != 0) {
    throw ParseError(ParseErrorKind::malformed_header, "bad magic");
  }
  const std::uint64_t head_len = get_u64_le(p + 8);
  if (head_len > bytes.size() - 16) throw ParseError(ParseErrorKind::truncated_payload, "header cut short");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(head_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::malformed_header, e.what());
  }
  if (!header.is_object() || !header.contains("arrays") || !header["arrays"].is_array() ||
      !header.contains("dtype")) {
    throw ParseError(ParseErrorKind::malformed_header, "missing required header fields");
  }
  if (header["dtype"] != "f32") {
    throw ParseError(ParseErrorKind::dtype_mismatch, "dtype " + header["dtype"].dump() + ", expected \"f32\"");
  }
  if (header.value("endianness", "little") != "little") {
    throw ParseError(ParseErrorKind::malformed_header, "payload must be little-endian");
  }

  TensorArchive archive;
  archive.meta = header.value("meta", nlohmann::json::object());
  std::size_t total = 0;
  try {
    for (const auto& entry : header["arrays"]) {
      NamedArray a;
      a.name = entry.at("name").get<std::string>();
      a.dims = entry.at("dims").get<std::vector<std::int64_t>>();
      a.tag = entry.value("tag", "");
      for (auto d : a.dims) {
        if (d <= 0) throw ParseError(ParseErrorKind::malformed_header, "non-positive dim in '" + a.name + "'");
      }
      total += a.expected_size();
      archive.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::malformed_header, e.what());
  }

  const std::size_t payload = bytes.size() - 16 - head_len;
  if (payload == 0 || payload % 4 != 0) {
    throw ParseError(ParseErrorKind::truncated_payload,
                     "payload of " + std::to_string(payload) + " bytes is not a whole float32 sequence");
  }
  if (payload / 4 != total) {
    throw ParseError(ParseErrorKind::dimension_mismatch, "header declares " + std::to_string(total) +
                                                             " values, payload holds " +
                                                             std::to_string(payload / 4));
  }
  const unsigned char* cur = p + 16 + head_len;
  for (auto& a : archive.arrays) {
    a.values.resize(a.expected_size());
    for (float& v : a.values) {
      v = detail::float_from_le(cur);
      cur += 4;
    }
  }
  return archive;
}

inline void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  detail::write_file_bytes(path, encode_archive(archive));
}

inline TensorArchive read_archive(const std::filesystem::path& path) {
  return decode_archive(detail::read_file_bytes(path));
}

inline void write_tensor(const std::filesystem::path& path, const ImageTensor& t,
                         const std::string& semantic = "image") {
  TensorArchive archive;
  archive.meta["semantic"] = semantic;
  archive.meta["domain"] = to_string(t.domain());
  archive.arrays.push_back({"image", {t.height(), t.width(), t.channels()}, to_string(t.domain()), t.vector()});
  write_archive(path, archive);
}

inline ImageTensor read_tensor(const std::filesystem::path& path) {
  TensorArchive archive = read_archive(path);
  const NamedArray* a = archive.find("image");
  if (a == nullptr) throw ParseError(ParseErrorKind::malformed_header, "no 'image' array");
  if (a->dims.size() != 3) throw ParseError(ParseErrorKind::dimension_mismatch, "image must be rank 3");
  const Domain d = a->tag == "latent" ? Domain::latent : Domain::unit;
  return ImageTensor(static_cast<int>(a->dims[0]), static_cast<int>(a->dims[1]), static_cast<int>(a->dims[2]),
                     a->values, d);
}

}  // namespace blindsr
