#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/tensor_file.hpp"

namespace blindsr {

inline std::uint8_t to_byte(float v) {
  const float s = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
  return static_cast<std::uint8_t>(s);
}

inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

namespace detail {

inline std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return e;
}

inline ImageTensor read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ParseError(ParseErrorKind::malformed_header, path.string() + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ParseError(ParseErrorKind::truncated_payload, path.string() + ": " + msg);
  }
  std::vector<float> data(buf.size());
  std::transform(buf.begin(), buf.end(), data.begin(), from_byte);
  return ImageTensor(static_cast<int>(img.height), static_cast<int>(img.width), channels, std::move(data),
                     Domain::unit);
}

inline void write_png(const std::filesystem::path& path, const ImageTensor& t) {
  if (t.channels() != 1 && t.channels() != 3) throw InvalidArgument("PNG output needs 1 or 3 channels");
  std::vector<std::uint8_t> buf(t.size());
  std::transform(t.values().begin(), t.values().end(), buf.begin(), to_byte);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(t.width());
  img.height = static_cast<png_uint_32>(t.height());
  img.format = t.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw ParseError(ParseErrorKind::io, path.string() + ": " + img.message);
  }
}

// Netpbm binary formats: P5 (gray) and P6 (RGB), maxval <= 255.
inline ImageTensor read_pnm(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") throw ParseError(ParseErrorKind::malformed_header, "not a P5/P6 file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw ParseError(ParseErrorKind::malformed_header, path.string() + ": bad PNM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw ParseError(ParseErrorKind::malformed_header, path.string() + ": unsupported PNM geometry");
  }
  ++pos;  // single whitespace byte before raster
  const int channels = magic == "P6" ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (pos > bytes.size() || bytes.size() - pos < need) {
    throw ParseError(ParseErrorKind::truncated_payload, path.string() + ": raster cut short");
  }
  std::vector<float> data(need);
  for (std::size_t i = 0; i < need; ++i) {
    data[i] = static_cast<float>(static_cast<std::uint8_t>(bytes[pos + i])) / static_cast<float>(maxval);
  }
  return ImageTensor(h, w, channels, std::move(data), Domain::unit);
}

inline void write_pnm(const std::filesystem::path& path, const ImageTensor& t) {
  if (t.channels() != 1 && t.channels() != 3) throw InvalidArgument("PNM output needs 1 or 3 channels");
  std::string out = (t.channels() == 3 ? "P6\n" : "P5\n") + std::to_string(t.width()) + " " +
                    std::to_string(t.height()) + "\n255\n";
  out.reserve(out.size() + t.size());
  for (float v : t.values()) out.push_back(static_cast<char>(to_byte(v)));
  write_file_bytes(path, out);
}

}  // namespace detail

inline bool is_image_path(const std::filesystem::path& p) {
  const std::string e = detail::lower_ext(p);
  return e == ".png" || e == ".ppm" || e == ".pgm" || e == ".pnm";
}

/// Loads an 8-bit PNG/PPM/PGM (values / 255) or a tensor file (.bst).
inline ImageTensor read_image(const std::filesystem::path& path) {
  const std::string e = detail::lower_ext(path);
  if (e == ".png") return detail::read_png(path);
  if (e == ".ppm" || e == ".pgm" || e == ".pnm") return detail::read_pnm(path);
  if (e == ".bst") return read_tensor(path);
  throw InvalidArgument("unsupported image extension: " + path.string());
}

/// Writes PNG/PPM/PGM (round-to-nearest x255) or a tensor file (.bst).
inline void write_image(const std::filesystem::path& path, const ImageTensor& t) {
  const std::string e = detail::lower_ext(path);
  if (e == ".png") return detail::write_png(path, t);
  if (e == ".ppm" || e == ".pgm" || e == ".pnm") return detail::write_pnm(path, t);
  if (e == ".bst") return write_tensor(path, t);
  throw InvalidArgument("unsupported image extension: " + path.string());
}

}  // namespace blindsr
