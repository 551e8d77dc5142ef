#pragma once

#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "safelabel/errors.hpp"
#include "safelabel/semantics.hpp"

namespace safelabel::image_io {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

namespace detail {

inline bool has_extension(const std::string& path, const char* ext) {
  auto e = std::filesystem::path(path).extension().string();
  for (auto& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return e == ext;
}

struct PngReader {
  png_image image;
  PngReader() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngReader() { png_image_free(&image); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;
};

inline std::vector<std::uint8_t> read_png(const std::string& path, std::uint32_t format,
                                          std::size_t& width, std::size_t& height,
                                          bool* source_is_color = nullptr) {
  PngReader r;
  if (!png_image_begin_read_from_file(&r.image, path.c_str())) {
    throw IoError("cannot read PNG " + path + ": " + r.image.message);
  }
  if (source_is_color) *source_is_color = (r.image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  r.image.format = format;
  width = r.image.width;
  height = r.image.height;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(r.image));
  if (!png_image_finish_read(&r.image, nullptr, buffer.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG " + path + ": " + r.image.message);
  }
  return buffer;
}

inline void write_png(const std::string& path, std::uint32_t format, std::size_t width,
                      std::size_t height, const std::uint8_t* data) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write PNG " + path + ": " + msg);
  }
  png_image_free(&image);
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError(path + ": only binary P5 PGM is supported");
  auto next_int = [&]() {
    int v = 0;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
        continue;
      }
      if (!(in >> v)) throw IoError(path + ": malformed PGM header");
      return v;
    }
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw IoError(path + ": unsupported PGM");
  in.get();
  GrayImage img{static_cast<std::size_t>(w), static_cast<std::size_t>(h), {}};
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw IoError(path + ": truncated PGM");
  }
  return img;
}

}  // namespace detail

// 8-bit single-channel raster from PNG or binary PGM.
inline GrayImage read_gray(const std::string& path) {
  if (detail::has_extension(path, ".pgm")) return detail::read_pgm(path);
  GrayImage img;
  bool color = false;
  img.pixels = detail::read_png(path, PNG_FORMAT_GRAY, img.width, img.height, &color);
  if (color) throw IoError(path + ": expected a single-channel class-index image");
  return img;
}

inline void write_gray(const std::string& path, const GrayImage& img) {
  if (detail::has_extension(path, ".pgm")) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    return;
  }
  detail::write_png(path, PNG_FORMAT_GRAY, img.width, img.height, img.pixels.data());
}

inline semantics::RgbImage read_rgb(const std::string& path) {
  semantics::RgbImage img;
  auto bytes = detail::read_png(path, PNG_FORMAT_RGB, img.width, img.height);
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = (std::uint32_t{bytes[3 * i]} << 16) | (std::uint32_t{bytes[3 * i + 1]} << 8) |
                    std::uint32_t{bytes[3 * i + 2]};
  }
  return img;
}

inline void write_rgb(const std::string& path, const semantics::RgbImage& img) {
  std::vector<std::uint8_t> bytes(img.pixels.size() * 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    bytes[3 * i] = static_cast<std::uint8_t>((img.pixels[i] >> 16) & 0xFF);
    bytes[3 * i + 1] = static_cast<std::uint8_t>((img.pixels[i] >> 8) & 0xFF);
    bytes[3 * i + 2] = static_cast<std::uint8_t>(img.pixels[i] & 0xFF);
  }
  detail::write_png(path, PNG_FORMAT_RGB, img.width, img.height, bytes.data());
}

inline semantics::SemanticMap read_class_map(const std::string& path) {
  auto img = read_gray(path);
  return semantics::SemanticMap::from_indices(img.width, img.height, img.pixels);
}

inline void write_class_map(const std::string& path, const semantics::SemanticMap& map) {
  write_gray(path, GrayImage{map.width(), map.height(), map.to_indices()});
}

inline semantics::SemanticMap read_palette_map(const std::string& path,
                                               const semantics::Palette& palette) {
  return semantics::decode_palette_image(read_rgb(path), palette);
}

}  // namespace safelabel::image_io
