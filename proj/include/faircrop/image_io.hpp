#pragma once

// PNG and JPEG decoding/encoding on top of libpng's simplified API and libjpeg.

#include <jpeglib.h>
#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "faircrop/error.hpp"
#include "faircrop/image.hpp"

namespace faircrop {

enum class ImageFormat { Png, Jpeg };

inline constexpr int kDefaultJpegQuality = 92;

/// Format from the leading magic bytes.
inline ImageFormat sniff_format(std::string_view bytes) {
  static constexpr unsigned char kPng[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPng, 8) == 0) return ImageFormat::Png;
  if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
      static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF)
    return ImageFormat::Jpeg;
  throw FormatError("unsupported image format (expected PNG or JPEG)");
}

/// Format implied by a file extension (.png, .jpg, .jpeg; case-insensitive).
inline ImageFormat format_from_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return ImageFormat::Png;
  if (ext == ".jpg" || ext == ".jpeg") return ImageFormat::Jpeg;
  throw InvalidArgument("cannot infer image format from '" + path.string() + "'");
}

namespace detail {

inline ImageBuffer decode_png(std::string_view bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw FormatError(std::string("corrupt PNG: ") + img.message);
  img.format = PNG_FORMAT_RGB;
  if (img.width < 1 || img.height < 1 || img.width > 1u << 15 || img.height > 1u << 15) {
    png_image_free(&img);
    throw FormatError("PNG dimensions out of supported range");
  }
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, data.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("corrupt PNG: " + msg);
  }
  // The simplified reader stops after the image data, so a file cut just
  // before its end chunk would otherwise pass.
  if (bytes.find(std::string_view("IEND\xAE\x42\x60\x82", 8)) == std::string_view::npos)
    throw FormatError("corrupt PNG: missing IEND chunk (truncated file?)");
  return ImageBuffer(static_cast<int>(img.width), static_cast<int>(img.height), std::move(data));
}

inline std::string encode_png(const ImageBuffer& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(img, size, 0, image.data().data(), 0, nullptr))
    throw Error(std::string("PNG encode failed: ") + img.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.data().data(), 0, nullptr))
    throw Error(std::string("PNG encode failed: ") + img.message);
  out.resize(size);
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
  int warnings;
};

inline void on_jpeg_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

inline void on_jpeg_message(j_common_ptr cinfo, int level) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  if (level < 0 && err->warnings++ == 0) (*cinfo->err->format_message)(cinfo, err->message);
}

// Only trivially destructible state lives between setjmp and longjmp; the
// caller owns the output vector.
inline bool decode_jpeg_raw(std::string_view bytes, std::vector<std::uint8_t>& out, int& width,
                            int& height, JpegErrorManager& err) {
  jpeg_decompress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = on_jpeg_error;
  err.base.emit_message = on_jpeg_message;
  err.warnings = 0;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
               static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  if (width < 1 || height < 1 || width > 1 << 15 || height > 1 << 15) {
    std::snprintf(err.message, sizeof err.message, "JPEG dimensions out of supported range");
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  out.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

inline ImageBuffer decode_jpeg(std::string_view bytes) {
  JpegErrorManager err{};
  std::vector<std::uint8_t> data;
  int width = 0, height = 0;
  const bool ok = decode_jpeg_raw(bytes, data, width, height, err);
  // libjpeg pads truncated streams with gray and only warns; treat that as corruption.
  if (!ok || err.warnings > 0) throw FormatError(std::string("corrupt JPEG: ") + err.message);
  return ImageBuffer(width, height, std::move(data));
}

inline bool encode_jpeg_raw(const ImageBuffer& image, int quality, unsigned char*& buffer,
                            unsigned long& size, JpegErrorManager& err) {
  jpeg_compress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width());
  cinfo.image_height = static_cast<JDIMENSION>(image.height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const auto data = image.data();
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<std::uint8_t*>(data.data()) +
                   static_cast<std::size_t>(cinfo.next_scanline) * image.width() * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

inline std::string encode_jpeg(const ImageBuffer& image, int quality) {
  JpegErrorManager err{};
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  const bool ok = encode_jpeg_raw(image, quality, buffer, size, err);
  std::string out;
  if (ok) out.assign(reinterpret_cast<const char*>(buffer), size);
  std::free(buffer);
  if (!ok) throw Error(std::string("JPEG encode failed: ") + err.message);
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

/// Decode PNG or JPEG bytes; the format is detected from the content.
inline ImageBuffer decode_image_bytes(std::string_view bytes) {
  return sniff_format(bytes) == ImageFormat::Png ? detail::decode_png(bytes)
                                                 : detail::decode_jpeg(bytes);
}

inline ImageBuffer decode_image(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  try {
    return decode_image_bytes(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::string encode_image_bytes(const ImageBuffer& image, ImageFormat format,
                                      int jpeg_quality = kDefaultJpegQuality) {
  return format == ImageFormat::Png ? detail::encode_png(image)
                                    : detail::encode_jpeg(image, jpeg_quality);
}

/// Write atomically: encode, write a sibling temp file, then rename over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline void encode_image(const ImageBuffer& image, const std::filesystem::path& path,
                         ImageFormat format, int jpeg_quality = kDefaultJpegQuality) {
  write_file_atomic(path, encode_image_bytes(image, format, jpeg_quality));
}

inline void encode_image(const ImageBuffer& image, const std::filesystem::path& path) {
  encode_image(image, path, format_from_extension(path));
}

}  // namespace faircrop
