#include "comir/image_io.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace comir {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

struct TiffCloser {
  void operator()(TIFF* t) const { TIFFClose(t); }
};

void silence_tiff_warnings() {
  static const bool once = [] {
    TIFFSetWarningHandler(nullptr);
    return true;
  }();
  (void)once;
}

Image read_tiff(const std::filesystem::path& path) {
  silence_tiff_warnings();
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) throw ImageError("cannot open TIFF '" + path.string() + "'");
  uint32_t width = 0;
  uint32_t height = 0;
  uint16_t spp = 1;
  uint16_t bps = 8;
  uint16_t format = SAMPLEFORMAT_UINT;
  uint16_t planar = PLANARCONFIG_CONTIG;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &format);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
  if (width == 0 || height == 0) throw ImageError("TIFF '" + path.string() + "' has no pixels");

  const bool is_float = format == SAMPLEFORMAT_IEEEFP && bps == 32;
  const bool is_uint = format == SAMPLEFORMAT_UINT && (bps == 8 || bps == 16);
  if (!is_float && !is_uint) {
    throw ImageError("TIFF '" + path.string() + "': unsupported sample layout (" + std::to_string(bps) +
                     " bits, format " + std::to_string(format) + ")");
  }
  if (TIFFIsTiled(tif.get())) throw ImageError("TIFF '" + path.string() + "': tiled files are not supported");

  Image img(spp, int(height), int(width));
  const tmsize_t line_bytes = TIFFScanlineSize(tif.get());
  std::vector<unsigned char> line(static_cast<std::size_t>(line_bytes));
  const double scale = is_float ? 1.0 : 1.0 / ((1u << bps) - 1u);

  auto decode = [&](const unsigned char* data, int index) -> float {
    if (is_float) {
      float v = 0;
      std::memcpy(&v, data + 4 * index, 4);
      return v;
    }
    if (bps == 8) return static_cast<float>(data[index] * scale);
    uint16_t v = 0;
    std::memcpy(&v, data + 2 * index, 2);
    return static_cast<float>(v * scale);
  };

  if (planar == PLANARCONFIG_CONTIG) {
    for (uint32_t y = 0; y < height; ++y) {
      if (TIFFReadScanline(tif.get(), line.data(), y, 0) < 0) {
        throw ImageError("TIFF '" + path.string() + "': read error at row " + std::to_string(y));
      }
      for (uint32_t x = 0; x < width; ++x) {
        for (int c = 0; c < spp; ++c) img.at(c, int(y), int(x)) = decode(line.data(), int(x * spp + c));
      }
    }
  } else {
    for (int c = 0; c < spp; ++c) {
      for (uint32_t y = 0; y < height; ++y) {
        if (TIFFReadScanline(tif.get(), line.data(), y, uint16_t(c)) < 0) {
          throw ImageError("TIFF '" + path.string() + "': read error at row " + std::to_string(y));
        }
        for (uint32_t x = 0; x < width; ++x) img.at(c, int(y), int(x)) = decode(line.data(), int(x));
      }
    }
  }
  if (!img.all_finite()) throw ImageError("TIFF '" + path.string() + "' contains non-finite values");
  return img;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

Image read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ImageError("cannot open PNG '" + path.string() + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("PNG '" + path.string() + "' is unreadable");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(channels, int(height), int(width));
  const double scale = 1.0 / ((1u << depth) - 1u);
  for (png_uint_32 y = 0; y < height; ++y) {
    const unsigned char* row = rows[y];
    for (png_uint_32 x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = std::size_t(x) * channels + c;
        double v = 0;
        if (depth == 16) {
          uint16_t s = 0;
          std::memcpy(&s, row + 2 * i, 2);
          v = s;
        } else {
          v = row[i];
        }
        img.at(c, int(y), int(x)) = static_cast<float>(v * scale);
      }
    }
  }
  return img;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ImageError("image '" + path.string() + "' does not exist");
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".tif" || ext == ".tiff") return read_tiff(path);
  throw ImageError("unsupported image extension '" + ext + "' for '" + path.string() + "'");
}

void write_tiff(const std::filesystem::path& path, const Image& img, SampleFormat format) {
  silence_tiff_warnings();
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) throw ImageError("cannot create TIFF '" + path.string() + "'");
  const int spp = img.channels();
  const int bps = format == SampleFormat::uint8 ? 8 : (format == SampleFormat::uint16 ? 16 : 32);
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, uint32_t(img.width()));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, uint32_t(img.height()));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, uint16_t(spp));
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, uint16_t(bps));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT,
               uint16_t(format == SampleFormat::float32 ? SAMPLEFORMAT_IEEEFP : SAMPLEFORMAT_UINT));
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, uint16_t(PLANARCONFIG_CONTIG));
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC,
               uint16_t(spp >= 3 ? PHOTOMETRIC_RGB : PHOTOMETRIC_MINISBLACK));
  if (spp == 2 || spp > 3) {
    std::vector<uint16_t> extra(std::size_t(spp >= 3 ? spp - 3 : spp - 1), EXTRASAMPLE_UNSPECIFIED);
    TIFFSetField(tif.get(), TIFFTAG_EXTRASAMPLES, uint16_t(extra.size()), extra.data());
  }
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, uint32_t(1));
  const std::size_t bytes = std::size_t(bps / 8);
  std::vector<unsigned char> line(std::size_t(img.width()) * spp * bytes);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < spp; ++c) {
        const std::size_t i = (std::size_t(x) * spp + c) * bytes;
        const float v = img.at(c, y, x);
        if (format == SampleFormat::float32) {
          std::memcpy(line.data() + i, &v, 4);
        } else if (format == SampleFormat::uint8) {
          line[i] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        } else {
          const auto s = static_cast<uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f));
          std::memcpy(line.data() + i, &s, 2);
        }
      }
    }
    if (TIFFWriteScanline(tif.get(), line.data(), uint32_t(y), 0) < 0) {
      throw ImageError("TIFF '" + path.string() + "': write error");
    }
  }
}

void write_png(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ImageError("PNG bit depth must be 8 or 16");
  const int channels = img.channels();
  int color = 0;
  switch (channels) {
    case 1: color = PNG_COLOR_TYPE_GRAY; break;
    case 2: color = PNG_COLOR_TYPE_GRAY_ALPHA; break;
    case 3: color = PNG_COLOR_TYPE_RGB; break;
    case 4: color = PNG_COLOR_TYPE_RGB_ALPHA; break;
    default: throw ImageError("PNG supports 1-4 channels, got " + std::to_string(channels));
  }
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ImageError("cannot create PNG '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("PNG '" + path.string() + "': write error");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(img.width()), png_uint_32(img.height()), bit_depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  const std::size_t bytes = std::size_t(bit_depth / 8);
  std::vector<unsigned char> row(std::size_t(img.width()) * channels * bytes);
  const float full = bit_depth == 16 ? 65535.0f : 255.0f;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        const long q = std::lround(std::clamp(img.at(c, y, x), 0.0f, 1.0f) * full);
        const std::size_t i = (std::size_t(x) * channels + c) * bytes;
        if (bit_depth == 16) {
          const auto s = static_cast<uint16_t>(q);
          std::memcpy(row.data() + i, &s, 2);
        } else {
          row[i] = static_cast<unsigned char>(q);
        }
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return write_png(path, img);
  if (ext == ".tif" || ext == ".tiff") return write_tiff(path, img);
  throw ImageError("unsupported image extension '" + ext + "'");
}

}  // namespace comir
