#include "beamsplit/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "beamsplit/errors.hpp"

namespace beamsplit {

void write_pfm(const std::string& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw invalid_parameter_error("write_pfm: 1 or 3 channels required");
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open for write: " + path);
  f << (image.channels() == 3 ? "PF" : "Pf") << "\n";
  f << image.width() << " " << image.height() << "\n";
  f << "-1.0\n";  // negative scale: little-endian
  std::vector<float> row(static_cast<std::size_t>(image.width()) *
                         image.channels());
  for (int y = image.height() - 1; y >= 0; --y) {
    std::size_t i = 0;
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        row[i++] = static_cast<float>(image.at(x, y, c));
      }
    }
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!f) throw data_error("write failed: " + path);
}

Image read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "PF" && magic != "Pf") {
    throw data_error("not a PFM file: " + path);
  }
  int w = 0, h = 0;
  double scale = 0.0;
  f >> w >> h >> scale;
  if (!f || w <= 0 || h <= 0 || scale == 0.0) {
    throw data_error("malformed PFM header: " + path);
  }
  f.get();  // single whitespace after the scale
  const int ch = magic == "PF" ? 3 : 1;
  const bool little_endian = scale < 0.0;
  Image image(w, h, ch);
  std::vector<float> row(static_cast<std::size_t>(w) * ch);
  for (int y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!f) throw data_error("truncated PFM data: " + path);
    if (!little_endian) {
      for (float& v : row) {
        char* b = reinterpret_cast<char*>(&v);
        std::swap(b[0], b[3]);
        std::swap(b[1], b[2]);
      }
    }
    std::size_t i = 0;
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) image.at(x, y, c) = row[i++];
    }
  }
  return image;
}

void write_png_preview(const std::string& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw invalid_parameter_error("write_png_preview: 1 or 3 channels");
  }
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw data_error("cannot open for write: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw data_error("png write failed: " + path);
  }
  png_init_io(png, fp);
  const int color_type =
      image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, image.width(), image.height(), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(image.width()) *
                            image.channels());
  for (int y = 0; y < image.height(); ++y) {
    std::size_t i = 0;
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        const double v =
            std::pow(std::clamp(image.at(x, y, c), 0.0, 1.0), 1.0 / 2.2);
        row[i++] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace beamsplit
