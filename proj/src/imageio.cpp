#include "knitwork/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>

#include "knitwork/errors.hpp"
#include "knitwork/random.hpp"

namespace knitwork {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Record libpng's message instead of printing it, then unwind to setjmp.
void on_png_error(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}
void on_png_warning(png_structp, png_const_charp) {}

}  // namespace

std::uint8_t quantize_8bit(double v) {
  const double c = std::clamp(v, 0.0, 1.0) * 255.0;
  // nearbyint follows the default rounding mode: round half to even.
  return static_cast<std::uint8_t>(std::nearbyint(c));
}

ImageGrid load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image '" + path + "'");
  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw IoError("'" + path + "' is not a PNG file");
  }
  std::string png_message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &png_message, on_png_error, on_png_warning);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed");
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt or truncated PNG '" + path + "': " + png_message);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    std::cerr << "warning: '" << path << "' has 16-bit samples; rescaling to 8 bits\n";
    png_set_strip_16(png);
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) throw IoError("unsupported channel layout in '" + path + "'");
  ImageGrid img(height, width, channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const std::size_t y = i / (static_cast<std::size_t>(width) * channels);
    const std::size_t rest = i % (static_cast<std::size_t>(width) * channels);
    img.data[i] = static_cast<double>(pixels[y * rowbytes + rest]) / 255.0;
  }
  return img;
}

void save_png(const ImageGrid& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3) throw ContractError("save_png: 1 or 3 channels required");
  if (img.data.size() != img.height * img.width * img.channels || img.height == 0 || img.width == 0) {
    throw DimensionError("save_png: invalid image dimensions");
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write image '" + path + "'");
  std::string png_message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &png_message, on_png_error, on_png_warning);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  std::vector<png_byte> pixels(img.data.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize_8bit(img.data[i]);
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = pixels.data() + y * img.width * img.channels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG '" + path + "': " + png_message);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageGrid load_mask_png(const std::string& path) {
  const ImageGrid raw = load_png(path);
  ImageGrid mask(raw.height, raw.width, 1);
  for (std::size_t r = 0; r < raw.height; ++r) {
    for (std::size_t c = 0; c < raw.width; ++c) {
      bool known = false;
      for (std::size_t ch = 0; ch < raw.channels; ++ch) known = known || raw.at(r, c, ch) != 0.0;
      mask.at(r, c, 0) = known ? 1.0 : 0.0;
    }
  }
  return mask;
}

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "delta") return KernelKind::kDelta;
  if (name == "round-gauss") return KernelKind::kRoundGaussian;
  if (name == "diag-gauss") return KernelKind::kDiagonalGaussian;
  throw ConfigError("unknown kernel '" + name + "' (expected delta, round-gauss or diag-gauss)");
}

std::string kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::kDelta: return "delta";
    case KernelKind::kRoundGaussian: return "round-gauss";
    case KernelKind::kDiagonalGaussian: return "diag-gauss";
  }
  return "unknown";
}

Tensor make_downsampling_kernel(KernelKind kind, std::size_t factor) {
  if (factor == 0) throw ConfigError("downsampling factor must be positive");
  if (kind == KernelKind::kDelta) return Tensor(Shape{1, 1}, 1.0);
  const double f = static_cast<double>(factor);
  double s_major = f / 2.0, s_minor = f / 2.0;
  if (kind == KernelKind::kDiagonalGaussian) {
    s_major = f;
    s_minor = f / 4.0;
  }
  const long radius = static_cast<long>(std::ceil(3.0 * s_major));
  const std::size_t size = static_cast<std::size_t>(2 * radius + 1);
  Tensor k(Shape{size, size});
  auto d = k.data();
  double total = 0.0;
  const double inv = 1.0 / std::sqrt(2.0);
  for (long y = -radius; y <= radius; ++y) {
    for (long x = -radius; x <= radius; ++x) {
      // Coordinates along (1, 1) and (1, -1) in (row, col) space.
      const double u = (static_cast<double>(y) + static_cast<double>(x)) * inv;
      const double v = (static_cast<double>(y) - static_cast<double>(x)) * inv;
      const double val = std::exp(-0.5 * (u * u / (s_major * s_major) + v * v / (s_minor * s_minor)));
      d[static_cast<std::size_t>((y + radius) * static_cast<long>(size) + x + radius)] = val;
      total += val;
    }
  }
  for (double& v : d) v /= total;
  return k;
}

ImageGrid degrade_downsample(const ImageGrid& img, const Tensor& kernel, std::size_t factor) {
  if (kernel.rank() != 2 || kernel.dim(0) > img.height || kernel.dim(1) > img.width) {
    throw ContractError("degrade_downsample: kernel " + shape_string(kernel.shape()) +
                        " larger than the image");
  }
  if (factor == 0 || img.height % factor != 0 || img.width % factor != 0) {
    throw ContractError("degrade_downsample: image size not divisible by factor");
  }
  NoGradGuard guard;
  ImageGrid out = ImageGrid::from_tensor(conv_subsample(img.to_tensor(), kernel, factor));
  clamp_unit(out);
  return out;
}

ImageGrid degrade_add_noise(const ImageGrid& img, double sigma_8bit, std::uint64_t seed) {
  if (!(sigma_8bit >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  ImageGrid out = img;
  if (sigma_8bit == 0.0) return out;
  Rng rng(seed);
  const double s = sigma_8bit / 255.0;
  for (double& v : out.data) v = std::clamp(v + s * rng.normal(), 0.0, 1.0);
  return out;
}

ImageGrid hole_mask(std::size_t height, std::size_t width, const Rect& hole) {
  if (hole.row + hole.height > height || hole.col + hole.width > width) {
    throw ContractError("hole rectangle extends outside the image");
  }
  ImageGrid mask(height, width, 1, 1.0);
  for (std::size_t r = hole.row; r < hole.row + hole.height; ++r) {
    for (std::size_t c = hole.col; c < hole.col + hole.width; ++c) mask.at(r, c, 0) = 0.0;
  }
  return mask;
}

HoleResult degrade_cut_hole(const ImageGrid& img, const Rect& hole) {
  HoleResult out{img, hole_mask(img.height, img.width, hole)};
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      if (out.known_mask.at(r, c, 0) == 0.0) {
        for (std::size_t ch = 0; ch < img.channels; ++ch) out.image.at(r, c, ch) = 0.0;
      }
    }
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

}  // namespace knitwork
