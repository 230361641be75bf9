#include "edgecap/image.hpp"

#include <algorithm>
#include <cmath>

namespace edgecap {

Image Image::zeros(int width, int height, int channels) {
  return constant(width, height, channels, 0.0);
}

Image Image::constant(int width, int height, int channels, double value) {
  if (width < 1 || height < 1 || (channels != 1 && channels != 3)) {
    throw ParameterError("image dims must be positive with 1 or 3 channels");
  }
  Image img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.data = Eigen::VectorXd::Constant(static_cast<long>(width) * height * channels, value);
  return img;
}

EdgeMap EdgeMap::zeros(int width, int height) {
  EdgeMap map;
  map.width = width;
  map.height = height;
  map.data = Eigen::VectorXd::Zero(static_cast<long>(width) * height);
  return map;
}

Kernel Kernel::from(const Eigen::MatrixXd& weights) {
  if (weights.rows() != weights.cols() || weights.rows() % 2 == 0 || weights.rows() < 1) {
    throw ParameterError("kernel must be square with odd size");
  }
  return Kernel{static_cast<int>(weights.rows()), weights};
}

Kernel Kernel::identity3() {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
  w(1, 1) = 1.0;
  return from(w);
}

Kernel Kernel::sobel_gx() {
  Eigen::MatrixXd w(3, 3);
  w << -1, 0, 1, -2, 0, 2, -1, 0, 1;
  return from(w);
}

Kernel Kernel::sobel_gy() {
  Eigen::MatrixXd w(3, 3);
  w << -1, -2, -1, 0, 0, 0, 1, 2, 1;
  return from(w);
}

Kernel Kernel::laplacian4() {
  Eigen::MatrixXd w(3, 3);
  w << 0, 1, 0, 1, -4, 1, 0, 1, 0;
  return from(w);
}

EdgeDetector edge_detector_from_string(const std::string& name) {
  if (name == "none" || name == "original") return EdgeDetector::none;
  if (name == "canny") return EdgeDetector::canny;
  if (name == "sobel") return EdgeDetector::sobel;
  if (name == "laplacian") return EdgeDetector::laplacian;
  throw ParameterError("unknown edge detector: " + name);
}

std::string to_string(EdgeDetector d) {
  switch (d) {
    case EdgeDetector::none: return "none";
    case EdgeDetector::canny: return "canny";
    case EdgeDetector::sobel: return "sobel";
    case EdgeDetector::laplacian: return "laplacian";
  }
  return "none";
}

Image to_grayscale(const Image& img) {
  if (img.channels == 1) return img;
  Image out = Image::zeros(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      out.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
    }
  }
  return out;
}

namespace {

inline int clamp_index(int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); }

}  // namespace

Image convolve2d(const Image& img, const Kernel& kernel) {
  if (img.channels != 1) {
    throw ShapeError("convolve2d expects a 1-channel image");
  }
  const int r = kernel.size / 2;
  Image out = Image::zeros(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int ky = -r; ky <= r; ++ky) {
        const int sy = clamp_index(y + ky, img.height - 1);
        for (int kx = -r; kx <= r; ++kx) {
          const int sx = clamp_index(x + kx, img.width - 1);
          acc += kernel.weights(ky + r, kx + r) * img.at(sy, sx);
        }
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) {
    throw ParameterError("gaussian_blur: sigma must be > 0");
  }
  if (img.channels != 1) {
    throw ShapeError("gaussian_blur expects a 1-channel image");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::VectorXd w(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    w[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  }
  w /= w.sum();

  // horizontal then vertical pass, replicate padding
  Image tmp = Image::zeros(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += w[k + radius] * img.at(y, clamp_index(x + k, img.width - 1));
      }
      tmp.at(y, x) = acc;
    }
  }
  Image out = Image::zeros(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += w[k + radius] * tmp.at(clamp_index(y + k, img.height - 1), x);
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

Image resize_bilinear(const Image& img, int width, int height) {
  if (width < 1 || height < 1) {
    throw ParameterError("resize_bilinear: target dims must be >= 1");
  }
  if (width == img.width && height == img.height) return img;
  Image out = Image::zeros(width, height, img.channels);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const double ty = fy - y0;
    const int ya = clamp_index(y0, img.height - 1);
    const int yb = clamp_index(y0 + 1, img.height - 1);
    for (int x = 0; x < width; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const double tx = fx - x0;
      const int xa = clamp_index(x0, img.width - 1);
      const int xb = clamp_index(x0 + 1, img.width - 1);
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1.0 - tx) * img.at(ya, xa, c) + tx * img.at(ya, xb, c);
        const double bot = (1.0 - tx) * img.at(yb, xa, c) + tx * img.at(yb, xb, c);
        out.at(y, x, c) = (1.0 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

Image edge_map_image(const EdgeMap& map) {
  Image img;
  img.width = map.width;
  img.height = map.height;
  img.channels = 1;
  img.data = map.data;
  return img;
}

}  // namespace edgecap
