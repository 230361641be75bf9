#pragma once

#include <Eigen/Core>
#include <string>

#include "edgecap/errors.hpp"

namespace edgecap {

// Raster image, samples in [0, 1], row-major with interleaved channels:
// data[(y * width + x) * channels + c].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  Eigen::VectorXd data;

  static Image zeros(int width, int height, int channels);
  static Image constant(int width, int height, int channels, double value);

  double& at(int y, int x, int c = 0) {
    return data[(static_cast<long>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<long>(y) * width + x) * channels + c];
  }

  long sample_count() const { return static_cast<long>(width) * height * channels; }
};

// Per-pixel edge responses in [0, 1]; Canny maps are binary {0, 1}.
struct EdgeMap {
  int width = 0;
  int height = 0;
  Eigen::VectorXd data;  // row-major

  static EdgeMap zeros(int width, int height);

  double& at(int y, int x) { return data[static_cast<long>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<long>(y) * width + x]; }
};

// Square odd-sized convolution kernel.
struct Kernel {
  int size = 1;
  Eigen::MatrixXd weights;  // size x size

  static Kernel from(const Eigen::MatrixXd& weights);

  static Kernel identity3();
  static Kernel sobel_gx();
  static Kernel sobel_gy();
  static Kernel laplacian4();
};

enum class EdgeDetector { none, canny, sobel, laplacian };

EdgeDetector edge_detector_from_string(const std::string& name);
std::string to_string(EdgeDetector d);

// Parameters for the detectors that take any; only Canny does.
struct EdgeParams {
  double canny_low_frac = 0.1;
  double canny_high_frac = 0.3;
};

// BT.601 luma (0.299 R + 0.587 G + 0.114 B); 1-channel input passes through.
Image to_grayscale(const Image& img);

// Cross-correlation with replicate border padding. Output is not clamped.
Image convolve2d(const Image& img, const Kernel& kernel);

// Separable Gaussian, kernel radius ceil(3*sigma), weights normalized.
Image gaussian_blur(const Image& img, double sigma);

// Gradient magnitude from the 3x3 Sobel pair, normalized by the image max
// (all-zero map when the max is zero).
EdgeMap sobel_edges(const Image& img);

// Absolute response of the 4-neighbor Laplacian, normalized by the image max.
EdgeMap laplacian_edges(const Image& img);

// Blur (sigma 1.4) -> Sobel gradients -> 4-bin non-maximum suppression ->
// hysteresis at low_frac/high_frac of the max magnitude. Binary output.
EdgeMap canny_edges(const Image& img, double low_frac = 0.1, double high_frac = 0.3);

// Grayscale -> detector -> edge map replicated to 3 channels. The companion
// stream carries structural signal only; the original image stays separate.
Image edge_aware_image(const Image& img, EdgeDetector detector, const EdgeParams& params = {});

// Bilinear resampling with half-pixel centers.
Image resize_bilinear(const Image& img, int width, int height);

// Grayscale image from an edge map (for P5 export) and back.
Image edge_map_image(const EdgeMap& map);

}  // namespace edgecap
