#include <cmath>
#include <vector>

#include "edgecap/image.hpp"

namespace edgecap {

namespace {

// Dot-product rounding leaves O(1e-16) residues on flat regions; dividing by a
// residue-scale max would blow them up to full-scale edges. Real responses on
// byte-quantized inputs are >= 1e-3, so anything below this floor is flat.
constexpr double kResponseFloor = 1e-12;

EdgeMap normalized_map(const Image& response) {
  EdgeMap map = EdgeMap::zeros(response.width, response.height);
  const double max = response.data.maxCoeff();
  if (max > kResponseFloor) {
    map.data = response.data / max;
  }
  return map;
}

}  // namespace

EdgeMap sobel_edges(const Image& img) {
  const Image gray = to_grayscale(img);
  const Image gx = convolve2d(gray, Kernel::sobel_gx());
  const Image gy = convolve2d(gray, Kernel::sobel_gy());
  Image mag = Image::zeros(img.width, img.height, 1);
  mag.data = (gx.data.array().square() + gy.data.array().square()).sqrt();
  return normalized_map(mag);
}

EdgeMap laplacian_edges(const Image& img) {
  const Image gray = to_grayscale(img);
  Image resp = convolve2d(gray, Kernel::laplacian4());
  resp.data = resp.data.array().abs();
  return normalized_map(resp);
}

EdgeMap canny_edges(const Image& img, double low_frac, double high_frac) {
  if (!(low_frac > 0.0 && low_frac < high_frac && high_frac <= 1.0)) {
    throw ParameterError("canny_edges: need 0 < low_frac < high_frac <= 1");
  }
  const int w = img.width;
  const int h = img.height;
  const Image blurred = gaussian_blur(to_grayscale(img), 1.4);
  const Image gx = convolve2d(blurred, Kernel::sobel_gx());
  const Image gy = convolve2d(blurred, Kernel::sobel_gy());

  Eigen::VectorXd mag = (gx.data.array().square() + gy.data.array().square()).sqrt();
  const double max_mag = mag.maxCoeff();
  if (max_mag <= kResponseFloor) {
    return EdgeMap::zeros(w, h);
  }

  // Non-maximum suppression along the quantized gradient direction. A pixel
  // survives if it is >= its backward neighbor and strictly > its forward
  // neighbor, so a symmetric two-pixel ridge keeps exactly one pixel.
  auto mag_at = [&](int y, int x) {
    if (y < 0) y = 0;
    if (y >= h) y = h - 1;
    if (x < 0) x = 0;
    if (x >= w) x = w - 1;
    return mag[static_cast<long>(y) * w + x];
  };
  Eigen::VectorXd thinned = Eigen::VectorXd::Zero(mag.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const long idx = static_cast<long>(y) * w + x;
      const double m = mag[idx];
      if (m <= 0.0) continue;
      const double dx = gx.data[idx];
      const double dy = gy.data[idx];
      double angle = std::atan2(dy, dx);  // (-pi, pi]
      if (angle < 0.0) angle += M_PI;     // fold to [0, pi)
      const int bin = static_cast<int>(std::floor((angle + M_PI / 8.0) / (M_PI / 4.0))) % 4;
      static const int kDir[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};  // (dx, dy)
      const int fx = kDir[bin][0];
      const int fy = kDir[bin][1];
      const double backward = mag_at(y - fy, x - fx);
      const double forward = mag_at(y + fy, x + fx);
      if (m >= backward && m > forward) {
        thinned[idx] = m;
      }
    }
  }

  // Hysteresis: strong pixels seed, weak pixels join via 8-connectivity.
  const double low = low_frac * max_mag;
  const double high = high_frac * max_mag;
  EdgeMap out = EdgeMap::zeros(w, h);
  std::vector<long> stack;
  for (long i = 0; i < thinned.size(); ++i) {
    if (thinned[i] >= high) {
      out.data[i] = 1.0;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const long idx = stack.back();
    stack.pop_back();
    const int y = static_cast<int>(idx / w);
    const int x = static_cast<int>(idx % w);
    for (int ny = y - 1; ny <= y + 1; ++ny) {
      for (int nx = x - 1; nx <= x + 1; ++nx) {
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const long nidx = static_cast<long>(ny) * w + nx;
        if (out.data[nidx] == 0.0 && thinned[nidx] >= low) {
          out.data[nidx] = 1.0;
          stack.push_back(nidx);
        }
      }
    }
  }
  return out;
}

Image edge_aware_image(const Image& img, EdgeDetector detector, const EdgeParams& params) {
  EdgeMap map;
  switch (detector) {
    case EdgeDetector::canny:
      map = canny_edges(to_grayscale(img), params.canny_low_frac, params.canny_high_frac);
      break;
    case EdgeDetector::sobel:
      map = sobel_edges(to_grayscale(img));
      break;
    case EdgeDetector::laplacian:
      map = laplacian_edges(to_grayscale(img));
      break;
    case EdgeDetector::none:
      throw ParameterError("edge_aware_image: detector must not be 'none'");
  }
  Image out = Image::zeros(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = map.at(y, x);
      out.at(y, x, 0) = v;
      out.at(y, x, 1) = v;
      out.at(y, x, 2) = v;
    }
  }
  return out;
}

}  // namespace edgecap
