#include "edgecap/conv_encoder.hpp"

#include <cmath>

namespace edgecap {

namespace {

constexpr int kKernel = 3;
constexpr int kStride = 2;
constexpr int kPad = 1;

int conv_out_size(int in_size) { return (in_size + 2 * kPad - kKernel) / kStride + 1; }

// Gather 3x3 zero-padded patches into columns: patches(ic*9 + ky*3 + kx, oy*out+ox).
void im2col(const Mat& input, int size, Mat& patches) {
  const int out = conv_out_size(size);
  const long in_c = input.rows();
  patches.setZero();
  for (int oy = 0; oy < out; ++oy) {
    for (int ox = 0; ox < out; ++ox) {
      const long col = static_cast<long>(oy) * out + ox;
      for (int ky = 0; ky < kKernel; ++ky) {
        const int sy = oy * kStride + ky - kPad;
        if (sy < 0 || sy >= size) continue;
        for (int kx = 0; kx < kKernel; ++kx) {
          const int sx = ox * kStride + kx - kPad;
          if (sx < 0 || sx >= size) continue;
          const long pix = static_cast<long>(sy) * size + sx;
          for (long ic = 0; ic < in_c; ++ic) {
            patches(ic * 9 + ky * 3 + kx, col) = input(ic, pix);
          }
        }
      }
    }
  }
}

// Scatter-add the patch gradients back onto the input plane.
void col2im(const Mat& dpatches, int size, Mat& dinput) {
  const int out = conv_out_size(size);
  const long in_c = dinput.rows();
  for (int oy = 0; oy < out; ++oy) {
    for (int ox = 0; ox < out; ++ox) {
      const long col = static_cast<long>(oy) * out + ox;
      for (int ky = 0; ky < kKernel; ++ky) {
        const int sy = oy * kStride + ky - kPad;
        if (sy < 0 || sy >= size) continue;
        for (int kx = 0; kx < kKernel; ++kx) {
          const int sx = ox * kStride + kx - kPad;
          if (sx < 0 || sx >= size) continue;
          const long pix = static_cast<long>(sy) * size + sx;
          for (long ic = 0; ic < in_c; ++ic) {
            dinput(ic, pix) += dpatches(ic * 9 + ky * 3 + kx, col);
          }
        }
      }
    }
  }
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

ConvLayerParams ConvLayerParams::zeros(int in_channels, int out_channels) {
  ConvLayerParams p;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  p.weight = Mat::Zero(out_channels, static_cast<long>(in_channels) * 9);
  p.bias = Vec::Zero(out_channels);
  return p;
}

void ConvLayerParams::init(Rng& rng) {
  const long fan_in = static_cast<long>(in_channels) * 9;
  init_uniform(weight, fan_in, rng);
  init_uniform(bias, fan_in, rng);
}

void ConvLayerParams::collect(const std::string& prefix, std::vector<ParamView>& out) {
  out.push_back(view_of(prefix + ".weight", weight));
  out.push_back(view_of(prefix + ".bias", bias));
}

ConvEncoderParams ConvEncoderParams::build(int input_size, const std::vector<int>& channels,
                                           int feature_dim) {
  if (input_size < 1 || channels.empty() || feature_dim < 1) {
    throw ConfigError("conv encoder: invalid dimensions");
  }
  ConvEncoderParams p;
  p.input_size = input_size;
  int in_c = 3;
  int size = input_size;
  for (int out_c : channels) {
    if (out_c < 1) throw ConfigError("conv encoder: channel counts must be positive");
    p.blocks.push_back(ConvLayerParams::zeros(in_c, out_c));
    in_c = out_c;
    size = conv_out_size(size);
    if (size < 1) throw ConfigError("conv encoder: input size too small for block depth");
  }
  p.head = LinearParams::zeros(in_c, feature_dim);
  return p;
}

void ConvEncoderParams::init(Rng& rng) {
  for (auto& block : blocks) block.init(rng);
  head.init(rng);
}

void ConvEncoderParams::collect(const std::string& prefix, std::vector<ParamView>& out) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(prefix + ".conv" + std::to_string(i), out);
  }
  head.collect(prefix + ".head", out);
}

Mat image_planes(const Image& img) {
  if (img.channels != 3) {
    throw ShapeError("image_planes: encoder input must have 3 channels");
  }
  Mat planes(3, static_cast<long>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const long pix = static_cast<long>(y) * img.width + x;
      for (int c = 0; c < 3; ++c) {
        planes(c, pix) = img.at(y, x, c);
      }
    }
  }
  return planes;
}

Vec conv_encode(const ConvEncoderParams& p, const Mat& planes, ConvEncoderCache* cache) {
  const long expect = static_cast<long>(p.input_size) * p.input_size;
  if (planes.rows() != 3 || planes.cols() != expect) {
    throw ShapeError("conv_encode: expected 3 x " + std::to_string(expect) + " planes, got " +
                     std::to_string(planes.rows()) + " x " + std::to_string(planes.cols()));
  }
  if (cache != nullptr) {
    cache->layers.assign(p.blocks.size(), {});
    cache->valid = true;
  }
  Mat current = planes;
  int size = p.input_size;
  for (std::size_t li = 0; li < p.blocks.size(); ++li) {
    const ConvLayerParams& layer = p.blocks[li];
    const int out = conv_out_size(size);
    Mat patches(static_cast<long>(layer.in_channels) * 9, static_cast<long>(out) * out);
    im2col(current, size, patches);
    Mat preact = (layer.weight * patches).colwise() + layer.bias;
    Mat activated = preact.unaryExpr([](double v) { return gelu(v); });
    if (cache != nullptr) {
      ConvLayerCache& lc = cache->layers[li];
      lc.input = std::move(current);
      lc.patches = std::move(patches);
      lc.preact = std::move(preact);
      lc.in_size = size;
      lc.out_size = out;
    }
    current = std::move(activated);
    size = out;
  }
  const Vec pooled = current.rowwise().mean();
  if (cache != nullptr) {
    cache->pooled = pooled;
  }
  return linear_forward(p.head, pooled);
}

void conv_encode_backward(const ConvEncoderParams& p, const ConvEncoderCache& cache,
                          const Vec& dfeature, ConvEncoderParams& grad) {
  if (!cache.valid || cache.layers.size() != p.blocks.size()) {
    throw ContractViolation("conv_encode_backward: cache not populated by a forward pass");
  }
  const Vec dpooled = linear_backward(p.head, cache.pooled, dfeature, grad.head);

  // Last activation map gradient: GAP distributes dpooled evenly.
  const ConvLayerCache& last = cache.layers.back();
  const long positions = static_cast<long>(last.out_size) * last.out_size;
  Mat dact = (dpooled / static_cast<double>(positions)).replicate(1, positions);

  for (long li = static_cast<long>(p.blocks.size()) - 1; li >= 0; --li) {
    const ConvLayerParams& layer = p.blocks[li];
    const ConvLayerCache& lc = cache.layers[li];
    Mat dpre = dact.array() * lc.preact.unaryExpr([](double v) { return gelu_derivative(v); }).array();
    grad.blocks[li].weight.noalias() += dpre * lc.patches.transpose();
    grad.blocks[li].bias += dpre.rowwise().sum();
    if (li > 0) {
      const Mat dpatches = layer.weight.transpose() * dpre;
      Mat dinput = Mat::Zero(lc.input.rows(), lc.input.cols());
      col2im(dpatches, lc.in_size, dinput);
      dact = std::move(dinput);
    }
  }
}

Vec positionwise_concat(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) {
    throw ShapeError("positionwise_concat: lengths differ (" + std::to_string(p.size()) + " vs " +
                     std::to_string(q.size()) + ")");
  }
  Vec out(2 * p.size());
  for (long i = 0; i < p.size(); ++i) {
    out[2 * i] = p[i];
    out[2 * i + 1] = q[i];
  }
  return out;
}

Vec concat(const Vec& p, const Vec& q) {
  Vec out(p.size() + q.size());
  out.head(p.size()) = p;
  out.tail(q.size()) = q;
  return out;
}

void split_positionwise(const Vec& d, Vec& dp, Vec& dq) {
  if (d.size() % 2 != 0) {
    throw ShapeError("split_positionwise: odd length");
  }
  const long n = d.size() / 2;
  dp.resize(n);
  dq.resize(n);
  for (long i = 0; i < n; ++i) {
    dp[i] = d[2 * i];
    dq[i] = d[2 * i + 1];
  }
}

void split_concat(const Vec& d, long first_len, Vec& dp, Vec& dq) {
  if (first_len < 0 || first_len > d.size()) {
    throw ShapeError("split_concat: bad split point");
  }
  dp = d.head(first_len);
  dq = d.tail(d.size() - first_len);
}

}  // namespace edgecap
