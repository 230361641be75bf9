#pragma once

#include <vector>

#include "edgecap/image.hpp"
#include "edgecap/nn.hpp"

namespace edgecap {

// One 3x3 stride-2 convolution with zero padding 1 and GELU activation.
struct ConvLayerParams {
  int in_channels = 0;
  int out_channels = 0;
  Mat weight;  // out_channels x (in_channels * 9)
  Vec bias;

  static ConvLayerParams zeros(int in_channels, int out_channels);
  void init(Rng& rng);
  void collect(const std::string& prefix, std::vector<ParamView>& out);
};

// Stack of stride-2 conv blocks followed by global average pooling and a
// linear head to feature_dim. Spatial size must reach the head as
// ceil-halved `depth` times from `input_size`.
struct ConvEncoderParams {
  int input_size = 0;
  std::vector<ConvLayerParams> blocks;
  LinearParams head;

  static ConvEncoderParams build(int input_size, const std::vector<int>& channels,
                                 int feature_dim);
  int feature_dim() const { return head.out_dim(); }
  void init(Rng& rng);
  void collect(const std::string& prefix, std::vector<ParamView>& out);
};

struct ConvLayerCache {
  Mat input;    // in_channels x (size*size)
  Mat patches;  // (in_channels*9) x (out*out)
  Mat preact;   // out_channels x (out*out)
  int in_size = 0;
  int out_size = 0;
};

struct ConvEncoderCache {
  std::vector<ConvLayerCache> layers;
  Vec pooled;
  bool valid = false;
};

// Channel-major planes for the encoder: row c holds channel c row-major.
Mat image_planes(const Image& img);

// Deterministic forward pass; pass `cache` to enable backward.
Vec conv_encode(const ConvEncoderParams& p, const Mat& planes, ConvEncoderCache* cache = nullptr);

void conv_encode_backward(const ConvEncoderParams& p, const ConvEncoderCache& cache,
                          const Vec& dfeature, ConvEncoderParams& grad);

// Position-wise concatenation: [p0, q0, p1, q1, ...]; requires equal lengths.
Vec positionwise_concat(const Vec& p, const Vec& q);

// Conventional concatenation: [p..., q...].
Vec concat(const Vec& p, const Vec& q);

// Gradient splitters for the two fusion operators.
void split_positionwise(const Vec& d, Vec& dp, Vec& dq);
void split_concat(const Vec& d, long first_len, Vec& dp, Vec& dq);

double gelu(double x);
double gelu_derivative(double x);

}  // namespace edgecap
