#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "edgecap/errors.hpp"
#include "edgecap/rng.hpp"

namespace edgecap {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Non-owning handle to one parameter tensor's storage. The flat ordering of a
// model's views defines both the optimizer state layout and the checkpoint
// record order, so collection must be deterministic.
struct ParamView {
  std::string name;
  double* data = nullptr;
  long size = 0;
  std::vector<long> shape;
};

ParamView view_of(const std::string& name, Mat& m);
ParamView view_of(const std::string& name, Vec& v);

// Uniform(-s, s) with s = sqrt(1 / fan_in).
void init_uniform(Mat& m, long fan_in, Rng& rng);
void init_uniform(Vec& v, long fan_in, Rng& rng);

// ---------------------------------------------------------------------------
// Linear layer: y = W x + b
// ---------------------------------------------------------------------------

struct LinearParams {
  Mat weight;  // out_dim x in_dim
  Vec bias;    // out_dim

  static LinearParams zeros(int in_dim, int out_dim);
  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
  void init(Rng& rng);
  void collect(const std::string& prefix, std::vector<ParamView>& out);
};

Vec linear_forward(const LinearParams& p, const Vec& x);

// Accumulates dW, db into `grad`; returns dx.
Vec linear_backward(const LinearParams& p, const Vec& x, const Vec& dy, LinearParams& grad);

// ---------------------------------------------------------------------------
// Embedding table
// ---------------------------------------------------------------------------

struct EmbeddingParams {
  Mat table;  // vocab_size x embed_dim

  static EmbeddingParams zeros(int vocab_size, int embed_dim);
  int vocab_size() const { return static_cast<int>(table.rows()); }
  int embed_dim() const { return static_cast<int>(table.cols()); }
  void init(Rng& rng);
  void collect(const std::string& prefix, std::vector<ParamView>& out);
};

Vec embedding_lookup(const EmbeddingParams& p, int token);
void embedding_backward(int token, const Vec& dy, EmbeddingParams& grad);

// ---------------------------------------------------------------------------
// LSTM cell (gates stacked [i; f; g; o])
// ---------------------------------------------------------------------------

struct LstmParams {
  Mat w;  // 4H x input_dim
  Mat u;  // 4H x H
  Vec b;  // 4H

  static LstmParams zeros(int input_dim, int hidden_dim);
  int input_dim() const { return static_cast<int>(w.cols()); }
  int hidden_dim() const { return static_cast<int>(u.cols()); }
  void init(Rng& rng);
  void collect(const std::string& prefix, std::vector<ParamView>& out);
};

struct LstmCache {
  Vec x, h_prev, c_prev;
  Vec i, f, g, o;
  Vec c_new, tanh_c;
  bool valid = false;
};

struct LstmState {
  Vec h, c;
};

// Standard formulation: i,f,o = sigmoid gates, g = tanh candidate,
// c' = f*c + i*g, h' = o*tanh(c'). Pass `cache` to enable backward.
LstmState lstm_step(const LstmParams& p, const Vec& x, const Vec& h, const Vec& c,
                    LstmCache* cache = nullptr);

struct LstmInputGrads {
  Vec dx, dh, dc;
};

LstmInputGrads lstm_backward(const LstmParams& p, const LstmCache& cache, const Vec& dh_out,
                             const Vec& dc_out, LstmParams& grad);

// ---------------------------------------------------------------------------
// Softmax / cross-entropy
// ---------------------------------------------------------------------------

// Max-subtracted; output strictly positive, sums to 1.
Vec softmax(const Vec& logits);

// -ln(probs[target] + 1e-12)
double cross_entropy(const Vec& probs, int target);

// d(loss)/d(logits) = probs - one_hot(target)
Vec cross_entropy_backward(const Vec& probs, int target);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState(const std::vector<ParamView>& params, AdamConfig cfg = {});

  // Bias-corrected update. `params` and `grads` must mirror the construction
  // layout element for element.
  void step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads);

  long step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Vec> m_, v_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

// Central differences over every coordinate of `params`; compares against
// `analytic` (same layout). Relative error |a - n| / max(1, |a|, |n|).
double grad_check(const std::function<double()>& f, const std::vector<ParamView>& params,
                  const std::vector<ParamView>& analytic, double eps = 1e-5);

}  // namespace edgecap
