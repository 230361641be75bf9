#include "edgecap/nn.hpp"

#include <cmath>

namespace edgecap {

ParamView view_of(const std::string& name, Mat& m) {
  return ParamView{name, m.data(), m.size(), {m.rows(), m.cols()}};
}

ParamView view_of(const std::string& name, Vec& v) {
  return ParamView{name, v.data(), v.size(), {v.size()}};
}

void init_uniform(Mat& m, long fan_in, Rng& rng) {
  const double s = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (long i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform(-s, s);
  }
}

void init_uniform(Vec& v, long fan_in, Rng& rng) {
  const double s = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (long i = 0; i < v.size(); ++i) {
    v[i] = rng.uniform(-s, s);
  }
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

LinearParams LinearParams::zeros(int in_dim, int out_dim) {
  LinearParams p;
  p.weight = Mat::Zero(out_dim, in_dim);
  p.bias = Vec::Zero(out_dim);
  return p;
}

void LinearParams::init(Rng& rng) {
  init_uniform(weight, in_dim(), rng);
  init_uniform(bias, in_dim(), rng);
}

void LinearParams::collect(const std::string& prefix, std::vector<ParamView>& out) {
  out.push_back(view_of(prefix + ".weight", weight));
  out.push_back(view_of(prefix + ".bias", bias));
}

Vec linear_forward(const LinearParams& p, const Vec& x) {
  if (x.size() != p.weight.cols()) {
    throw ShapeError("linear_forward: input dim " + std::to_string(x.size()) + " != " +
                     std::to_string(p.weight.cols()));
  }
  return p.weight * x + p.bias;
}

Vec linear_backward(const LinearParams& p, const Vec& x, const Vec& dy, LinearParams& grad) {
  if (x.size() != p.weight.cols() || dy.size() != p.weight.rows()) {
    throw ShapeError("linear_backward: shape mismatch");
  }
  grad.weight.noalias() += dy * x.transpose();
  grad.bias += dy;
  return p.weight.transpose() * dy;
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

EmbeddingParams EmbeddingParams::zeros(int vocab_size, int embed_dim) {
  EmbeddingParams p;
  p.table = Mat::Zero(vocab_size, embed_dim);
  return p;
}

void EmbeddingParams::init(Rng& rng) { init_uniform(table, embed_dim(), rng); }

void EmbeddingParams::collect(const std::string& prefix, std::vector<ParamView>& out) {
  out.push_back(view_of(prefix + ".table", table));
}

Vec embedding_lookup(const EmbeddingParams& p, int token) {
  if (token < 0 || token >= p.vocab_size()) {
    throw IndexError("embedding_lookup: token " + std::to_string(token) + " out of range [0, " +
                     std::to_string(p.vocab_size()) + ")");
  }
  return p.table.row(token).transpose();
}

void embedding_backward(int token, const Vec& dy, EmbeddingParams& grad) {
  if (token < 0 || token >= grad.vocab_size()) {
    throw IndexError("embedding_backward: token out of range");
  }
  if (dy.size() != grad.embed_dim()) {
    throw ShapeError("embedding_backward: gradient dim mismatch");
  }
  grad.table.row(token) += dy.transpose();
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

namespace {

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& a) { return 1.0 / (1.0 + (-a).exp()); }

}  // namespace

LstmParams LstmParams::zeros(int input_dim, int hidden_dim) {
  LstmParams p;
  p.w = Mat::Zero(4 * hidden_dim, input_dim);
  p.u = Mat::Zero(4 * hidden_dim, hidden_dim);
  p.b = Vec::Zero(4 * hidden_dim);
  return p;
}

void LstmParams::init(Rng& rng) {
  init_uniform(w, input_dim(), rng);
  init_uniform(u, hidden_dim(), rng);
  init_uniform(b, hidden_dim(), rng);
}

void LstmParams::collect(const std::string& prefix, std::vector<ParamView>& out) {
  out.push_back(view_of(prefix + ".w", w));
  out.push_back(view_of(prefix + ".u", u));
  out.push_back(view_of(prefix + ".b", b));
}

LstmState lstm_step(const LstmParams& p, const Vec& x, const Vec& h, const Vec& c,
                    LstmCache* cache) {
  const int hd = p.hidden_dim();
  if (x.size() != p.input_dim() || h.size() != hd || c.size() != hd) {
    throw ShapeError("lstm_step: shape mismatch");
  }
  Vec a = p.w * x + p.u * h + p.b;
  const Eigen::ArrayXd i = sigmoid(a.segment(0, hd).array());
  const Eigen::ArrayXd f = sigmoid(a.segment(hd, hd).array());
  const Eigen::ArrayXd g = a.segment(2 * hd, hd).array().tanh();
  const Eigen::ArrayXd o = sigmoid(a.segment(3 * hd, hd).array());

  LstmState out;
  out.c = (f * c.array() + i * g).matrix();
  const Eigen::ArrayXd tanh_c = out.c.array().tanh();
  out.h = (o * tanh_c).matrix();

  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = h;
    cache->c_prev = c;
    cache->i = i.matrix();
    cache->f = f.matrix();
    cache->g = g.matrix();
    cache->o = o.matrix();
    cache->c_new = out.c;
    cache->tanh_c = tanh_c.matrix();
    cache->valid = true;
  }
  return out;
}

LstmInputGrads lstm_backward(const LstmParams& p, const LstmCache& cache, const Vec& dh_out,
                             const Vec& dc_out, LstmParams& grad) {
  if (!cache.valid) {
    throw ContractViolation("lstm_backward: cache not populated by a forward pass");
  }
  const int hd = p.hidden_dim();
  if (dh_out.size() != hd || dc_out.size() != hd) {
    throw ShapeError("lstm_backward: gradient dim mismatch");
  }
  const Eigen::ArrayXd i = cache.i.array();
  const Eigen::ArrayXd f = cache.f.array();
  const Eigen::ArrayXd g = cache.g.array();
  const Eigen::ArrayXd o = cache.o.array();
  const Eigen::ArrayXd tc = cache.tanh_c.array();

  const Eigen::ArrayXd d_o = dh_out.array() * tc;
  const Eigen::ArrayXd dc_total = dc_out.array() + dh_out.array() * o * (1.0 - tc.square());
  const Eigen::ArrayXd d_f = dc_total * cache.c_prev.array();
  const Eigen::ArrayXd d_i = dc_total * g;
  const Eigen::ArrayXd d_g = dc_total * i;

  Vec da(4 * hd);
  da.segment(0, hd) = (d_i * i * (1.0 - i)).matrix();
  da.segment(hd, hd) = (d_f * f * (1.0 - f)).matrix();
  da.segment(2 * hd, hd) = (d_g * (1.0 - g.square())).matrix();
  da.segment(3 * hd, hd) = (d_o * o * (1.0 - o)).matrix();

  grad.w.noalias() += da * cache.x.transpose();
  grad.u.noalias() += da * cache.h_prev.transpose();
  grad.b += da;

  LstmInputGrads out;
  out.dx = p.w.transpose() * da;
  out.dh = p.u.transpose() * da;
  out.dc = (dc_total * f).matrix();
  return out;
}

// ---------------------------------------------------------------------------
// Softmax / cross-entropy
// ---------------------------------------------------------------------------

Vec softmax(const Vec& logits) {
  if (logits.size() < 1) {
    throw ShapeError("softmax: empty input");
  }
  Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
  Eigen::ArrayXd e = shifted.exp();
  return (e / e.sum()).matrix();
}

double cross_entropy(const Vec& probs, int target) {
  if (target < 0 || target >= probs.size()) {
    throw IndexError("cross_entropy: target out of range");
  }
  return -std::log(probs[target] + 1e-12);
}

Vec cross_entropy_backward(const Vec& probs, int target) {
  if (target < 0 || target >= probs.size()) {
    throw IndexError("cross_entropy_backward: target out of range");
  }
  Vec d = probs;
  d[target] -= 1.0;
  return d;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState::AdamState(const std::vector<ParamView>& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const ParamView& p : params) {
    m_.push_back(Vec::Zero(p.size));
    v_.push_back(Vec::Zero(p.size));
  }
}

void AdamState::step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam_step: parameter list does not mirror state");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size != grads[k].size || params[k].size != m_[k].size()) {
      throw ShapeError("adam_step: tensor size mismatch for " + params[k].name);
    }
    Eigen::Map<Eigen::ArrayXd> p(params[k].data, params[k].size);
    Eigen::Map<const Eigen::ArrayXd> g(grads[k].data, grads[k].size);
    m_[k].array() = cfg_.beta1 * m_[k].array() + (1.0 - cfg_.beta1) * g;
    v_[k].array() = cfg_.beta2 * v_[k].array() + (1.0 - cfg_.beta2) * g.square();
    const Eigen::ArrayXd m_hat = m_[k].array() / bc1;
    const Eigen::ArrayXd v_hat = v_[k].array() / bc2;
    p -= cfg_.lr * m_hat / (v_hat.sqrt() + cfg_.eps);
  }
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

double grad_check(const std::function<double()>& f, const std::vector<ParamView>& params,
                  const std::vector<ParamView>& analytic, double eps) {
  if (eps <= 0.0) {
    throw ParameterError("grad_check: eps must be > 0");
  }
  if (params.size() != analytic.size()) {
    throw ShapeError("grad_check: analytic grads do not mirror params");
  }
  double max_rel = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (long idx = 0; idx < params[k].size; ++idx) {
      double& w = params[k].data[idx];
      const double saved = w;
      w = saved + eps;
      const double f_plus = f();
      w = saved - eps;
      const double f_minus = f();
      w = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw ContractViolation("grad_check: non-finite objective");
      }
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[k].data[idx];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace edgecap
