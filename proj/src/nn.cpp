#include "treesrl/nn.hpp"

#include <algorithm>
#include <cmath>

namespace treesrl {

Tensor& ModelParams::add(const std::string& name, std::vector<std::size_t> shape) {
  auto [it, fresh] = t.emplace(name, Tensor(std::move(shape)));
  if (!fresh) throw usage_error("duplicate parameter tensor: " + name);
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = t.find(name);
  if (it == t.end()) throw usage_error("unknown parameter tensor: " + name);
  return it->second;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = t.find(name);
  if (it == t.end()) throw usage_error("unknown parameter tensor: " + name);
  return it->second;
}

GradMap zero_grads(const ModelParams& params) {
  GradMap g;
  for (const auto& [name, tensor] : params.t) g.emplace(name, tensor.zeros_like());
  return g;
}

Tensor& grad_of(GradMap& grads, const ModelParams& params, const std::string& name) {
  auto it = grads.find(name);
  if (it == grads.end()) it = grads.emplace(name, params.at(name).zeros_like()).first;
  return it->second;
}

void init_uniform(Tensor& t, Rng& rng, double radius) {
  for (double& x : t.v) x = uniform(rng, -radius, radius);
}

void init_xavier(Tensor& t, Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  init_uniform(t, rng, r);
}

Vec dropout_mask(std::size_t n, double keep, Rng& rng) {
  Vec mask(n);
  for (double& m : mask) m = uniform(rng, 0.0, 1.0) < keep ? 1.0 / keep : 0.0;
  return mask;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void lstm_dir_forward(const Tensor& Wih, const Tensor& Whh, const Tensor& b,
                      const std::vector<Vec>& inputs, bool reverse, double keep_rec,
                      bool train, Rng* rng, LstmDirCache& cache) {
  const std::size_t T = inputs.size();
  const std::size_t H = Whh.cols();
  cache = LstmDirCache();
  cache.x.resize(T);
  cache.i.resize(T);
  cache.f.resize(T);
  cache.g.resize(T);
  cache.o.resize(T);
  cache.c.resize(T);
  cache.h.resize(T);
  cache.hd.resize(T);
  cache.rec_mask.resize(T);

  Vec h_prev(H, 0.0), c_prev(H, 0.0);
  for (std::size_t s = 0; s < T; ++s) {
    const Vec& x = inputs[reverse ? T - 1 - s : s];
    cache.x[s] = x;
    Vec hd = h_prev;
    if (train && keep_rec < 1.0 && s > 0) {
      cache.rec_mask[s] = dropout_mask(H, keep_rec, *rng);
      for (std::size_t j = 0; j < H; ++j) hd[j] *= cache.rec_mask[s][j];
    }
    cache.hd[s] = hd;

    Vec a(4 * H);
    for (std::size_t j = 0; j < 4 * H; ++j) a[j] = b.v[j];
    gemv(Wih.v.data(), 4 * H, Wih.cols(), x.data(), a.data());
    gemv(Whh.v.data(), 4 * H, H, hd.data(), a.data());

    Vec i(H), f(H), g(H), o(H), c(H), h(H);
    for (std::size_t j = 0; j < H; ++j) {
      i[j] = sigmoid(a[j]);
      f[j] = sigmoid(a[H + j]);
      g[j] = std::tanh(a[2 * H + j]);
      o[j] = sigmoid(a[3 * H + j]);
      c[j] = f[j] * c_prev[j] + i[j] * g[j];
      h[j] = o[j] * std::tanh(c[j]);
    }
    cache.i[s] = std::move(i);
    cache.f[s] = std::move(f);
    cache.g[s] = std::move(g);
    cache.o[s] = std::move(o);
    cache.c[s] = c;
    cache.h[s] = h;
    h_prev = std::move(h);
    c_prev = std::move(c);
  }
  if (T > 0) check_finite(cache.h[T - 1], "lstm hidden state");
}

void lstm_dir_backward(const Tensor& Wih, const Tensor& Whh, const LstmDirCache& cache,
                       bool reverse, const std::vector<Vec>& dh, std::vector<Vec>& dx,
                       Tensor& dWih, Tensor& dWhh, Tensor& db) {
  const std::size_t T = cache.x.size();
  const std::size_t H = Whh.cols();
  const std::size_t In = Wih.cols();
  Vec dh_next(H, 0.0), dc_next(H, 0.0);
  for (std::size_t step = T; step-- > 0;) {
    Vec dht(H);
    for (std::size_t j = 0; j < H; ++j) dht[j] = dh[step][j] + dh_next[j];

    const Vec& i = cache.i[step];
    const Vec& f = cache.f[step];
    const Vec& g = cache.g[step];
    const Vec& o = cache.o[step];
    const Vec& c = cache.c[step];
    const Vec* c_prev = step > 0 ? &cache.c[step - 1] : nullptr;

    Vec da(4 * H);
    Vec dc(H);
    for (std::size_t j = 0; j < H; ++j) {
      double tc = std::tanh(c[j]);
      double do_ = dht[j] * tc;
      dc[j] = dc_next[j] + dht[j] * o[j] * (1.0 - tc * tc);
      double di = dc[j] * g[j];
      double dg = dc[j] * i[j];
      double df = dc[j] * (c_prev ? (*c_prev)[j] : 0.0);
      da[j] = di * i[j] * (1.0 - i[j]);
      da[H + j] = df * f[j] * (1.0 - f[j]);
      da[2 * H + j] = dg * (1.0 - g[j] * g[j]);
      da[3 * H + j] = do_ * o[j] * (1.0 - o[j]);
    }

    std::size_t t_in = reverse ? T - 1 - step : step;
    gemv_t(Wih.v.data(), 4 * H, In, da.data(), dx[t_in].data());
    ger(dWih.v.data(), 4 * H, In, da.data(), cache.x[step].data());
    ger(dWhh.v.data(), 4 * H, H, da.data(), cache.hd[step].data());
    for (std::size_t j = 0; j < 4 * H; ++j) db.v[j] += da[j];

    Vec dhd(H, 0.0);
    gemv_t(Whh.v.data(), 4 * H, H, da.data(), dhd.data());
    if (!cache.rec_mask[step].empty())
      for (std::size_t j = 0; j < H; ++j) dhd[j] *= cache.rec_mask[step][j];
    dh_next = std::move(dhd);
    for (std::size_t j = 0; j < H; ++j) dc_next[j] = dc[j] * f[j];
  }
}

std::vector<Vec> bilstm_forward(const ModelParams& params, const std::string& prefix,
                                int n_layers, const std::vector<Vec>& inputs, double keep,
                                bool train, Rng* rng, BiLstmCache* cache) {
  const std::size_t T = inputs.size();
  if (T == 0) throw usage_error("bilstm_forward: empty sequence");
  BiLstmCache local;
  BiLstmCache& c = cache ? *cache : local;
  c = BiLstmCache();
  c.dropped_inputs.resize(static_cast<std::size_t>(n_layers));
  c.input_masks.resize(static_cast<std::size_t>(n_layers));
  c.fw.resize(static_cast<std::size_t>(n_layers));
  c.bw.resize(static_cast<std::size_t>(n_layers));

  std::vector<Vec> layer_in = inputs;
  std::vector<Vec> out;
  for (int l = 0; l < n_layers; ++l) {
    std::string lp = prefix + ".l" + std::to_string(l) + ".";
    const std::size_t li = static_cast<std::size_t>(l);
    if (train && keep < 1.0) {
      c.input_masks[li].resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        c.input_masks[li][t] = dropout_mask(layer_in[t].size(), keep, *rng);
        for (std::size_t j = 0; j < layer_in[t].size(); ++j)
          layer_in[t][j] *= c.input_masks[li][t][j];
      }
    }
    c.dropped_inputs[li] = layer_in;

    lstm_dir_forward(params.at(lp + "fw.Wih"), params.at(lp + "fw.Whh"), params.at(lp + "fw.b"),
                     layer_in, false, keep, train, rng, c.fw[li]);
    lstm_dir_forward(params.at(lp + "bw.Wih"), params.at(lp + "bw.Whh"), params.at(lp + "bw.b"),
                     layer_in, true, keep, train, rng, c.bw[li]);

    const std::size_t H = params.at(lp + "fw.Whh").cols();
    out.assign(T, Vec(2 * H));
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < H; ++j) {
        out[t][j] = c.fw[li].h[t][j];
        out[t][H + j] = c.bw[li].h[T - 1 - t][j];
      }
    }
    layer_in = out;
  }
  return out;
}

std::vector<Vec> bilstm_backward(const ModelParams& params, const std::string& prefix,
                                 int n_layers, const BiLstmCache& cache,
                                 const std::vector<Vec>& dout, GradMap& grads) {
  const std::size_t T = dout.size();
  std::vector<Vec> dlayer = dout;
  for (int l = n_layers - 1; l >= 0; --l) {
    std::string lp = prefix + ".l" + std::to_string(l) + ".";
    const std::size_t li = static_cast<std::size_t>(l);
    const std::size_t H = params.at(lp + "fw.Whh").cols();
    const std::size_t In = params.at(lp + "fw.Wih").cols();

    std::vector<Vec> dh_fw(T, Vec(H)), dh_bw(T, Vec(H));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < H; ++j) {
        dh_fw[t][j] = dlayer[t][j];
        dh_bw[T - 1 - t][j] = dlayer[t][H + j];
      }

    std::vector<Vec> dx(T, Vec(In, 0.0));
    lstm_dir_backward(params.at(lp + "fw.Wih"), params.at(lp + "fw.Whh"), cache.fw[li], false,
                      dh_fw, dx, grad_of(grads, params, lp + "fw.Wih"),
                      grad_of(grads, params, lp + "fw.Whh"), grad_of(grads, params, lp + "fw.b"));
    lstm_dir_backward(params.at(lp + "bw.Wih"), params.at(lp + "bw.Whh"), cache.bw[li], true,
                      dh_bw, dx, grad_of(grads, params, lp + "bw.Wih"),
                      grad_of(grads, params, lp + "bw.Whh"), grad_of(grads, params, lp + "bw.b"));

    if (!cache.input_masks[li].empty())
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < In; ++j) dx[t][j] *= cache.input_masks[li][t][j];
    dlayer = std::move(dx);
  }
  return dlayer;
}

Vec affine_relu(const Tensor& W, const Tensor& b, const Vec& x, Vec* pre) {
  const std::size_t out = W.rows();
  Vec a = b.v;
  gemv(W.v.data(), out, W.cols(), x.data(), a.data());
  if (pre) *pre = a;
  for (double& v : a) v = v > 0.0 ? v : 0.0;
  return a;
}

void affine_relu_backward(const Tensor& W, const Vec& x, const Vec& pre, const Vec& dy,
                          Vec& dx, Tensor& dW, Tensor& db) {
  const std::size_t out = W.rows();
  Vec da(out);
  for (std::size_t j = 0; j < out; ++j) da[j] = pre[j] > 0.0 ? dy[j] : 0.0;
  gemv_t(W.v.data(), out, W.cols(), da.data(), dx.data());
  ger(dW.v.data(), out, W.cols(), da.data(), x.data());
  for (std::size_t j = 0; j < out; ++j) db.v[j] += da[j];
}

Vec biaffine(const Tensor& W1, const Tensor& W2, const Tensor& b, const Vec& hp,
             const Vec& ha) {
  const std::size_t L = W1.shape.at(0);
  const std::size_t M = W1.shape.at(1);
  if (hp.size() != M || ha.size() != W1.shape.at(2))
    throw usage_error("biaffine: vector/W1 dimension mismatch");
  if (W2.cols() != hp.size() + ha.size())
    throw usage_error("biaffine: W2 dimension mismatch");
  Vec scores(L);
  Vec tmp(M);
  for (std::size_t l = 0; l < L; ++l) {
    std::fill(tmp.begin(), tmp.end(), 0.0);
    gemv(W1.slice(l), M, W1.shape.at(2), ha.data(), tmp.data());
    const double* w2 = W2.row(l);
    scores[l] = dot(hp.data(), tmp.data(), M) + dot(w2, hp.data(), hp.size()) +
                dot(w2 + hp.size(), ha.data(), ha.size()) + b.v[l];
  }
  check_finite(scores, "biaffine scores");
  return scores;
}

void biaffine_backward(const Tensor& W1, const Tensor& W2, const Vec& hp, const Vec& ha,
                       const Vec& dscores, Vec& dhp, Vec& dha, Tensor& dW1, Tensor& dW2,
                       Tensor& db) {
  const std::size_t L = W1.shape.at(0);
  const std::size_t M = W1.shape.at(1);
  const std::size_t N = W1.shape.at(2);
  for (std::size_t l = 0; l < L; ++l) {
    const double g = dscores[l];
    if (g == 0.0) continue;
    const double* w1 = W1.slice(l);
    double* dw1 = dW1.slice(l);
    for (std::size_t r = 0; r < M; ++r) {
      const double* w1r = w1 + r * N;
      double* dw1r = dw1 + r * N;
      const double ghp = g * hp[r];
      double acc = 0.0;
      for (std::size_t c = 0; c < N; ++c) {
        acc += w1r[c] * ha[c];
        dw1r[c] += ghp * ha[c];
        dha[c] += g * w1r[c] * hp[r];
      }
      dhp[r] += g * acc;
    }
    const double* w2 = W2.row(l);
    double* dw2 = dW2.row(l);
    for (std::size_t j = 0; j < M; ++j) {
      dhp[j] += g * w2[j];
      dw2[j] += g * hp[j];
    }
    for (std::size_t j = 0; j < N; ++j) {
      dha[j] += g * w2[M + j];
      dw2[M + j] += g * ha[j];
    }
    db.v[l] += g;
  }
}

XentResult softmax_xent(const Vec& scores, std::size_t gold, std::size_t lo, std::size_t hi) {
  if (hi == std::size_t(-1)) hi = scores.size();
  if (lo >= hi || hi > scores.size()) throw usage_error("softmax_xent: bad label range");
  if (gold < lo || gold >= hi) throw usage_error("softmax_xent: gold outside label range");
  double mx = scores[lo];
  for (std::size_t j = lo; j < hi; ++j) mx = std::max(mx, scores[j]);
  double z = 0.0;
  for (std::size_t j = lo; j < hi; ++j) z += std::exp(scores[j] - mx);
  XentResult res;
  res.loss = std::log(z) - (scores[gold] - mx);
  check_finite(res.loss, "cross-entropy loss");
  res.grad.assign(scores.size(), 0.0);
  res.probs.assign(scores.size(), 0.0);
  for (std::size_t j = lo; j < hi; ++j) {
    double p = std::exp(scores[j] - mx) / z;
    res.probs[j] = p;
    res.grad[j] = p - (j == gold ? 1.0 : 0.0);
  }
  return res;
}

void adam_step(ModelParams& params, const GradMap& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (state.m.empty()) {
    for (const auto& [name, tensor] : params.t) {
      if (params.frozen.count(name)) continue;
      state.m.emplace(name, tensor.zeros_like());
      state.v.emplace(name, tensor.zeros_like());
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (auto& [name, tensor] : params.t) {
    if (params.frozen.count(name)) continue;
    auto git = grads.find(name);
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    const Tensor* g = git == grads.end() ? nullptr : &git->second;
    for (std::size_t j = 0; j < tensor.numel(); ++j) {
      double gj = g ? g->v[j] : 0.0;
      if (!std::isfinite(gj)) throw numeric_error("non-finite gradient in " + name);
      m.v[j] = beta1 * m.v[j] + (1.0 - beta1) * gj;
      v.v[j] = beta2 * v.v[j] + (1.0 - beta2) * gj * gj;
      double update = lr * (m.v[j] / bc1) / (std::sqrt(v.v[j] / bc2) + eps);
      if (!std::isfinite(update)) throw numeric_error("non-finite update in " + name);
      tensor.v[j] -= update;
    }
  }
}

double grad_check(const std::function<double(const ModelParams&)>& loss_fn,
                  ModelParams& params, const GradMap& analytic, int samples, double step,
                  Rng& rng) {
  double worst = 0.0;
  for (auto& [name, tensor] : params.t) {
    if (params.frozen.count(name) || tensor.numel() == 0) continue;
    // A parameter the backward pass never touched has an implicit zero
    // gradient (adam_step treats it the same way); if the loss actually
    // depends on it, the finite difference will expose the mismatch.
    auto git = analytic.find(name);
    const Tensor* g = git == analytic.end() ? nullptr : &git->second;
    for (int s = 0; s < samples; ++s) {
      std::size_t j = uniform_index(rng, tensor.numel());
      double saved = tensor.v[j];
      tensor.v[j] = saved + step;
      double up = loss_fn(params);
      tensor.v[j] = saved - step;
      double down = loss_fn(params);
      tensor.v[j] = saved;
      double fd = (up - down) / (2.0 * step);
      double an = g ? g->v[j] : 0.0;
      if (std::max(std::abs(fd), std::abs(an)) < 1e-8) continue;
      double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace treesrl
