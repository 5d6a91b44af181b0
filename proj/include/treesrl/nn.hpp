#ifndef TREESRL_NN_HPP
#define TREESRL_NN_HPP

#include <functional>
#include <map>
#include <set>
#include <string>

#include "treesrl/tensor.hpp"

namespace treesrl {

// Named parameter tensors. std::map keeps iteration order stable, which the
// optimizer, checkpoints and gradient checks all rely on.
struct ModelParams {
  std::map<std::string, Tensor> t;
  std::set<std::string> frozen;  // updated never (e.g. pretrained embeddings)

  Tensor& add(const std::string& name, std::vector<std::size_t> shape);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
};

using GradMap = std::map<std::string, Tensor>;

GradMap zero_grads(const ModelParams& params);
Tensor& grad_of(GradMap& grads, const ModelParams& params, const std::string& name);

void init_uniform(Tensor& t, Rng& rng, double radius);
void init_xavier(Tensor& t, Rng& rng, std::size_t fan_in, std::size_t fan_out);

// Inverted dropout; mask entries are 0 or 1/keep so eval needs no rescaling.
Vec dropout_mask(std::size_t n, double keep, Rng& rng);

// ---- LSTM -----------------------------------------------------------------

// Gate layout in the 4H dimension: input, forget, cell, output.
struct LstmDirCache {
  // All indexed by processing step (0 = first step the direction consumes).
  std::vector<Vec> x;         // inputs in processing order
  std::vector<Vec> i, f, g, o, c, h;
  std::vector<Vec> hd;        // h_{t-1} after recurrent dropout, as fed to gates
  std::vector<Vec> rec_mask;  // recurrent dropout masks
};

// Runs one direction over `inputs`; with reverse=true the sequence is
// consumed right-to-left. cache.h is in processing order. Recurrent dropout
// (keep_rec) is applied to h_{t-1} between time-steps in train mode.
void lstm_dir_forward(const Tensor& Wih, const Tensor& Whh, const Tensor& b,
                      const std::vector<Vec>& inputs, bool reverse, double keep_rec,
                      bool train, Rng* rng, LstmDirCache& cache);

// dh is in processing order, aligned with cache.h. Accumulates into dx
// (input order), dWih, dWhh, db.
void lstm_dir_backward(const Tensor& Wih, const Tensor& Whh, const LstmDirCache& cache,
                       bool reverse, const std::vector<Vec>& dh, std::vector<Vec>& dx,
                       Tensor& dWih, Tensor& dWhh, Tensor& db);

struct BiLstmCache {
  std::vector<std::vector<Vec>> dropped_inputs;  // per layer, after input dropout
  std::vector<std::vector<Vec>> input_masks;     // per layer, per position
  std::vector<LstmDirCache> fw, bw;              // per layer
};

// Multi-layer BiLSTM; parameters live under `prefix`.l{i}.{fw,bw}.{Wih,Whh,b}.
// Input dropout (keep) is applied once per layer to the layer input and
// recurrent dropout with the same keep inside each direction; identity in
// eval mode. Returns the concatenated [fw; bw] state per token.
std::vector<Vec> bilstm_forward(const ModelParams& params, const std::string& prefix,
                                int n_layers, const std::vector<Vec>& inputs, double keep,
                                bool train, Rng* rng, BiLstmCache* cache);

std::vector<Vec> bilstm_backward(const ModelParams& params, const std::string& prefix,
                                 int n_layers, const BiLstmCache& cache,
                                 const std::vector<Vec>& dout, GradMap& grads);

// ---- heads and scorer -----------------------------------------------------

// y = relu(W x + b); `pre` receives the pre-activation for backward.
Vec affine_relu(const Tensor& W, const Tensor& b, const Vec& x, Vec* pre);
void affine_relu_backward(const Tensor& W, const Vec& x, const Vec& pre, const Vec& dy,
                          Vec& dx, Tensor& dW, Tensor& db);

// scores[l] = hp^T W1[l] ha + W2[l] . (hp ++ ha) + b[l]
Vec biaffine(const Tensor& W1, const Tensor& W2, const Tensor& b, const Vec& hp,
             const Vec& ha);
void biaffine_backward(const Tensor& W1, const Tensor& W2, const Vec& hp, const Vec& ha,
                       const Vec& dscores, Vec& dhp, Vec& dha, Tensor& dW1, Tensor& dW2,
                       Tensor& db);

// ---- loss, optimizer, checking --------------------------------------------

struct XentResult {
  double loss = 0.0;
  Vec grad;   // same size as scores; zero outside [lo, hi)
  Vec probs;  // softmax over [lo, hi), zero elsewhere
};

// Cross-entropy of softmax(scores[lo:hi]) against gold (absolute index),
// stabilized with log-sum-exp. Defaults to the full score vector.
XentResult softmax_xent(const Vec& scores, std::size_t gold, std::size_t lo = 0,
                        std::size_t hi = std::size_t(-1));

struct AdamState {
  std::map<std::string, Tensor> m, v;
  long step = 0;
};

// Bias-corrected Adam over every non-frozen tensor, in name order. Throws
// numeric_error on non-finite gradients or updates.
void adam_step(ModelParams& params, const GradMap& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

// Central finite differences at `samples` random coordinates per tensor;
// returns the worst relative error vs the analytic gradient. The closure must
// be deterministic (dropout off).
double grad_check(const std::function<double(const ModelParams&)>& loss_fn,
                  ModelParams& params, const GradMap& analytic, int samples, double step,
                  Rng& rng);

}  // namespace treesrl

#endif
