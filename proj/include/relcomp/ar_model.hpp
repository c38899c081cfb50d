#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "relcomp/encoding.hpp"
#include "relcomp/kernels.hpp"
#include "relcomp/rng.hpp"

namespace relcomp {

struct TrainConfig {
  int bins = 64;  // continuous-attribute bins when this config fits encoders
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double lr_decay = 0.5;    // step-schedule factor
  int lr_decay_every = 10;  // epochs between steps
  int hidden_width = 128;
  int embed_dim = 16;
  int patience = 5;              // early-stopping epochs without improvement
  double holdout_fraction = 0.2;
  uint64_t seed = 1;
  // Tree-context settings (ignored by the plain AR model).
  int context_dim = 16;
  int child_hidden = 32;
  int tree_embed_dim = 8;
  int max_children = 20;
};

// Masked autoregressive model over a fixed variable order: one embedding
// table and one categorical output head per variable, two masked hidden
// layers with a residual connection. Degree-based masks guarantee head k
// depends only on variables 0..k-1 (plus the optional context block, which
// acts as a position-0 input visible to every head).
class MaskedARModel {
 public:
  std::vector<VariableInfo> vars;
  int embed_dim = 0;
  int hidden_width = 0;
  int context_dim = 0;  // 0 for the plain AR model

  std::vector<Matrix> embeddings;  // per var: cardinality × embed_dim
  Matrix w1, w2;                   // input×hidden, hidden×hidden
  std::vector<double> b1, b2;
  std::vector<Matrix> head_w;  // per var: hidden × cardinality
  std::vector<std::vector<double>> head_b;

  std::vector<int> hidden_degree;  // shared by both hidden layers
  Matrix mask1, mask2;             // binary, same shapes as w1/w2

  // Recorded at training time (used by planning and certainty).
  std::vector<double> holdout_loss;                 // per var, nats
  std::vector<double> marginal_entropy;             // per var, nats
  std::vector<std::vector<double>> train_marginal;  // per var, over indices

  int n_vars() const { return static_cast<int>(vars.size()); }
  int input_dim() const { return context_dim + n_vars() * embed_dim; }
  int var_index(const std::string& label) const;  // -1 if absent

  // Builds architecture (masks, zeroed stats) and initializes weights.
  void init(std::vector<VariableInfo> variables, int embed, int hidden, int context,
            Rng& rng);

  // p(x_k | x_<k, context): depends only on positions < k of `indices`.
  std::vector<double> conditional_density(std::span<const int32_t> indices, int k,
                                          std::span<const double> context = {}) const;

  // Samples positions [row.observed, n_vars) in order; UNSEEN never drawn,
  // NULL never drawn for tuple-factor variables.
  EncodedRow sample_completion(const EncodedRow& row, Rng& rng,
                               std::span<const double> context = {}) const;

  // Batched in-order sampling of positions [from, to). Rows must agree on
  // positions < from; one Rng per row keeps draws independent of batch
  // composition. `keep` (rows × n_vars, row-major) marks cells whose value is
  // already known: they are used as evidence instead of being drawn.
  // `no_null` (per variable) conditions marked positions on being present:
  // NULL is masked out and the head renormalized, as when sampling
  // attributes of a tuple known to exist. `dists` receives the head
  // distribution per sampled position (batch × cardinality) when non-null.
  void sample_block(std::span<EncodedRow> rows, int from, int to, std::span<Rng> rngs,
                    const std::vector<const double*>& contexts,
                    const std::vector<uint8_t>* keep = nullptr,
                    const std::vector<uint8_t>* no_null = nullptr,
                    std::vector<Matrix>* dists = nullptr) const;

  // Distribution and expectation over tuple-factor counts at variable k.
  struct TfPrediction {
    std::vector<double> probs;  // over counts 0..tf_cap (renormalized)
    double expectation = 0.0;
  };
  TfPrediction predict_tuple_factor(std::span<const int32_t> indices, int k,
                                    const AttributeEncoder& tf_encoder,
                                    std::span<const double> context = {}) const;

  // Joint log-likelihood of a full row = sum of conditional log-densities.
  double joint_log_likelihood(std::span<const int32_t> indices,
                              std::span<const double> context = {}) const;

  void visit_params(const std::function<void(Matrix&)>& on_matrix,
                    const std::function<void(std::vector<double>&)>& on_vector);

  void forward_input(const std::vector<const int32_t*>& rows,
                     const std::vector<const double*>& contexts, Matrix& x) const;
};

// One batch's forward/backward state. Exposed so the trainer, the
// tree-context model, batched sampling and the gradient tests share one
// implementation.
struct ArBatch {
  Matrix x, z1, a1, r2, a2;   // activations (r2 = relu of second pre-act)
  std::vector<Matrix> probs;  // per var: batch × cardinality
  // Gradients, same shapes as the model parameters.
  std::vector<Matrix> d_embeddings;
  Matrix d_w1, d_w2;
  std::vector<double> d_b1, d_b2;
  std::vector<Matrix> d_head_w;
  std::vector<std::vector<double>> d_head_b;
  Matrix d_context;  // batch × context_dim (for tree backprop)

  void forward(const MaskedARModel& m, const std::vector<const int32_t*>& rows,
               const std::vector<const double*>& contexts);
  // Mean over batch of summed negative log-likelihood of variables selected
  // by loss_mask[i*n_vars+k].
  double loss(const MaskedARModel& m, const std::vector<const int32_t*>& rows,
              const std::vector<uint8_t>& loss_mask) const;
  void backward(const MaskedARModel& m, const std::vector<const int32_t*>& rows,
                const std::vector<uint8_t>& loss_mask);
};

// Loss masks: cells holding the NULL / count-unknown code are skipped —
// heads are supervised on present values only, matching how they are
// sampled (a synthesized tuple always exists and always gets a value).
std::vector<uint8_t> build_loss_mask(const MaskedARModel& m,
                                     const std::vector<const int32_t*>& rows);

// Draws an index from a categorical distribution; never UNSEEN, never NULL
// for tuple factors. Falls back to uniform over allowed indices when the
// remaining mass is zero.
int32_t draw_index(std::span<const double> probs, bool is_tuple_factor, Rng& rng);

// Per-row context production for models that condition on an upstream
// encoder (the tree encoder). The trainer pulls fresh contexts per batch and
// pushes gradients back.
class ContextSource {
 public:
  virtual ~ContextSource() = default;
  virtual int dim() const = 0;
  // Fills out (resized to row_ids.size() × dim()) with current contexts.
  virtual void compute(const std::vector<size_t>& row_ids, Matrix& out) = 0;
  virtual void apply_gradients(const std::vector<size_t>& row_ids,
                               const Matrix& d_context, double lr, double momentum) = 0;
  virtual void snapshot_best() = 0;
  virtual void restore_best() = 0;
};

// Trains `model` in place over full rows (every position filled;
// tuple-factor positions may hold NULL). 80/20 seeded split, SGD with
// momentum, early stopping on held-out loss; records per-variable held-out
// losses and training marginals on the model. `context` may be null.
// Returns the best held-out mean loss. Deterministic under config.seed.
double train_core(MaskedARModel& model, const std::vector<EncodedRow>& rows,
                  const TrainConfig& config, ContextSource* context);

// Convenience wrapper: init + train_core without context.
MaskedARModel train_ar(const std::vector<EncodedRow>& rows,
                       std::vector<VariableInfo> variables, const TrainConfig& config);

}  // namespace relcomp
