#include "relcomp/ar_model.hpp"

#include <algorithm>
#include <cmath>

#include "relcomp/errors.hpp"

namespace relcomp {

int MaskedARModel::var_index(const std::string& label) const {
  for (int k = 0; k < n_vars(); ++k)
    if (vars[static_cast<size_t>(k)].label() == label) return k;
  return -1;
}

namespace {

void glorot_init(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / (w.rows + w.cols));
  for (double& v : w.data) v = (rng.uniform() * 2.0 - 1.0) * limit;
}

}  // namespace

void MaskedARModel::init(std::vector<VariableInfo> variables, int embed, int hidden,
                         int context, Rng& rng) {
  if (variables.empty()) throw TrainingError("model needs at least one variable");
  vars = std::move(variables);
  embed_dim = embed;
  hidden_width = hidden;
  context_dim = context;
  const int k_vars = n_vars();

  embeddings.clear();
  const double embed_limit = std::sqrt(3.0 / embed_dim);
  for (const auto& v : vars) {
    Matrix e(v.cardinality, embed_dim);
    for (double& x : e.data) x = (rng.uniform() * 2.0 - 1.0) * embed_limit;
    embeddings.push_back(std::move(e));
  }

  // Degree assignment. Input block for variable k carries degree k+1; the
  // context block carries degree 0. Hidden units cycle through the usable
  // degrees: 0..K-1 with a context block (degree-0 units read only context),
  // 1..K-1 without one (the first head then reduces to its bias, i.e. the
  // marginal).
  hidden_degree.assign(static_cast<size_t>(hidden_width), 0);
  const int lo = context_dim > 0 ? 0 : std::min(1, k_vars - 1);
  const int hi = std::max(k_vars - 1, lo);
  const int span = hi - lo + 1;
  for (int h = 0; h < hidden_width; ++h)
    hidden_degree[static_cast<size_t>(h)] = lo + h % span;

  mask1 = Matrix(input_dim(), hidden_width);
  for (int i = 0; i < input_dim(); ++i) {
    const int in_degree = i < context_dim ? 0 : (i - context_dim) / embed_dim + 1;
    for (int h = 0; h < hidden_width; ++h)
      mask1.at(i, h) = in_degree <= hidden_degree[static_cast<size_t>(h)] ? 1.0 : 0.0;
  }
  mask2 = Matrix(hidden_width, hidden_width);
  for (int a = 0; a < hidden_width; ++a)
    for (int b = 0; b < hidden_width; ++b)
      mask2.at(a, b) =
          hidden_degree[static_cast<size_t>(a)] <= hidden_degree[static_cast<size_t>(b)]
              ? 1.0
              : 0.0;

  w1 = Matrix(input_dim(), hidden_width);
  w2 = Matrix(hidden_width, hidden_width);
  glorot_init(w1, rng);
  glorot_init(w2, rng);
  kernels::hadamard(w1, mask1);
  kernels::hadamard(w2, mask2);
  b1.assign(static_cast<size_t>(hidden_width), 0.0);
  b2.assign(static_cast<size_t>(hidden_width), 0.0);

  head_w.clear();
  head_b.clear();
  for (int k = 0; k < k_vars; ++k) {
    Matrix w(hidden_width, vars[static_cast<size_t>(k)].cardinality);
    glorot_init(w, rng);
    // Head k may read hidden units of degree ≤ k only.
    for (int h = 0; h < hidden_width; ++h)
      if (hidden_degree[static_cast<size_t>(h)] > k)
        for (int c = 0; c < w.cols; ++c) w.at(h, c) = 0.0;
    head_w.push_back(std::move(w));
    head_b.emplace_back(static_cast<size_t>(vars[static_cast<size_t>(k)].cardinality), 0.0);
  }

  holdout_loss.assign(static_cast<size_t>(k_vars), 0.0);
  marginal_entropy.assign(static_cast<size_t>(k_vars), 0.0);
  train_marginal.assign(static_cast<size_t>(k_vars), {});
}

void MaskedARModel::forward_input(const std::vector<const int32_t*>& rows,
                                  const std::vector<const double*>& contexts,
                                  Matrix& x) const {
  const int batch = static_cast<int>(rows.size());
  x = Matrix(batch, input_dim());
  for (int i = 0; i < batch; ++i) {
    double* xi = x.row(i);
    if (context_dim > 0) {
      const double* c = contexts[static_cast<size_t>(i)];
      for (int j = 0; j < context_dim; ++j) xi[j] = c ? c[j] : 0.0;
    }
    for (int k = 0; k < n_vars(); ++k) {
      const int32_t idx = rows[static_cast<size_t>(i)][k];
      const double* e = embeddings[static_cast<size_t>(k)].row(idx);
      double* dst = xi + context_dim + k * embed_dim;
      for (int j = 0; j < embed_dim; ++j) dst[j] = e[j];
    }
  }
}

void ArBatch::forward(const MaskedARModel& m, const std::vector<const int32_t*>& rows,
                      const std::vector<const double*>& contexts) {
  m.forward_input(rows, contexts, x);

  Matrix w1m = m.w1;
  kernels::hadamard(w1m, m.mask1);
  kernels::matmul(x, w1m, z1);
  kernels::add_bias(z1, m.b1);
  a1 = z1;
  kernels::relu(a1);

  Matrix w2m = m.w2;
  kernels::hadamard(w2m, m.mask2);
  kernels::matmul(a1, w2m, r2);
  kernels::add_bias(r2, m.b2);
  kernels::relu(r2);
  a2 = r2;
  for (size_t i = 0; i < a2.data.size(); ++i) a2.data[i] += a1.data[i];

  probs.resize(static_cast<size_t>(m.n_vars()));
  for (int k = 0; k < m.n_vars(); ++k) {
    kernels::matmul(a2, m.head_w[static_cast<size_t>(k)], probs[static_cast<size_t>(k)]);
    kernels::add_bias(probs[static_cast<size_t>(k)], m.head_b[static_cast<size_t>(k)]);
    kernels::softmax_rows(probs[static_cast<size_t>(k)]);
  }
}

double ArBatch::loss(const MaskedARModel& m, const std::vector<const int32_t*>& rows,
                     const std::vector<uint8_t>& loss_mask) const {
  const int batch = static_cast<int>(rows.size());
  double total = 0.0;
  for (int i = 0; i < batch; ++i) {
    for (int k = 0; k < m.n_vars(); ++k) {
      if (!loss_mask[static_cast<size_t>(i) * m.n_vars() + k]) continue;
      const int32_t target = rows[static_cast<size_t>(i)][k];
      const double p = probs[static_cast<size_t>(k)].at(i, target);
      total -= std::log(std::max(p, 1e-300));
    }
  }
  return total / batch;
}

void ArBatch::backward(const MaskedARModel& m, const std::vector<const int32_t*>& rows,
                       const std::vector<uint8_t>& loss_mask) {
  const int batch = static_cast<int>(rows.size());
  const double inv_batch = 1.0 / batch;

  Matrix d_a2(batch, m.hidden_width);
  d_head_w.resize(static_cast<size_t>(m.n_vars()));
  d_head_b.resize(static_cast<size_t>(m.n_vars()));
  for (int k = 0; k < m.n_vars(); ++k) {
    const Matrix& pk = probs[static_cast<size_t>(k)];
    Matrix d_logits = pk;
    for (int i = 0; i < batch; ++i) {
      double* di = d_logits.row(i);
      if (!loss_mask[static_cast<size_t>(i) * m.n_vars() + k]) {
        for (int c = 0; c < d_logits.cols; ++c) di[c] = 0.0;
        continue;
      }
      di[rows[static_cast<size_t>(i)][k]] -= 1.0;
      for (int c = 0; c < d_logits.cols; ++c) di[c] *= inv_batch;
    }
    kernels::matmul_tn(a2, d_logits, d_head_w[static_cast<size_t>(k)]);
    // Zero gradients of masked head entries (hidden degree ≥ variable pos).
    for (int h = 0; h < m.hidden_width; ++h)
      if (m.hidden_degree[static_cast<size_t>(h)] > k)
        for (int c = 0; c < d_head_w[static_cast<size_t>(k)].cols; ++c)
          d_head_w[static_cast<size_t>(k)].at(h, c) = 0.0;
    auto& dbk = d_head_b[static_cast<size_t>(k)];
    dbk.assign(static_cast<size_t>(d_logits.cols), 0.0);
    for (int i = 0; i < batch; ++i) {
      const double* di = d_logits.row(i);
      for (int c = 0; c < d_logits.cols; ++c) dbk[static_cast<size_t>(c)] += di[c];
    }
    Matrix masked_head = m.head_w[static_cast<size_t>(k)];
    for (int h = 0; h < m.hidden_width; ++h)
      if (m.hidden_degree[static_cast<size_t>(h)] > k)
        for (int c = 0; c < masked_head.cols; ++c) masked_head.at(h, c) = 0.0;
    Matrix contrib;
    kernels::matmul_nt(d_logits, masked_head, contrib);
    for (size_t i = 0; i < d_a2.data.size(); ++i)
      d_a2.data[i] = (k == 0 ? 0.0 : d_a2.data[i]) + contrib.data[i];
  }

  // Residual split: a2 = relu(z2) + a1.
  Matrix d_r2 = d_a2;
  kernels::relu_backward(r2, d_r2);
  Matrix d_a1 = d_a2;

  Matrix w2m = m.w2;
  kernels::hadamard(w2m, m.mask2);
  kernels::matmul_tn(a1, d_r2, d_w2);
  kernels::hadamard(d_w2, m.mask2);
  d_b2.assign(static_cast<size_t>(m.hidden_width), 0.0);
  for (int i = 0; i < batch; ++i) {
    const double* di = d_r2.row(i);
    for (int h = 0; h < m.hidden_width; ++h) d_b2[static_cast<size_t>(h)] += di[h];
  }
  Matrix back2;
  kernels::matmul_nt(d_r2, w2m, back2);
  for (size_t i = 0; i < d_a1.data.size(); ++i) d_a1.data[i] += back2.data[i];

  Matrix d_z1 = d_a1;
  kernels::relu_backward(a1, d_z1);

  Matrix w1m = m.w1;
  kernels::hadamard(w1m, m.mask1);
  kernels::matmul_tn(x, d_z1, d_w1);
  kernels::hadamard(d_w1, m.mask1);
  d_b1.assign(static_cast<size_t>(m.hidden_width), 0.0);
  for (int i = 0; i < batch; ++i) {
    const double* di = d_z1.row(i);
    for (int h = 0; h < m.hidden_width; ++h) d_b1[static_cast<size_t>(h)] += di[h];
  }
  Matrix d_x;
  kernels::matmul_nt(d_z1, w1m, d_x);

  d_embeddings.resize(static_cast<size_t>(m.n_vars()));
  for (int k = 0; k < m.n_vars(); ++k) {
    Matrix& de = d_embeddings[static_cast<size_t>(k)];
    de = Matrix(m.embeddings[static_cast<size_t>(k)].rows, m.embed_dim);
    for (int i = 0; i < batch; ++i) {
      const int32_t idx = rows[static_cast<size_t>(i)][k];
      const double* src = d_x.row(i) + m.context_dim + k * m.embed_dim;
      double* dst = de.row(idx);
      for (int j = 0; j < m.embed_dim; ++j) dst[j] += src[j];
    }
  }
  if (m.context_dim > 0) {
    d_context = Matrix(batch, m.context_dim);
    for (int i = 0; i < batch; ++i) {
      const double* src = d_x.row(i);
      double* dst = d_context.row(i);
      for (int j = 0; j < m.context_dim; ++j) dst[j] = src[j];
    }
  }
}

std::vector<uint8_t> build_loss_mask(const MaskedARModel& m,
                                     const std::vector<const int32_t*>& rows) {
  // Cells holding the penultimate code carry no value to learn: for counts it
  // means "count unknown", for attributes it is NULL — a tuple that exists
  // never receives one at synthesis time, so heads model present values only.
  std::vector<uint8_t> mask(rows.size() * static_cast<size_t>(m.n_vars()), 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int k = 0; k < m.n_vars(); ++k) {
      const auto& var = m.vars[static_cast<size_t>(k)];
      if (rows[i][k] == var.cardinality - 2)
        mask[i * static_cast<size_t>(m.n_vars()) + static_cast<size_t>(k)] = 0;
    }
  }
  return mask;
}

std::vector<double> MaskedARModel::conditional_density(std::span<const int32_t> indices,
                                                       int k,
                                                       std::span<const double> context) const {
  if (k < 0 || k >= n_vars())
    throw ExecutionError("variable position " + std::to_string(k) + " out of range");
  if (static_cast<int>(indices.size()) < k)
    throw ExecutionError("conditional prefix shorter than requested position");
  std::vector<int32_t> full(static_cast<size_t>(n_vars()), 0);
  for (int i = 0; i < std::min<int>(static_cast<int>(indices.size()), n_vars()); ++i)
    full[static_cast<size_t>(i)] = indices[static_cast<size_t>(i)];
  ArBatch batch;
  std::vector<const int32_t*> rows{full.data()};
  std::vector<const double*> contexts{context.empty() ? nullptr : context.data()};
  batch.forward(*this, rows, contexts);
  const Matrix& pk = batch.probs[static_cast<size_t>(k)];
  return std::vector<double>(pk.row(0), pk.row(0) + pk.cols);
}

int32_t draw_index(std::span<const double> probs, bool is_tuple_factor, Rng& rng) {
  const int32_t card = static_cast<int32_t>(probs.size());
  const int32_t unseen = card - 1;
  const int32_t null_idx = card - 2;
  std::vector<double> p(probs.begin(), probs.end());
  p[static_cast<size_t>(unseen)] = 0.0;
  if (is_tuple_factor) p[static_cast<size_t>(null_idx)] = 0.0;
  double sum = 0.0;
  for (double v : p) sum += v;
  const double u = rng.uniform();
  if (sum <= 0.0) {
    const int32_t allowed = is_tuple_factor ? card - 2 : card - 1;
    return static_cast<int32_t>(u * allowed);
  }
  double acc = 0.0;
  for (int32_t i = 0; i < card; ++i) {
    acc += p[static_cast<size_t>(i)] / sum;
    if (u < acc) return i;
  }
  for (int32_t i = card - 1; i >= 0; --i)
    if (p[static_cast<size_t>(i)] > 0.0) return i;
  return 0;
}

EncodedRow MaskedARModel::sample_completion(const EncodedRow& row, Rng& rng,
                                            std::span<const double> context) const {
  EncodedRow out = row;
  out.indices.resize(static_cast<size_t>(n_vars()), 0);
  for (int k = row.observed; k < n_vars(); ++k) {
    std::vector<double> probs = conditional_density(
        std::span<const int32_t>(out.indices.data(), static_cast<size_t>(k)), k, context);
    out.indices[static_cast<size_t>(k)] =
        draw_index(probs, vars[static_cast<size_t>(k)].is_tuple_factor, rng);
  }
  return out;
}

void MaskedARModel::sample_block(std::span<EncodedRow> rows, int from, int to,
                                 std::span<Rng> rngs,
                                 const std::vector<const double*>& contexts,
                                 const std::vector<uint8_t>* keep,
                                 const std::vector<uint8_t>* no_null,
                                 std::vector<Matrix>* dists) const {
  const int batch = static_cast<int>(rows.size());
  if (batch == 0) {
    if (dists) dists->assign(static_cast<size_t>(std::max(0, to - from)), Matrix());
    return;
  }
  if (rngs.size() != rows.size())
    throw ExecutionError("sample_block needs one rng per row");
  if (from < 0 || to > n_vars() || from > to)
    throw ExecutionError("sample_block range out of bounds");
  const size_t nv = static_cast<size_t>(n_vars());
  auto kept = [&](int i, int k) {
    return keep && (*keep)[static_cast<size_t>(i) * nv + static_cast<size_t>(k)] != 0;
  };
  for (int i = 0; i < batch; ++i) {
    auto& r = rows[static_cast<size_t>(i)];
    r.indices.resize(nv, 0);
    for (int k = from; k < n_vars(); ++k)
      if (!kept(i, k)) r.indices[static_cast<size_t>(k)] = 0;
  }

  std::vector<const int32_t*> ptrs(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) ptrs[i] = rows[i].indices.data();
  Matrix x;
  forward_input(ptrs, contexts, x);

  Matrix w1m = w1;
  kernels::hadamard(w1m, mask1);
  Matrix w2m = w2;
  kernels::hadamard(w2m, mask2);

  // Pre-activation of the first layer, updated in place as values are drawn;
  // each step then needs only the hidden×hidden matmul and one head.
  Matrix z1p;
  kernels::matmul(x, w1m, z1p);
  kernels::add_bias(z1p, b1);

  if (dists) dists->assign(static_cast<size_t>(to - from), Matrix());

  Matrix a1v, a2v, logits;
  for (int k = from; k < to; ++k) {
    a1v = z1p;
    kernels::relu(a1v);
    kernels::matmul(a1v, w2m, a2v);
    kernels::add_bias(a2v, b2);
    kernels::relu(a2v);
    for (size_t i = 0; i < a2v.data.size(); ++i) a2v.data[i] += a1v.data[i];
    kernels::matmul(a2v, head_w[static_cast<size_t>(k)], logits);
    kernels::add_bias(logits, head_b[static_cast<size_t>(k)]);
    kernels::softmax_rows(logits);

    const bool tf = vars[static_cast<size_t>(k)].is_tuple_factor;
    const bool forbid =
        tf || (no_null && static_cast<size_t>(k) < no_null->size() &&
               (*no_null)[static_cast<size_t>(k)] != 0);
    if (forbid && logits.cols >= 2) {
      // Condition on the tuple existing: drop NULL (and UNSEEN) mass so both
      // the draws and the recorded distributions describe a present value.
      for (int i = 0; i < batch; ++i) {
        double* p = logits.row(i);
        p[logits.cols - 1] = 0.0;
        p[logits.cols - 2] = 0.0;
        double sum = 0.0;
        for (int j = 0; j < logits.cols; ++j) sum += p[j];
        if (sum > 0.0)
          for (int j = 0; j < logits.cols; ++j) p[j] /= sum;
      }
    }
    const int off = context_dim + k * embed_dim;
    for (int i = 0; i < batch; ++i) {
      if (kept(i, k)) continue;
      std::span<const double> p(logits.row(i), static_cast<size_t>(logits.cols));
      const int32_t v = draw_index(p, forbid, rngs[static_cast<size_t>(i)]);
      rows[static_cast<size_t>(i)].indices[static_cast<size_t>(k)] = v;
      if (v == 0) continue;  // input already encoded index 0
      const double* e_new = embeddings[static_cast<size_t>(k)].row(v);
      const double* e_old = embeddings[static_cast<size_t>(k)].row(0);
      double* zi = z1p.row(i);
      for (int j = 0; j < embed_dim; ++j) {
        const double delta = e_new[j] - e_old[j];
        if (delta == 0.0) continue;
        const double* wrow = w1m.row(off + j);
        for (int h = 0; h < hidden_width; ++h) zi[h] += delta * wrow[h];
      }
    }
    if (dists) (*dists)[static_cast<size_t>(k - from)] = std::move(logits);
  }
}

MaskedARModel::TfPrediction MaskedARModel::predict_tuple_factor(
    std::span<const int32_t> indices, int k, const AttributeEncoder& tf_encoder,
    std::span<const double> context) const {
  if (k < 0 || k >= n_vars() || !vars[static_cast<size_t>(k)].is_tuple_factor)
    throw ExecutionError("variable " + std::to_string(k) + " is not a tuple factor");
  std::vector<double> probs = conditional_density(indices, k, context);
  TfPrediction out;
  out.probs.assign(static_cast<size_t>(tf_encoder.tf_cap) + 1, 0.0);
  double sum = 0.0;
  for (int32_t c = 0; c <= tf_encoder.tf_cap; ++c) {
    out.probs[static_cast<size_t>(c)] = probs[static_cast<size_t>(c)];
    sum += probs[static_cast<size_t>(c)];
  }
  if (sum <= 0.0) {
    out.probs.assign(out.probs.size(), 1.0 / static_cast<double>(out.probs.size()));
    sum = 1.0;
  } else {
    for (double& v : out.probs) v /= sum;
  }
  for (int32_t c = 0; c <= tf_encoder.tf_cap; ++c)
    out.expectation += c * out.probs[static_cast<size_t>(c)];
  return out;
}

double MaskedARModel::joint_log_likelihood(std::span<const int32_t> indices,
                                           std::span<const double> context) const {
  double ll = 0.0;
  for (int k = 0; k < n_vars(); ++k) {
    std::vector<double> probs = conditional_density(indices, k, context);
    ll += std::log(std::max(probs[static_cast<size_t>(indices[static_cast<size_t>(k)])],
                            1e-300));
  }
  return ll;
}

void MaskedARModel::visit_params(const std::function<void(Matrix&)>& on_matrix,
                                 const std::function<void(std::vector<double>&)>& on_vector) {
  for (auto& e : embeddings) on_matrix(e);
  on_matrix(w1);
  on_matrix(w2);
  on_vector(b1);
  on_vector(b2);
  for (auto& h : head_w) on_matrix(h);
  for (auto& h : head_b) on_vector(h);
}

namespace {

struct Momentum {
  std::vector<Matrix> matrices;
  std::vector<std::vector<double>> vectors;

  void match(MaskedARModel& m) {
    size_t mi = 0, vi = 0;
    m.visit_params(
        [&](Matrix& w) {
          if (matrices.size() <= mi) matrices.emplace_back(w.rows, w.cols);
          ++mi;
        },
        [&](std::vector<double>& b) {
          if (vectors.size() <= vi) vectors.emplace_back(b.size(), 0.0);
          ++vi;
        });
  }
};

void record_marginals(MaskedARModel& model, const std::vector<EncodedRow>& rows) {
  // Marginals describe present values, matching what the heads are scored and
  // sampled on: NULL / count-unknown cells are left out.
  for (int k = 0; k < model.n_vars(); ++k) {
    auto& var = model.vars[static_cast<size_t>(k)];
    std::vector<double> counts(static_cast<size_t>(var.cardinality), 0.0);
    double total = 0.0;
    for (const auto& r : rows) {
      const int32_t idx = r.indices[static_cast<size_t>(k)];
      if (idx == var.cardinality - 2) continue;
      counts[static_cast<size_t>(idx)] += 1.0;
      total += 1.0;
    }
    double entropy = 0.0;
    if (total > 0) {
      for (double& c : counts) {
        c /= total;
        if (c > 0) entropy -= c * std::log(c);
      }
    }
    model.train_marginal[static_cast<size_t>(k)] = std::move(counts);
    model.marginal_entropy[static_cast<size_t>(k)] = entropy;
  }
}

}  // namespace

double train_core(MaskedARModel& model, const std::vector<EncodedRow>& rows,
                  const TrainConfig& config, ContextSource* context) {
  if (rows.empty()) throw TrainingError("training set is empty");
  for (const auto& r : rows)
    if (static_cast<int>(r.indices.size()) != model.n_vars())
      throw TrainingError("training row arity does not match the variable order");

  Rng rng(Rng::derive(config.seed, {0x7261696e}));
  std::vector<size_t> order(rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  size_t n_holdout = static_cast<size_t>(config.holdout_fraction * rows.size());
  if (rows.size() < 5) n_holdout = 0;  // too small to spare rows
  std::vector<size_t> holdout(order.begin(), order.begin() + n_holdout);
  std::vector<size_t> train(order.begin() + n_holdout, order.end());
  // The held-out evaluation set: actual holdout, or the training rows as a
  // stand-in when no rows could be spared.
  const std::vector<size_t>& eval_ids = holdout.empty() ? train : holdout;

  record_marginals(model, rows);

  Momentum momentum;
  momentum.match(model);

  ArBatch batch;
  Matrix ctx_matrix;
  std::vector<const int32_t*> row_ptrs;
  std::vector<const double*> ctx_ptrs;

  auto run_batch = [&](const std::vector<size_t>& ids, bool learn, double lr) {
    row_ptrs.clear();
    ctx_ptrs.clear();
    for (size_t id : ids) row_ptrs.push_back(rows[id].indices.data());
    if (context) {
      context->compute(ids, ctx_matrix);
      for (size_t i = 0; i < ids.size(); ++i) ctx_ptrs.push_back(ctx_matrix.row(static_cast<int>(i)));
    } else {
      ctx_ptrs.assign(ids.size(), nullptr);
    }
    batch.forward(model, row_ptrs, ctx_ptrs);
    const std::vector<uint8_t> mask = build_loss_mask(model, row_ptrs);
    const double loss = batch.loss(model, row_ptrs, mask);
    if (!learn) return loss;
    batch.backward(model, row_ptrs, mask);

    size_t mi = 0, vi = 0;
    size_t gm = 0, gv = 0;
    std::vector<Matrix*> grads_m;
    std::vector<std::vector<double>*> grads_v;
    for (auto& e : batch.d_embeddings) grads_m.push_back(&e);
    grads_m.push_back(&batch.d_w1);
    grads_m.push_back(&batch.d_w2);
    grads_v.push_back(&batch.d_b1);
    grads_v.push_back(&batch.d_b2);
    for (auto& h : batch.d_head_w) grads_m.push_back(&h);
    for (auto& h : batch.d_head_b) grads_v.push_back(&h);
    model.visit_params(
        [&](Matrix& w) {
          Matrix& v = momentum.matrices[mi++];
          Matrix& g = *grads_m[gm++];
          for (size_t i = 0; i < w.data.size(); ++i) {
            v.data[i] = config.momentum * v.data[i] - lr * g.data[i];
            w.data[i] += v.data[i];
          }
        },
        [&](std::vector<double>& b) {
          std::vector<double>& v = momentum.vectors[vi++];
          std::vector<double>& g = *grads_v[gv++];
          for (size_t i = 0; i < b.size(); ++i) {
            v[i] = config.momentum * v[i] - lr * g[i];
            b[i] += v[i];
          }
        });
    if (context && model.context_dim > 0)
      context->apply_gradients(ids, batch.d_context, lr, config.momentum);
    return loss;
  };

  auto eval_holdout = [&]() {
    double total = 0.0;
    size_t count = 0;
    const size_t bs = static_cast<size_t>(config.batch_size);
    for (size_t start = 0; start < eval_ids.size(); start += bs) {
      std::vector<size_t> ids(eval_ids.begin() + start,
                              eval_ids.begin() + std::min(start + bs, eval_ids.size()));
      total += run_batch(ids, false, 0.0) * ids.size();
      count += ids.size();
    }
    return total / static_cast<double>(count);
  };

  MaskedARModel best = model;
  if (context) context->snapshot_best();
  double best_loss = eval_holdout();
  int stale = 0;
  double lr = config.learning_rate;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch > 0 && config.lr_decay_every > 0 && epoch % config.lr_decay_every == 0)
      lr *= config.lr_decay;
    rng.shuffle(train);
    const size_t bs = static_cast<size_t>(config.batch_size);
    for (size_t start = 0; start < train.size(); start += bs) {
      std::vector<size_t> ids(train.begin() + start,
                              train.begin() + std::min(start + bs, train.size()));
      run_batch(ids, true, lr);
    }
    const double cur = eval_holdout();
    if (cur < best_loss - 1e-6) {
      best_loss = cur;
      best = model;
      if (context) context->snapshot_best();
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  model = std::move(best);
  if (context) context->restore_best();

  // Per-variable held-out loss of the final model.
  std::vector<double> per_var(static_cast<size_t>(model.n_vars()), 0.0);
  std::vector<size_t> per_var_count(static_cast<size_t>(model.n_vars()), 0);
  const size_t bs = static_cast<size_t>(config.batch_size);
  for (size_t start = 0; start < eval_ids.size(); start += bs) {
    std::vector<size_t> ids(eval_ids.begin() + start,
                            eval_ids.begin() + std::min(start + bs, eval_ids.size()));
    row_ptrs.clear();
    ctx_ptrs.clear();
    for (size_t id : ids) row_ptrs.push_back(rows[id].indices.data());
    if (context) {
      context->compute(ids, ctx_matrix);
      for (size_t i = 0; i < ids.size(); ++i) ctx_ptrs.push_back(ctx_matrix.row(static_cast<int>(i)));
    } else {
      ctx_ptrs.assign(ids.size(), nullptr);
    }
    batch.forward(model, row_ptrs, ctx_ptrs);
    const std::vector<uint8_t> mask = build_loss_mask(model, row_ptrs);
    for (size_t i = 0; i < ids.size(); ++i) {
      for (int k = 0; k < model.n_vars(); ++k) {
        if (!mask[i * static_cast<size_t>(model.n_vars()) + static_cast<size_t>(k)]) continue;
        const double p = batch.probs[static_cast<size_t>(k)].at(
            static_cast<int>(i), row_ptrs[i][k]);
        per_var[static_cast<size_t>(k)] -= std::log(std::max(p, 1e-300));
        per_var_count[static_cast<size_t>(k)]++;
      }
    }
  }
  for (int k = 0; k < model.n_vars(); ++k)
    model.holdout_loss[static_cast<size_t>(k)] =
        per_var_count[static_cast<size_t>(k)]
            ? per_var[static_cast<size_t>(k)] / per_var_count[static_cast<size_t>(k)]
            : 0.0;
  return best_loss;
}

MaskedARModel train_ar(const std::vector<EncodedRow>& rows,
                       std::vector<VariableInfo> variables, const TrainConfig& config) {
  MaskedARModel model;
  Rng rng(Rng::derive(config.seed, {0x696e6974}));
  model.init(std::move(variables), config.embed_dim, config.hidden_width, 0, rng);
  train_core(model, rows, config, nullptr);
  return model;
}

}  // namespace relcomp
