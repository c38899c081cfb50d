#include "relcomp/ssar_model.hpp"

#include <algorithm>
#include <cmath>

#include "relcomp/errors.hpp"

namespace relcomp {

namespace {

void glorot(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / (w.rows + w.cols));
  for (double& v : w.data) v = (rng.uniform() * 2.0 - 1.0) * limit;
}

void collect_tables(const WalkNode& node, std::vector<std::string>& out) {
  for (const auto& child : node.children) {
    if (std::find(out.begin(), out.end(), child.table) == out.end())
      out.push_back(child.table);
    collect_tables(child, out);
  }
}

}  // namespace

void TreeEncoder::init(const AnnotatedSchema& schema, const EncoderSet& encoders,
                       const WalkNode& walk, const TrainConfig& config, Rng& rng) {
  embed_dim = config.tree_embed_dim;
  hidden = config.child_hidden;
  node_dim = config.context_dim;
  context_dim = config.context_dim;
  n_groups = static_cast<int>(walk.children.size());

  std::vector<std::string> names;
  collect_tables(walk, names);
  std::sort(names.begin(), names.end());
  tables.clear();
  const double embed_limit = std::sqrt(3.0 / embed_dim);
  for (const auto& name : names) {
    TableNodeEncoder enc;
    enc.table = name;
    enc.attrs = schema.table(name).attribute_columns();
    enc.embed_dim = embed_dim;
    enc.node_dim = node_dim;
    for (const auto& col : enc.attrs) {
      const AttributeEncoder& ae = encoders.column_encoder(name, col);
      Matrix e(ae.cardinality, embed_dim);
      for (double& v : e.data) v = (rng.uniform() * 2.0 - 1.0) * embed_limit;
      enc.attr_embeddings.push_back(std::move(e));
    }
    enc.w_in = Matrix(enc.feat_dim(), hidden);
    enc.w_out = Matrix(hidden, node_dim);
    glorot(enc.w_in, rng);
    glorot(enc.w_out, rng);
    enc.b_in.assign(static_cast<size_t>(hidden), 0.0);
    enc.b_out.assign(static_cast<size_t>(node_dim), 0.0);
    tables.emplace(name, std::move(enc));
  }

  w_root = Matrix(n_groups * (node_dim + 1), context_dim);
  glorot(w_root, rng);
  b_root.assign(static_cast<size_t>(context_dim), 0.0);
}

void TreeEncoder::forward_node(const EncodedTree& node, const TableNodeEncoder& enc,
                               std::vector<double>& out, NodeAct* act) const {
  std::vector<double> feat(static_cast<size_t>(enc.feat_dim()), 0.0);
  for (size_t a = 0; a < enc.attrs.size(); ++a) {
    const double* e = enc.attr_embeddings[a].row(node.attrs[a]);
    std::copy(e, e + embed_dim, feat.begin() + static_cast<long>(a) * embed_dim);
  }
  // Children of every group pool together; inner structure below the root is
  // a flat multiset of neighbours.
  const size_t pool_off = enc.attrs.size() * static_cast<size_t>(embed_dim);
  int count = 0;
  std::vector<NodeAct> child_acts;
  for (const auto& group : node.groups) {
    auto it = tables.find(group.table);
    if (it == tables.end())
      throw ExecutionError("evidence tree visits table '" + group.table +
                           "' missing from the tree encoder");
    for (const auto& child : group.children) {
      std::vector<double> cv;
      NodeAct* ca = nullptr;
      if (act) {
        child_acts.emplace_back();
        ca = &child_acts.back();
      }
      forward_node(child, it->second, cv, ca);
      for (int j = 0; j < node_dim; ++j) feat[pool_off + static_cast<size_t>(j)] += cv[static_cast<size_t>(j)];
      ++count;
    }
  }
  if (count > 0)
    for (int j = 0; j < node_dim; ++j) feat[pool_off + static_cast<size_t>(j)] /= count;
  feat.back() = std::log1p(static_cast<double>(count));

  std::vector<double> h(static_cast<size_t>(hidden), 0.0);
  for (int i = 0; i < enc.feat_dim(); ++i) {
    const double f = feat[static_cast<size_t>(i)];
    if (f == 0.0) continue;
    const double* wr = enc.w_in.row(i);
    for (int j = 0; j < hidden; ++j) h[static_cast<size_t>(j)] += f * wr[j];
  }
  for (int j = 0; j < hidden; ++j)
    h[static_cast<size_t>(j)] = std::max(0.0, h[static_cast<size_t>(j)] + enc.b_in[static_cast<size_t>(j)]);

  out.assign(static_cast<size_t>(node_dim), 0.0);
  for (int i = 0; i < hidden; ++i) {
    const double hv = h[static_cast<size_t>(i)];
    if (hv == 0.0) continue;
    const double* wr = enc.w_out.row(i);
    for (int j = 0; j < node_dim; ++j) out[static_cast<size_t>(j)] += hv * wr[j];
  }
  for (int j = 0; j < node_dim; ++j) out[static_cast<size_t>(j)] += enc.b_out[static_cast<size_t>(j)];

  if (act) {
    act->node = &node;
    act->enc = &enc;
    act->feat = std::move(feat);
    act->h = std::move(h);
    act->v = out;
    act->children = std::move(child_acts);
  }
}

std::vector<double> TreeEncoder::forward(const EncodedTree& tree, RootAct* act) const {
  std::vector<double> concat(static_cast<size_t>(n_groups) * (node_dim + 1), 0.0);
  if (act) {
    act->groups.clear();
    act->groups.resize(tree.groups.size());
  }
  if (static_cast<int>(tree.groups.size()) != n_groups)
    throw ExecutionError("evidence tree group count does not match the walk template");
  for (int g = 0; g < n_groups; ++g) {
    const auto& group = tree.groups[static_cast<size_t>(g)];
    auto it = tables.find(group.table);
    if (it == tables.end())
      throw ExecutionError("evidence tree visits table '" + group.table +
                           "' missing from the tree encoder");
    double* pool = concat.data() + static_cast<size_t>(g) * (node_dim + 1);
    for (const auto& child : group.children) {
      std::vector<double> cv;
      NodeAct* ca = nullptr;
      if (act) {
        act->groups[static_cast<size_t>(g)].emplace_back();
        ca = &act->groups[static_cast<size_t>(g)].back();
      }
      forward_node(child, it->second, cv, ca);
      for (int j = 0; j < node_dim; ++j) pool[j] += cv[static_cast<size_t>(j)];
    }
    const double count = static_cast<double>(group.children.size());
    if (count > 0)
      for (int j = 0; j < node_dim; ++j) pool[j] /= count;
    pool[node_dim] = std::log1p(count);
  }

  std::vector<double> ctx(b_root.begin(), b_root.end());
  for (int i = 0; i < w_root.rows; ++i) {
    const double c = concat[static_cast<size_t>(i)];
    if (c == 0.0) continue;
    const double* wr = w_root.row(i);
    for (int j = 0; j < context_dim; ++j) ctx[static_cast<size_t>(j)] += c * wr[j];
  }
  if (act) act->concat = std::move(concat);
  return ctx;
}

void TreeEncoder::backward_node(const NodeAct& act, const std::vector<double>& d_v,
                                TreeEncoder& grads) const {
  const TableNodeEncoder& enc = *act.enc;
  TableNodeEncoder& g = grads.tables.at(enc.table);

  std::vector<double> d_zin(static_cast<size_t>(hidden), 0.0);
  for (int i = 0; i < hidden; ++i) {
    const double hv = act.h[static_cast<size_t>(i)];
    double* gw = g.w_out.row(i);
    double acc = 0.0;
    const double* wr = enc.w_out.row(i);
    for (int j = 0; j < node_dim; ++j) {
      gw[j] += hv * d_v[static_cast<size_t>(j)];
      acc += wr[j] * d_v[static_cast<size_t>(j)];
    }
    d_zin[static_cast<size_t>(i)] = hv > 0.0 ? acc : 0.0;
  }
  for (int j = 0; j < node_dim; ++j) g.b_out[static_cast<size_t>(j)] += d_v[static_cast<size_t>(j)];

  std::vector<double> d_feat(static_cast<size_t>(enc.feat_dim()), 0.0);
  for (int i = 0; i < enc.feat_dim(); ++i) {
    const double f = act.feat[static_cast<size_t>(i)];
    double* gw = g.w_in.row(i);
    const double* wr = enc.w_in.row(i);
    double acc = 0.0;
    for (int j = 0; j < hidden; ++j) {
      gw[j] += f * d_zin[static_cast<size_t>(j)];
      acc += wr[j] * d_zin[static_cast<size_t>(j)];
    }
    d_feat[static_cast<size_t>(i)] = acc;
  }
  for (int j = 0; j < hidden; ++j) g.b_in[static_cast<size_t>(j)] += d_zin[static_cast<size_t>(j)];

  for (size_t a = 0; a < enc.attrs.size(); ++a) {
    double* ge = g.attr_embeddings[a].row(act.node->attrs[a]);
    const double* df = d_feat.data() + a * static_cast<size_t>(embed_dim);
    for (int j = 0; j < embed_dim; ++j) ge[j] += df[j];
  }

  size_t n_children = 0;
  for (const auto& group : act.node->groups) n_children += group.children.size();
  if (n_children == 0) return;
  const size_t pool_off = enc.attrs.size() * static_cast<size_t>(embed_dim);
  std::vector<double> d_child(static_cast<size_t>(node_dim));
  for (int j = 0; j < node_dim; ++j)
    d_child[static_cast<size_t>(j)] =
        d_feat[pool_off + static_cast<size_t>(j)] / static_cast<double>(n_children);
  for (const auto& child : act.children) backward_node(child, d_child, grads);
}

void TreeEncoder::backward(const RootAct& act, const double* d_context,
                           TreeEncoder& grads) const {
  std::vector<double> d_concat(act.concat.size(), 0.0);
  for (int i = 0; i < w_root.rows; ++i) {
    const double c = act.concat[static_cast<size_t>(i)];
    double* gw = grads.w_root.row(i);
    const double* wr = w_root.row(i);
    double acc = 0.0;
    for (int j = 0; j < context_dim; ++j) {
      gw[j] += c * d_context[j];
      acc += wr[j] * d_context[j];
    }
    d_concat[static_cast<size_t>(i)] = acc;
  }
  for (int j = 0; j < context_dim; ++j) grads.b_root[static_cast<size_t>(j)] += d_context[j];

  for (size_t g = 0; g < act.groups.size(); ++g) {
    const auto& children = act.groups[g];
    if (children.empty()) continue;
    std::vector<double> d_pool(static_cast<size_t>(node_dim));
    for (int j = 0; j < node_dim; ++j)
      d_pool[static_cast<size_t>(j)] =
          d_concat[g * static_cast<size_t>(node_dim + 1) + static_cast<size_t>(j)] /
          static_cast<double>(children.size());
    for (const auto& child : children) backward_node(child, d_pool, grads);
  }
}

void TreeEncoder::collect(std::vector<Matrix*>& matrices,
                          std::vector<std::vector<double>*>& vectors) {
  for (auto& [name, enc] : tables) {
    for (auto& e : enc.attr_embeddings) matrices.push_back(&e);
    matrices.push_back(&enc.w_in);
    matrices.push_back(&enc.w_out);
    vectors.push_back(&enc.b_in);
    vectors.push_back(&enc.b_out);
  }
  matrices.push_back(&w_root);
  vectors.push_back(&b_root);
}

TreeEncoder TreeEncoder::zero_clone() const {
  TreeEncoder out = *this;
  std::vector<Matrix*> ms;
  std::vector<std::vector<double>*> vs;
  out.collect(ms, vs);
  for (Matrix* m : ms) m->zero();
  for (auto* v : vs) std::fill(v->begin(), v->end(), 0.0);
  return out;
}

EncodedRow SSARModel::sample_completion(const EncodedRow& row,
                                        const EncodedTree& tree_evidence,
                                        Rng& rng) const {
  const std::vector<double> ctx = tree.forward(tree_evidence);
  return ar.sample_completion(row, rng, ctx);
}

TreeContextSource::TreeContextSource(TreeEncoder* encoder,
                                     const std::vector<EncodedTree>* trees)
    : encoder_(encoder),
      trees_(trees),
      velocity_(encoder->zero_clone()),
      best_(*encoder) {}

void TreeContextSource::compute(const std::vector<size_t>& row_ids, Matrix& out) {
  out = Matrix(static_cast<int>(row_ids.size()), encoder_->context_dim);
  batch_acts_.assign(row_ids.size(), {});
  batch_ids_ = row_ids;
  for (size_t i = 0; i < row_ids.size(); ++i) {
    const std::vector<double> ctx =
        encoder_->forward((*trees_)[row_ids[i]], &batch_acts_[i]);
    std::copy(ctx.begin(), ctx.end(), out.row(static_cast<int>(i)));
  }
}

void TreeContextSource::apply_gradients(const std::vector<size_t>& row_ids,
                                        const Matrix& d_context, double lr,
                                        double momentum) {
  if (row_ids != batch_ids_)
    throw TrainingError("context gradients do not match the last computed batch");
  TreeEncoder grads = encoder_->zero_clone();
  for (size_t i = 0; i < row_ids.size(); ++i)
    encoder_->backward(batch_acts_[i], d_context.row(static_cast<int>(i)), grads);

  std::vector<Matrix*> wm, vm, gm;
  std::vector<std::vector<double>*> wv, vv, gv;
  encoder_->collect(wm, wv);
  velocity_.collect(vm, vv);
  grads.collect(gm, gv);
  for (size_t p = 0; p < wm.size(); ++p)
    for (size_t i = 0; i < wm[p]->data.size(); ++i) {
      vm[p]->data[i] = momentum * vm[p]->data[i] - lr * gm[p]->data[i];
      wm[p]->data[i] += vm[p]->data[i];
    }
  for (size_t p = 0; p < wv.size(); ++p)
    for (size_t i = 0; i < wv[p]->size(); ++i) {
      (*vv[p])[i] = momentum * (*vv[p])[i] - lr * (*gv[p])[i];
      (*wv[p])[i] += (*vv[p])[i];
    }
}

SSARModel train_ssar(const std::vector<EncodedRow>& rows,
                     const std::vector<EncodedTree>& trees,
                     std::vector<VariableInfo> variables, const AnnotatedSchema& schema,
                     const EncoderSet& encoders, const WalkNode& walk,
                     const TrainConfig& config) {
  if (rows.size() != trees.size())
    throw TrainingError("every training row needs exactly one evidence tree");
  SSARModel model;
  model.walk = walk;
  Rng rng(Rng::derive(config.seed, {0x73736172}));
  model.tree.init(schema, encoders, walk, config, rng);
  model.ar.init(std::move(variables), config.embed_dim, config.hidden_width,
                config.context_dim, rng);
  TreeContextSource source(&model.tree, &trees);
  train_core(model.ar, rows, config, &source);
  return model;
}

}  // namespace relcomp
