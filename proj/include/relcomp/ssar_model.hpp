#pragma once

#include <map>
#include <string>
#include <vector>

#include "relcomp/ar_model.hpp"
#include "relcomp/encoding.hpp"
#include "relcomp/schema.hpp"

namespace relcomp {

// Node embedder shared by every occurrence of one table in the evidence
// tree, regardless of depth. Feature layout is fixed per table:
//   [attr embeddings | mean-pooled child vectors | log1p(child count)]
// so pooling keeps the width constant and the weights can be shared.
struct TableNodeEncoder {
  std::string table;
  std::vector<std::string> attrs;       // non-key columns, declared order
  std::vector<Matrix> attr_embeddings;  // per attr: cardinality × embed_dim
  Matrix w_in;                          // feat_dim × hidden
  std::vector<double> b_in;
  Matrix w_out;                         // hidden × node_dim
  std::vector<double> b_out;

  int embed_dim = 0;
  int node_dim = 0;
  int feat_dim() const {
    return static_cast<int>(attrs.size()) * embed_dim + node_dim + 1;
  }
};

// Permutation-invariant encoder from an evidence tree to a fixed-width
// context vector. Children are embedded bottom-up and mean-pooled into their
// parent's features; at the root each child group contributes
// [pool, log1p(count)] and the concatenation is linearly projected.
class TreeEncoder {
 public:
  int embed_dim = 0;   // attribute embedding width inside the tree
  int hidden = 0;      // node hidden width
  int node_dim = 0;    // node output width (= pooled child width)
  int context_dim = 0;
  int n_groups = 0;  // root child groups, in walk-template order

  std::map<std::string, TableNodeEncoder> tables;
  Matrix w_root;  // n_groups*(node_dim+1) × context_dim
  std::vector<double> b_root;

  void init(const AnnotatedSchema& schema, const EncoderSet& encoders,
            const WalkNode& walk, const TrainConfig& config, Rng& rng);

  // Forward activations kept for the backward pass.
  struct NodeAct {
    const EncodedTree* node = nullptr;
    const TableNodeEncoder* enc = nullptr;
    std::vector<double> feat, h, v;
    std::vector<NodeAct> children;
  };
  struct RootAct {
    std::vector<std::vector<NodeAct>> groups;
    std::vector<double> concat;
  };

  // Context for one tree; records activations when `act` is non-null.
  std::vector<double> forward(const EncodedTree& tree, RootAct* act = nullptr) const;
  // Accumulates parameter gradients into `grads` (a zeroed clone of *this).
  void backward(const RootAct& act, const double* d_context, TreeEncoder& grads) const;

  // All trainable tensors in a fixed order (update loops, serialization).
  void collect(std::vector<Matrix*>& matrices,
               std::vector<std::vector<double>*>& vectors);
  TreeEncoder zero_clone() const;

 private:
  void forward_node(const EncodedTree& node, const TableNodeEncoder& enc,
                    std::vector<double>& out, NodeAct* act) const;
  void backward_node(const NodeAct& act, const std::vector<double>& d_v,
                     TreeEncoder& grads) const;
};

// Set-structured autoregressive model: a masked AR core whose context block
// is produced by a tree encoder over the evidence neighbourhood.
struct SSARModel {
  MaskedARModel ar;
  TreeEncoder tree;
  WalkNode walk;  // template the evidence trees follow

  std::vector<double> context_for(const EncodedTree& tree_evidence) const {
    return tree.forward(tree_evidence);
  }
  EncodedRow sample_completion(const EncodedRow& row, const EncodedTree& tree_evidence,
                               Rng& rng) const;
};

// Context source backed by pre-encoded evidence trees, one per training row.
// Owns the momentum state and best-weight snapshot of the tree encoder.
class TreeContextSource : public ContextSource {
 public:
  TreeContextSource(TreeEncoder* encoder, const std::vector<EncodedTree>* trees);

  int dim() const override { return encoder_->context_dim; }
  void compute(const std::vector<size_t>& row_ids, Matrix& out) override;
  void apply_gradients(const std::vector<size_t>& row_ids, const Matrix& d_context,
                       double lr, double momentum) override;
  void snapshot_best() override { best_ = *encoder_; }
  void restore_best() override { *encoder_ = best_; }

 private:
  TreeEncoder* encoder_;
  const std::vector<EncodedTree>* trees_;
  std::vector<TreeEncoder::RootAct> batch_acts_;
  std::vector<size_t> batch_ids_;
  TreeEncoder velocity_;
  TreeEncoder best_;
};

// Trains the AR core and the tree encoder jointly. `trees[i]` is the
// evidence tree of `rows[i]`.
SSARModel train_ssar(const std::vector<EncodedRow>& rows,
                     const std::vector<EncodedTree>& trees,
                     std::vector<VariableInfo> variables, const AnnotatedSchema& schema,
                     const EncoderSet& encoders, const WalkNode& walk,
                     const TrainConfig& config);

}  // namespace relcomp
