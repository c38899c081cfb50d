#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "relcomp/dataset.hpp"
#include "relcomp/rng.hpp"
#include "relcomp/schema.hpp"

namespace relcomp {

// Maps one attribute between value space and the dense index space the
// models consume. Every encoder reserves the two top indices for NULL and
// UNSEEN (in that order), so cardinality = values + 2.
struct AttributeEncoder {
  enum class Kind { Categorical, BinnedContinuous, TupleFactor };
  Kind kind = Kind::Categorical;

  // Categorical: observed values in lexicographic order.
  std::vector<std::string> categories;
  std::unordered_map<std::string, int32_t> category_index;

  // Binned continuous: strictly increasing edges (size = bins + 1) and the
  // mean training value per bin.
  std::vector<double> bin_edges;
  std::vector<double> bin_repr;

  // Tuple factor: supported counts are 0..tf_cap.
  int32_t tf_cap = 0;

  int32_t cardinality = 0;
  int32_t value_count() const { return cardinality - 2; }
  int32_t null_index() const { return cardinality - 2; }
  int32_t unseen_index() const { return cardinality - 1; }

  int32_t encode_categorical(const std::string& v) const;
  int32_t encode_continuous(double v) const;  // NaN -> NULL; out of range clamps
  int32_t encode_tuple_factor(int32_t count) const;  // negative -> NULL; clamps at cap
  std::string decode_categorical(int32_t idx) const;
  double decode_continuous(int32_t idx) const;  // bin mean
  int32_t decode_tuple_factor(int32_t idx) const;

  uint64_t digest() const;
};

struct EncoderSet {
  int bins = 64;
  std::map<std::string, AttributeEncoder> columns;        // "table.column"
  std::map<std::string, AttributeEncoder> tuple_factors;  // ForeignKey::id

  const AttributeEncoder& column_encoder(const std::string& table,
                                         const std::string& column) const;
  const AttributeEncoder& tf_encoder(const std::string& fk_id) const;
  // Content digest of the full encoder state; embedded in model artifacts to
  // detect incompatible loads.
  uint64_t fingerprint() const;
};

// Fits encoders for every non-key column and every relationship's tuple
// factor. Continuous columns get `bins` equi-depth bins over non-null
// training values; tuple-factor support is capped at the 99.5th percentile
// of observed counts.
EncoderSet fit_encoders(const Dataset& dataset, const AnnotatedSchema& schema,
                        int bins = 64);

// One model variable: either a table attribute or a relationship's tuple
// factor. Models, planner and completion share this descriptor.
struct VariableInfo {
  std::string table;
  std::string column;  // empty for tuple factors
  bool is_tuple_factor = false;
  std::string fk_id;  // set for tuple factors
  int32_t cardinality = 0;

  std::string label() const {
    return is_tuple_factor ? "tf:" + fk_id : table + "." + column;
  }
};

const AttributeEncoder& encoder_for(const EncoderSet& encoders, const VariableInfo& var);

// A row in model index space. Positions [0, observed) hold evidence values;
// the rest are to be synthesized (their indices are meaningless on input).
struct EncodedRow {
  std::vector<int32_t> indices;
  int observed = 0;
};

// Set evidence around one evidence tuple: the node's own attributes plus
// child groups per walk-template edge.
struct EncodedTree {
  std::vector<int32_t> attrs;
  struct Group {
    std::string table;
    std::string fk_id;
    bool fanout = false;
    std::vector<EncodedTree> children;
  };
  std::vector<Group> groups;
};

// Encodes the non-key attributes of one dataset row in declared column
// order.
std::vector<int32_t> encode_table_attrs(const Dataset& dataset,
                                        const AnnotatedSchema& schema,
                                        const EncoderSet& encoders,
                                        const std::string& table, size_t row);

struct TreeOptions {
  // Excluded row (self-evidence must not leak the row being predicted).
  std::string exclude_table;
  int64_t exclude_row = -1;
  // Cap on children per group; larger groups are subsampled with `rng`.
  int max_children = 20;
  Rng* rng = nullptr;
};

// Materializes the evidence tree for one root row following a walk
// template. Children are canonicalized (sorted by encoded content) so the
// encoding is independent of dataset row order.
EncodedTree encode_evidence_tree(const Dataset& dataset, const AnnotatedSchema& schema,
                                 const EncoderSet& encoders, const WalkNode& walk,
                                 size_t root_row, const TreeOptions& opts = {});

}  // namespace relcomp
