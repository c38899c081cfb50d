#include "relcomp/encoding.hpp"

#include <algorithm>
#include <cmath>

#include "relcomp/errors.hpp"
#include "relcomp/fingerprint.hpp"

namespace relcomp {

int32_t AttributeEncoder::encode_categorical(const std::string& v) const {
  auto it = category_index.find(v);
  return it == category_index.end() ? unseen_index() : it->second;
}

int32_t AttributeEncoder::encode_continuous(double v) const {
  if (std::isnan(v)) return null_index();
  // Bin k covers [edges[k], edges[k+1]); first/last bins absorb out-of-range.
  const auto first = bin_edges.begin() + 1;
  const auto last = bin_edges.end() - 1;
  auto it = std::upper_bound(first, last, v);
  return static_cast<int32_t>(it - first);
}

int32_t AttributeEncoder::encode_tuple_factor(int32_t count) const {
  if (count < 0) return null_index();
  return std::min(count, tf_cap);
}

std::string AttributeEncoder::decode_categorical(int32_t idx) const {
  if (idx == null_index()) return "";
  if (idx < 0 || idx >= static_cast<int32_t>(categories.size()))
    throw ExecutionError("categorical index " + std::to_string(idx) + " out of range");
  return categories[static_cast<size_t>(idx)];
}

double AttributeEncoder::decode_continuous(int32_t idx) const {
  if (idx == null_index()) return std::nan("");
  if (idx < 0 || idx >= static_cast<int32_t>(bin_repr.size()))
    throw ExecutionError("bin index " + std::to_string(idx) + " out of range");
  return bin_repr[static_cast<size_t>(idx)];
}

int32_t AttributeEncoder::decode_tuple_factor(int32_t idx) const {
  if (idx < 0 || idx > tf_cap)
    throw ExecutionError("tuple factor index " + std::to_string(idx) + " out of range");
  return idx;
}

uint64_t AttributeEncoder::digest() const {
  Fingerprint fp;
  fp.u64(static_cast<uint64_t>(kind));
  fp.i32(cardinality);
  fp.u64(categories.size());
  for (const auto& c : categories) fp.str(c);
  fp.vec(bin_edges);
  fp.vec(bin_repr);
  fp.i32(tf_cap);
  return fp.value();
}

const AttributeEncoder& EncoderSet::column_encoder(const std::string& table,
                                                   const std::string& column) const {
  auto it = columns.find(table + "." + column);
  if (it == columns.end())
    throw ValidationError("no encoder fitted for column '" + table + "." + column + "'");
  return it->second;
}

const AttributeEncoder& EncoderSet::tf_encoder(const std::string& fk_id) const {
  auto it = tuple_factors.find(fk_id);
  if (it == tuple_factors.end())
    throw ValidationError("no tuple-factor encoder fitted for '" + fk_id + "'");
  return it->second;
}

uint64_t EncoderSet::fingerprint() const {
  Fingerprint fp;
  fp.i32(bins);
  for (const auto& [key, enc] : columns) {
    fp.str(key);
    fp.u64(enc.digest());
  }
  for (const auto& [key, enc] : tuple_factors) {
    fp.str("tf:" + key);
    fp.u64(enc.digest());
  }
  return fp.value();
}

const AttributeEncoder& encoder_for(const EncoderSet& encoders, const VariableInfo& var) {
  return var.is_tuple_factor ? encoders.tf_encoder(var.fk_id)
                             : encoders.column_encoder(var.table, var.column);
}

namespace {

AttributeEncoder fit_categorical(const Column& col) {
  std::vector<std::string> values;
  for (size_t r = 0; r < col.size(); ++r)
    if (!col.is_null(r)) values.push_back(col.cell_text(r));
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  AttributeEncoder enc;
  enc.kind = AttributeEncoder::Kind::Categorical;
  enc.categories = std::move(values);
  for (size_t i = 0; i < enc.categories.size(); ++i)
    enc.category_index.emplace(enc.categories[i], static_cast<int32_t>(i));
  enc.cardinality = static_cast<int32_t>(enc.categories.size()) + 2;
  return enc;
}

AttributeEncoder fit_continuous(const Column& col, int bins, const std::string& where) {
  std::vector<double> values;
  for (double v : col.values)
    if (!std::isnan(v)) values.push_back(v);
  if (values.empty())
    throw ValidationError("cannot fit encoder for all-null column '" + where + "'");
  std::sort(values.begin(), values.end());

  const size_t n = values.size();
  std::vector<double> edges;
  edges.push_back(values.front());
  for (int i = 1; i < bins; ++i) {
    size_t rank = (static_cast<size_t>(i) * n) / static_cast<size_t>(bins);
    edges.push_back(values[std::min(rank, n - 1)]);
  }
  edges.push_back(values.back());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (edges.size() < 2) {  // constant column: one degenerate bin
    edges = {values.front(), values.front()};
  }

  AttributeEncoder enc;
  enc.kind = AttributeEncoder::Kind::BinnedContinuous;
  enc.bin_edges = std::move(edges);
  const size_t n_bins = enc.bin_edges.size() - 1;
  enc.cardinality = static_cast<int32_t>(n_bins) + 2;
  std::vector<double> sums(n_bins, 0.0);
  std::vector<size_t> counts(n_bins, 0);
  for (double v : values) {
    auto b = static_cast<size_t>(enc.encode_continuous(v));
    sums[b] += v;
    counts[b]++;
  }
  enc.bin_repr.resize(n_bins);
  for (size_t b = 0; b < n_bins; ++b) {
    enc.bin_repr[b] = counts[b] ? sums[b] / static_cast<double>(counts[b])
                                : 0.5 * (enc.bin_edges[b] + enc.bin_edges[b + 1]);
  }
  return enc;
}

AttributeEncoder fit_tuple_factor(const TupleFactorColumn& tf, const FkIndex& idx) {
  std::vector<int32_t> counts;
  for (int32_t c : tf.counts)
    if (c >= 0) counts.push_back(c);
  if (counts.empty()) {
    // No row has a known tuple factor; fall back to observed child counts so
    // the variable still has a usable support (it trains as fully masked).
    for (const auto& children : idx.parent_children)
      counts.push_back(static_cast<int32_t>(children.size()));
    if (counts.empty()) counts.push_back(1);
  }
  std::sort(counts.begin(), counts.end());
  const size_t rank =
      static_cast<size_t>(std::floor(0.995 * static_cast<double>(counts.size() - 1)));
  AttributeEncoder enc;
  enc.kind = AttributeEncoder::Kind::TupleFactor;
  enc.tf_cap = std::max(counts[rank], 1);
  enc.cardinality = enc.tf_cap + 1 + 2;
  return enc;
}

}  // namespace

EncoderSet fit_encoders(const Dataset& dataset, const AnnotatedSchema& schema, int bins) {
  if (bins < 2) throw ValidationError("encoder bin count must be at least 2");
  EncoderSet out;
  out.bins = bins;
  for (const auto& tdef : schema.tables) {
    const TableData& t = dataset.table(tdef.name);
    for (const auto& cdef : tdef.columns) {
      if (cdef.type == ColumnType::Key) continue;
      const Column& col = t.column(cdef.name);
      const std::string key = tdef.name + "." + cdef.name;
      out.columns[key] = cdef.type == ColumnType::Categorical
                             ? fit_categorical(col)
                             : fit_continuous(col, bins, key);
    }
  }
  for (const auto& fk : schema.relationships) {
    auto it = dataset.tuple_factors.find(fk.id());
    if (it == dataset.tuple_factors.end()) continue;
    out.tuple_factors[fk.id()] = fit_tuple_factor(it->second, dataset.fk_index(fk.id()));
  }
  return out;
}

std::vector<int32_t> encode_table_attrs(const Dataset& dataset,
                                        const AnnotatedSchema& schema,
                                        const EncoderSet& encoders,
                                        const std::string& table, size_t row) {
  const TableDef& tdef = schema.table(table);
  const TableData& t = dataset.table(table);
  std::vector<int32_t> out;
  for (const auto& cdef : tdef.columns) {
    if (cdef.type == ColumnType::Key) continue;
    const AttributeEncoder& enc = encoders.column_encoder(table, cdef.name);
    const Column& col = t.column(cdef.name);
    if (cdef.type == ColumnType::Continuous)
      out.push_back(enc.encode_continuous(col.values[row]));
    else
      out.push_back(col.is_null(row) ? enc.null_index()
                                     : enc.encode_categorical(col.cell_text(row)));
  }
  return out;
}

namespace {

// Canonical key for deterministic, order-independent child sorting.
void tree_key(const EncodedTree& t, std::string& out) {
  for (int32_t v : t.attrs) {
    out += std::to_string(v);
    out += ',';
  }
  for (const auto& g : t.groups) {
    out += '[';
    for (const auto& c : g.children) {
      tree_key(c, out);
      out += ';';
    }
    out += ']';
  }
}

EncodedTree encode_node(const Dataset& dataset, const AnnotatedSchema& schema,
                        const EncoderSet& encoders, const WalkNode& walk, size_t row,
                        const TreeOptions& opts) {
  EncodedTree node;
  node.attrs = encode_table_attrs(dataset, schema, encoders, walk.table, row);
  for (const auto& child_walk : walk.children) {
    EncodedTree::Group group;
    group.table = child_walk.table;
    group.fk_id = child_walk.via.id();
    group.fanout = child_walk.fanout;

    const FkIndex& idx = dataset.fk_index(child_walk.via.id());
    std::vector<size_t> child_rows;
    if (child_walk.fanout) {
      for (int32_t c : idx.parent_children[row]) child_rows.push_back(static_cast<size_t>(c));
    } else {
      int64_t parent = idx.child_to_parent[row];
      if (parent >= 0) child_rows.push_back(static_cast<size_t>(parent));
    }
    for (size_t child_row : child_rows) {
      if (child_walk.table == opts.exclude_table &&
          static_cast<int64_t>(child_row) == opts.exclude_row)
        continue;
      group.children.push_back(
          encode_node(dataset, schema, encoders, child_walk, child_row, opts));
    }

    // Canonical order first, so any subsample is a deterministic function of
    // the child *set* (not of dataset row order).
    std::vector<std::pair<std::string, size_t>> keyed(group.children.size());
    for (size_t i = 0; i < group.children.size(); ++i) {
      keyed[i].second = i;
      tree_key(group.children[i], keyed[i].first);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<EncodedTree> ordered;
    ordered.reserve(keyed.size());
    for (const auto& [key, i] : keyed) ordered.push_back(std::move(group.children[i]));
    group.children = std::move(ordered);

    if (opts.max_children > 0 &&
        static_cast<int>(group.children.size()) > opts.max_children && opts.rng) {
      std::vector<size_t> pick(group.children.size());
      for (size_t i = 0; i < pick.size(); ++i) pick[i] = i;
      opts.rng->shuffle(pick);
      pick.resize(static_cast<size_t>(opts.max_children));
      std::sort(pick.begin(), pick.end());
      std::vector<EncodedTree> sampled;
      sampled.reserve(pick.size());
      for (size_t i : pick) sampled.push_back(std::move(group.children[i]));
      group.children = std::move(sampled);
    }
    node.groups.push_back(std::move(group));
  }
  return node;
}

}  // namespace

EncodedTree encode_evidence_tree(const Dataset& dataset, const AnnotatedSchema& schema,
                                 const EncoderSet& encoders, const WalkNode& walk,
                                 size_t root_row, const TreeOptions& opts) {
  return encode_node(dataset, schema, encoders, walk, root_row, opts);
}

}  // namespace relcomp
