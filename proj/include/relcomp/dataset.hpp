#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relcomp/schema.hpp"

namespace relcomp {

// One typed column. Categorical and key columns are dictionary-encoded per
// column (codes index into `dict`, -1 = null); continuous columns hold
// doubles with NaN as null.
struct Column {
  ColumnType type = ColumnType::Categorical;
  std::vector<std::string> dict;
  std::unordered_map<std::string, int32_t> dict_index;
  std::vector<int32_t> codes;
  std::vector<double> values;

  size_t size() const {
    return type == ColumnType::Continuous ? values.size() : codes.size();
  }
  bool is_null(size_t row) const;
  // String form of a cell ("" for null); used by CSV export and join keys.
  std::string cell_text(size_t row) const;
  int32_t intern(const std::string& value);  // appends to dict if new
  uint64_t digest() const;
};

struct TableData {
  std::string name;
  std::vector<std::string> column_names;
  std::vector<Column> columns;
  size_t row_count = 0;
  // Per-row relationship completeness flags read from __rel_complete_<fk>
  // columns of this (parent-side) table.
  std::map<std::string, std::vector<uint8_t>> rel_complete;

  int column_index(const std::string& name) const;
  Column& column(const std::string& name);
  const Column& column(const std::string& name) const;
};

// Tuple factors for one relationship, stored on the parent table: counts[r]
// is the number of child rows of parent row r, or -1 where unknown.
struct TupleFactorColumn {
  std::string fk_id;
  std::string parent_table;
  std::vector<int32_t> counts;
};

// Join index for one relationship.
struct FkIndex {
  std::vector<int64_t> child_to_parent;            // -1 for null/dangling FK
  std::vector<std::vector<int32_t>> parent_children;  // per parent row
};

struct Dataset {
  std::vector<TableData> tables;
  std::map<std::string, TupleFactorColumn> tuple_factors;  // by ForeignKey::id
  std::map<std::string, FkIndex> fk_indexes;               // by ForeignKey::id

  bool has_table(const std::string& name) const;
  TableData& table(const std::string& name);
  const TableData& table(const std::string& name) const;
  const FkIndex& fk_index(const std::string& fk_id) const;

  // Resolves FK links into child_to_parent / parent_children. Must run after
  // rows change; ingest and the synthetic generator call it.
  void build_fk_indexes(const AnnotatedSchema& schema);
  // Content digest over sorted per-column digests (table/column membership
  // included); stable across column declaration order.
  uint64_t fingerprint() const;
};

// Loads `<table>.csv` per schema table from `dir`. Headers must cover
// exactly the declared columns (any order) plus optional __rel_complete_<fk>
// flags on parent tables. Empty fields are nulls.
Dataset ingest_csv(const AnnotatedSchema& schema, const std::string& dir);

// Fills Dataset::tuple_factors: for every relationship, each parent row gets
// the observed child count if the relationship is complete (globally, or for
// that row via __rel_complete flags); -1 otherwise.
void compute_tuple_factors(Dataset& dataset, const AnnotatedSchema& schema);

// Writes one CSV per table (declared columns only) into dir.
void export_csv(const Dataset& dataset, const AnnotatedSchema& schema,
                const std::string& dir);

}  // namespace relcomp
