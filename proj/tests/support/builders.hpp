#pragma once

// Programmatic construction of schemas, datasets and random test inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "relcomp/ar_model.hpp"
#include "relcomp/dataset.hpp"
#include "relcomp/rng.hpp"
#include "relcomp/schema.hpp"

namespace testsupport {

using relcomp::AnnotatedSchema;
using relcomp::ColumnType;
using relcomp::Dataset;
using relcomp::Rng;

// Rows given as text cells in declared column order; "" means null.
using RowGrid = std::vector<std::vector<std::string>>;

inline Dataset build_dataset(const AnnotatedSchema& schema,
                             const std::map<std::string, RowGrid>& rows_by_table,
                             bool tuple_factors = true) {
  Dataset ds;
  for (const auto& tdef : schema.tables) {
    relcomp::TableData t;
    t.name = tdef.name;
    for (const auto& c : tdef.columns) {
      t.column_names.push_back(c.name);
      relcomp::Column col;
      col.type = c.type;
      t.columns.push_back(std::move(col));
    }
    const auto it = rows_by_table.find(tdef.name);
    if (it != rows_by_table.end()) {
      for (const auto& row : it->second) {
        for (size_t c = 0; c < row.size(); ++c) {
          relcomp::Column& col = t.columns[c];
          if (col.type == ColumnType::Continuous) {
            col.values.push_back(row[c].empty()
                                     ? std::numeric_limits<double>::quiet_NaN()
                                     : std::stod(row[c]));
          } else {
            col.codes.push_back(row[c].empty() ? -1 : col.intern(row[c]));
          }
        }
        ++t.row_count;
      }
    }
    ds.tables.push_back(std::move(t));
  }
  ds.build_fk_indexes(schema);
  if (tuple_factors) relcomp::compute_tuple_factors(ds, schema);
  return ds;
}

// Two-table parent/child schema: parent(p_id, p_cat, p_num), child(c_id,
// p_id, c_cat, c_num), FK child.p_id → parent.p_id.
inline AnnotatedSchema pair_schema(bool child_incomplete = true) {
  AnnotatedSchema s;
  s.tables.push_back({"parent",
                      {{"p_id", ColumnType::Key},
                       {"p_cat", ColumnType::Categorical},
                       {"p_num", ColumnType::Continuous}},
                      "p_id"});
  s.tables.push_back({"child",
                      {{"c_id", ColumnType::Key},
                       {"p_id", ColumnType::Key},
                       {"c_cat", ColumnType::Categorical},
                       {"c_num", ColumnType::Continuous}},
                      "c_id"});
  s.relationships.push_back({"child", "p_id", "parent", "p_id"});
  if (child_incomplete) {
    s.incomplete_tables.insert("child");
    s.incomplete_relationships.insert("child.p_id");
  }
  s.validate();
  return s;
}

// Property schema mirroring a rentals domain: owner and district are
// complete, unit is incomplete and referenced by both.
inline AnnotatedSchema rentals_schema() {
  AnnotatedSchema s;
  s.tables.push_back({"owner",
                      {{"o_id", ColumnType::Key}, {"o_band", ColumnType::Categorical}},
                      "o_id"});
  s.tables.push_back({"district",
                      {{"d_id", ColumnType::Key},
                       {"density", ColumnType::Categorical},
                       {"d_score", ColumnType::Continuous}},
                      "d_id"});
  s.tables.push_back({"unit",
                      {{"u_id", ColumnType::Key},
                       {"o_id", ColumnType::Key},
                       {"d_id", ColumnType::Key},
                       {"rent", ColumnType::Continuous},
                       {"rooms", ColumnType::Categorical}},
                      "u_id"});
  s.relationships.push_back({"unit", "o_id", "owner", "o_id"});
  s.relationships.push_back({"unit", "d_id", "district", "d_id"});
  s.incomplete_tables.insert("unit");
  s.incomplete_relationships.insert("unit.o_id");
  s.incomplete_relationships.insert("unit.d_id");
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Random complete databases (for executor equivalence) and random queries.

struct RandomDb {
  AnnotatedSchema schema;
  Dataset data;
};

// Topologies over ≤ 3 tables: single, pair, chain (t2→t1, t3→t2) or fork
// (t2→t1, t3→t1). All tables complete; some FK cells null or dangling.
inline RandomDb random_db(Rng& rng, size_t max_rows = 60) {
  RandomDb db;
  const int topo = static_cast<int>(rng.below(4));
  const int n_tables = topo == 0 ? 1 : topo == 1 ? 2 : 3;

  for (int t = 0; t < n_tables; ++t) {
    const std::string name = "t" + std::to_string(t + 1);
    std::vector<relcomp::ColumnDef> cols = {{name + "_id", ColumnType::Key}};
    if (topo >= 2 && t == 2)
      cols.push_back({topo == 2 ? "t2_ref" : "t1_ref", ColumnType::Key});
    else if (t == 1)
      cols.push_back({"t1_ref", ColumnType::Key});
    cols.push_back({name + "_cat", ColumnType::Categorical});
    cols.push_back({name + "_num", ColumnType::Continuous});
    db.schema.tables.push_back({name, cols, name + "_id"});
  }
  if (n_tables >= 2) db.schema.relationships.push_back({"t2", "t1_ref", "t1", "t1_id"});
  if (topo == 2) db.schema.relationships.push_back({"t3", "t2_ref", "t2", "t2_id"});
  if (topo == 3) db.schema.relationships.push_back({"t3", "t1_ref", "t1", "t1_id"});
  db.schema.validate();

  std::map<std::string, RowGrid> rows;
  std::vector<size_t> counts;
  for (int t = 0; t < n_tables; ++t) counts.push_back(1 + rng.below(max_rows));
  for (int t = 0; t < n_tables; ++t) {
    const std::string name = "t" + std::to_string(t + 1);
    RowGrid grid;
    for (size_t r = 0; r < counts[static_cast<size_t>(t)]; ++r) {
      std::vector<std::string> row;
      row.push_back(name + "k" + std::to_string(r));
      if (db.schema.tables[static_cast<size_t>(t)].columns.size() == 4) {
        // FK cell: mostly valid, sometimes null or dangling.
        const int parent = (topo == 3 || t == 1) ? 0 : 1;
        const double u = rng.uniform();
        if (u < 0.08)
          row.push_back("");
        else if (u < 0.14)
          row.push_back("nowhere");
        else
          row.push_back("t" + std::to_string(parent + 1) + "k" +
                        std::to_string(rng.below(counts[static_cast<size_t>(parent)])));
      }
      row.push_back(rng.uniform() < 0.06 ? ""
                                         : "v" + std::to_string(rng.below(4)));
      row.push_back(rng.uniform() < 0.06
                        ? ""
                        : std::to_string(std::round(rng.uniform() * 1000.0) / 10.0));
      grid.push_back(std::move(row));
    }
    rows[name] = std::move(grid);
  }
  db.data = build_dataset(db.schema, rows);
  return db;
}

// Random SPJA text over the db's FK-connected tables.
inline std::string random_query_sql(const RandomDb& db, Rng& rng) {
  // Pick a connected table subset: start anywhere, grow by adjacency.
  std::vector<std::string> all;
  for (const auto& t : db.schema.tables) all.push_back(t.name);
  std::vector<std::string> chosen = {all[rng.below(all.size())]};
  while (chosen.size() < all.size() && rng.uniform() < 0.6) {
    std::vector<std::string> frontier;
    for (const auto& t : all) {
      if (std::find(chosen.begin(), chosen.end(), t) != chosen.end()) continue;
      for (const auto& c : chosen)
        if (db.schema.fk_between(t, c)) {
          frontier.push_back(t);
          break;
        }
    }
    if (frontier.empty()) break;
    chosen.push_back(frontier[rng.below(frontier.size())]);
  }

  auto pick_table = [&] { return chosen[rng.below(chosen.size())]; };
  const int aggk = static_cast<int>(rng.below(3));
  std::string sql = "SELECT ";
  if (aggk == 0) {
    sql += "COUNT(*)";
  } else {
    const std::string t = pick_table();
    sql += (aggk == 1 ? "SUM(" : "AVG(") + t + "." + t + "_num)";
  }
  sql += " FROM " + chosen[0];
  for (size_t i = 1; i < chosen.size(); ++i) sql += " NATURAL JOIN " + chosen[i];

  const int npred = static_cast<int>(rng.below(3));
  for (int p = 0; p < npred; ++p) {
    const std::string t = pick_table();
    sql += p == 0 ? " WHERE " : " AND ";
    if (rng.uniform() < 0.5) {
      static const char* ops[] = {"<", "<=", ">", ">=", "!=", "="};
      sql += t + "." + t + "_num " + ops[rng.below(6)] + " " +
             std::to_string(rng.below(100));
    } else {
      sql += t + "." + t + "_cat " + (rng.uniform() < 0.7 ? "=" : "!=") + " 'v" +
             std::to_string(rng.below(5)) + "'";
    }
  }
  if (rng.uniform() < 0.4) {
    const std::string t = pick_table();
    sql += " GROUP BY " + t + "." + t + "_cat";
  }
  return sql;
}

// ---------------------------------------------------------------------------
// Tiny encoded training sets for direct model tests.

inline std::vector<relcomp::VariableInfo> toy_vars(const std::vector<int32_t>& cards,
                                                   int tf_at = -1) {
  std::vector<relcomp::VariableInfo> vars;
  for (size_t i = 0; i < cards.size(); ++i) {
    relcomp::VariableInfo v;
    v.table = "t";
    v.column = "c" + std::to_string(i);
    if (static_cast<int>(i) == tf_at) {
      v.is_tuple_factor = true;
      v.column.clear();
      v.fk_id = "t.fk";
    }
    v.cardinality = cards[i];
    vars.push_back(std::move(v));
  }
  return vars;
}

inline std::vector<relcomp::EncodedRow> toy_rows(
    const std::vector<std::vector<int32_t>>& indices, int observed) {
  std::vector<relcomp::EncodedRow> rows;
  for (const auto& r : indices) rows.push_back({r, observed});
  return rows;
}

// Enumerates model parameters in the canonical visit order alongside the
// gradient tensors produced by ArBatch, for finite-difference checks.
struct ParamRef {
  double* value = nullptr;
  double analytic = 0;
};

inline std::vector<ParamRef> collect_ar_params(relcomp::MaskedARModel& m,
                                               relcomp::ArBatch& grads) {
  std::vector<ParamRef> out;
  auto add_matrix = [&](relcomp::Matrix& w, const relcomp::Matrix& g) {
    for (size_t i = 0; i < w.data.size(); ++i) out.push_back({&w.data[i], g.data[i]});
  };
  auto add_vec = [&](std::vector<double>& v, const std::vector<double>& g) {
    for (size_t i = 0; i < v.size(); ++i) out.push_back({&v[i], g[i]});
  };
  for (size_t k = 0; k < m.embeddings.size(); ++k)
    add_matrix(m.embeddings[k], grads.d_embeddings[k]);
  add_matrix(m.w1, grads.d_w1);
  add_vec(m.b1, grads.d_b1);
  add_matrix(m.w2, grads.d_w2);
  add_vec(m.b2, grads.d_b2);
  for (size_t k = 0; k < m.head_w.size(); ++k) add_matrix(m.head_w[k], grads.d_head_w[k]);
  for (size_t k = 0; k < m.head_b.size(); ++k) add_vec(m.head_b[k], grads.d_head_b[k]);
  return out;
}

}  // namespace testsupport
