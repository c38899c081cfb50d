#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "relcomp/dataset.hpp"
#include "relcomp/planner.hpp"
#include "relcomp/schema.hpp"

namespace relcomp {

// One synthesized tuple. Cells are encoder indices; `dists` keeps the model
// head distribution each cell was drawn from (empty for exact cells, e.g.
// after nearest-neighbor replacement) so the query layer can bound its
// uncertainty. `entry_key` names the catalog entry that produced the row.
struct SynthRow {
  int32_t table = -1;  // position in CompletedJoin::tables
  std::vector<int32_t> attrs;
  std::vector<std::vector<float>> dists;
  std::string entry_key;
  int64_t nn_row = -1;  // adopted dataset row after NN replacement
  std::string pk;       // assigned primary key text

  bool exact_cells() const { return nn_row >= 0; }
};

// A (possibly completed) join over `tables`. rows[r][t] references table t's
// tuple in join row r: a dataset row id, or -(synth_index + 2) pointing into
// `synth`. Weights make aggregates over the join match query semantics after
// reweighting operations.
struct CompletedJoin {
  std::vector<std::string> tables;
  std::vector<SynthRow> synth;
  std::vector<std::vector<int64_t>> rows;
  std::vector<double> weights;

  size_t existing_rows = 0;     // rows with no synthesized reference
  size_t synthesized_rows = 0;  // rows referencing ≥ 1 synthesized tuple
  int tf_clamp_warnings = 0;    // predicted TF below observed partner count

  static bool is_synth_ref(int64_t ref) { return ref <= -2; }
  static size_t synth_index(int64_t ref) { return static_cast<size_t>(-ref - 2); }
  static int64_t synth_ref(size_t index) { return -static_cast<int64_t>(index) - 2; }

  int table_pos(const std::string& table) const;  // -1 if absent
  bool row_has_synth(size_t row) const;
  void recount_origins();
  uint64_t fingerprint() const;
};

// Equality predicates pushed into the walk; they filter the root evidence
// table before any synthesis. All other predicates apply post-completion.
struct CompletionFilters {
  // "table.column" → required cell text; entries naming the walk root apply
  std::map<std::string, std::string> root_equals;
};

// Walks the query path per the completion plan: fan-out hops predict a tuple
// factor per evidence row, clamp the deficit against observed partners and
// synthesize the difference; n:1 hops synthesize only for rows without a
// partner. Synthesized rows of complete tables are replaced by their nearest
// real neighbor. Output covers the query path plus any evidence tables the
// chosen models need.
CompletedJoin incompleteness_join(const Dataset& dataset, const AnnotatedSchema& schema,
                                  const ModelCatalog& catalog, const CompletionPlan& plan,
                                  const std::vector<std::string>& query_tables,
                                  const CompletionFilters& filters = {});

// Replaces every synthesized tuple of `table` (which must be complete) by
// the nearest existing row: categoricals one-hot, continuous min-max scaled
// to [0,1], approximate index within factor (1+epsilon), queried in batches.
void nearest_neighbor_replace(CompletedJoin& join, const Dataset& dataset,
                              const AnnotatedSchema& schema, const EncoderSet& encoders,
                              const std::string& table, int batch = 1024,
                              double epsilon = 0.1, uint64_t seed = 7);

// incompleteness_join plus a top-up pass for later incomplete tables: real
// rows the walk never joined (orphaned by missing link data) replace
// synthesized slots, matched by nearest neighbor; never-referenced parents
// claim their expected tuple-factor share of slots.
CompletedJoin complete_multi_incomplete(const Dataset& dataset,
                                        const AnnotatedSchema& schema,
                                        const ModelCatalog& catalog,
                                        const CompletionPlan& plan,
                                        const std::vector<std::string>& query_tables,
                                        const CompletionFilters& filters = {});

// Completes over the full walk, then projects to the query path: each row's
// weight is divided by the number of walk rows collapsing onto it, so
// weighted aggregates match the query-path join. This is the entry point
// query execution uses (projection is the identity when the walk introduced
// no extra tables).
CompletedJoin complete_with_additional_tables(const Dataset& dataset,
                                              const AnnotatedSchema& schema,
                                              const ModelCatalog& catalog,
                                              const CompletionPlan& plan,
                                              const std::vector<std::string>& query_tables,
                                              const CompletionFilters& filters = {});

// Synthesizes `target` via every plan and combines: existing rows are
// deduplicated by identity, synthesized contributions are scaled so the
// combined synthesized mass matches the per-path mean, and path-exclusive
// rows survive.
CompletedJoin multi_path_complete(const Dataset& dataset, const AnnotatedSchema& schema,
                                  const ModelCatalog& catalog,
                                  const std::vector<CompletionPlan>& plans,
                                  const std::string& target);

// Cell access shared by query execution, metrics and CSV export. Returns
// the decoded text of a cell ("" for null) and, for continuous columns, the
// numeric value (NaN for null).
std::string join_cell_text(const CompletedJoin& join, const Dataset& dataset,
                           const AnnotatedSchema& schema, const EncoderSet& encoders,
                           size_t row, const std::string& table, const std::string& column);
double join_cell_value(const CompletedJoin& join, const Dataset& dataset,
                       const AnnotatedSchema& schema, const EncoderSet& encoders,
                       size_t row, const std::string& table, const std::string& column);

// Precomputed completions for every joinable (complete, incomplete) pair.
// Results are cached on disk under $RELCOMP_CACHE (when set) keyed by
// dataset fingerprint, pair and plan fingerprint; a later identical request
// is served byte-identically from the cache.
struct OfflineCompletion {
  std::string complete_table, incomplete_table;
  CompletionPlan plan;
  CompletedJoin join;
  bool from_cache = false;
};
std::vector<OfflineCompletion> offline_complete(const Dataset& dataset,
                                                const AnnotatedSchema& schema,
                                                const ModelCatalog& catalog);

// Looks up a previously computed offline completion (in-memory first, then
// $RELCOMP_CACHE). Null when nothing matches; the pointer stays valid for the
// process lifetime.
const CompletedJoin* find_offline(uint64_t dataset_fp, const std::string& complete_table,
                                  const std::string& incomplete_table, uint64_t plan_fp);

// Writes the join as CSV: one column per table attribute (table.column
// headers) plus __origin ("existing"/"synthesized") and __weight.
void export_completed_csv(const CompletedJoin& join, const Dataset& dataset,
                          const AnnotatedSchema& schema, const EncoderSet& encoders,
                          const std::string& path);

}  // namespace relcomp
