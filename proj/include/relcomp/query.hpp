#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relcomp/dataset.hpp"
#include "relcomp/planner.hpp"
#include "relcomp/schema.hpp"

namespace relcomp {

enum class AggregateKind { Count, Sum, Avg, Rows };  // Rows = SELECT *

struct Predicate {
  std::string table, column;
  std::string op;     // one of = != < <= > >=
  std::string text;   // literal as written (quotes stripped)
  double number = 0;  // parsed value for continuous columns
  bool numeric = false;
};

struct AggregateQuery {
  std::vector<std::string> tables;  // in order of appearance, deduplicated
  AggregateKind agg = AggregateKind::Count;
  std::string agg_table, agg_column;  // SUM/AVG target
  std::vector<Predicate> predicates;  // conjunctive WHERE clause
  std::vector<std::pair<std::string, std::string>> group_by;  // (table, column)
  std::string text;  // original SQL
};

// Grammar: SELECT (COUNT(*) | SUM(a) | AVG(a) | *) FROM t
//          (NATURAL JOIN t | , t)* [WHERE col op const [AND ...]]
//          [GROUP BY col [, col]*]
// Columns may be qualified (table.column) or bare when unambiguous. The
// joined tables must form a connected acyclic subgraph of the schema's FK
// graph; AVG requires a continuous attribute.
AggregateQuery parse_query(const std::string& sql, const AnnotatedSchema& schema);

struct QueryOptions {
  uint64_t seed = 1;
  double level = 0.95;  // confidence level
  std::optional<BiasHint> hint;
  int scenarios = 3;      // advanced-selection scoring depth (0 = loss ranking)
  bool use_cache = true;  // serve two-table paths from offline completions
};

struct ConfidenceInterval {
  double level = 0.95;
  double lower = 0, upper = 0;
  double theoretical_min = 0, theoretical_max = 0;
};

struct GroupResult {
  std::vector<std::string> keys;  // group-by values, decoded text
  double estimate = 0;
  ConfidenceInterval ci;
  double synthesized_fraction = 0;  // synthesized weight share of the group
};

struct QueryResult {
  AggregateQuery query;
  std::vector<GroupResult> groups;  // one unnamed group without GROUP BY
  // SELECT * output: header (table.column) and decoded rows, with
  // __origin/__weight appended.
  std::vector<std::string> row_header;
  std::vector<std::vector<std::string>> rows;

  bool completion_attempted = false;
  bool recommended = true;  // false → no admissible model, plain answer served
  size_t existing_rows = 0, synthesized_rows = 0;
  int tf_clamp_warnings = 0;
  std::vector<std::string> notes;
};

// Full pipeline: plans completions for the query path (advanced selection),
// builds or reuses the completed join, then filters, groups and aggregates
// with row weights and attaches confidence intervals. With no incomplete
// table on the path this equals the plain join answer.
QueryResult execute(const AggregateQuery& query, const Dataset& dataset,
                    const AnnotatedSchema& schema, const ModelCatalog& catalog,
                    const QueryOptions& options = {});

QueryResult execute_sql(const std::string& sql, const Dataset& dataset,
                        const AnnotatedSchema& schema, const ModelCatalog& catalog,
                        const QueryOptions& options = {});

// Plain evaluation over the data as-is: natural join of the query tables,
// no synthesis, unit weights. Used for baselines and ground-truth runs.
QueryResult execute_plain(const AggregateQuery& query, const Dataset& dataset,
                          const AnnotatedSchema& schema);

// C = 1 − exp(−D_KL(model ‖ marginal)) with additive 1e-9 smoothing on both
// sides; 0 iff the distributions match, approaching 1 as they diverge.
double certainty(std::span<const double> model, std::span<const double> marginal);
double certainty(std::span<const float> model, std::span<const double> marginal);

}  // namespace relcomp
