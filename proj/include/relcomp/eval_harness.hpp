#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relcomp/ar_model.hpp"
#include "relcomp/completion.hpp"
#include "relcomp/dataset.hpp"
#include "relcomp/query.hpp"
#include "relcomp/schema.hpp"

namespace relcomp {

enum class TfLaw { Fixed, Uniform, PropA };

// Two-table generator: parent `ta` (complete) and child `tb`. ta.a_val is
// drawn uniform or Zipf(skew) over `domain` values; each child copies the
// parent-determined value f(a) with probability `predictability`, otherwise
// draws from the uniform marginal. With probability `fanout_predictability`
// all children of one parent share a single group draw (sibling coherence).
// Continuous companions a_num/b_num carry a second value index drawn
// independently under the same law, spread over disjoint numeric bands —
// so sibling attributes share no information beyond what the parent gives.
struct SyntheticSpec {
  size_t rows = 10000;  // parent rows
  double predictability = 1.0;
  double skew = 0.0;
  double fanout_predictability = 0.0;
  TfLaw tf_law = TfLaw::Uniform;
  int tf_max = 4;   // Fixed: exact count; Uniform: 1..tf_max; PropA: 1 + idx%tf_max
  int domain = 10;  // categorical domain size
};

// Schema for the generator's tables; `mark_incomplete` annotates tb and its
// relationship as incomplete-capable.
AnnotatedSchema synthetic_schema(bool mark_incomplete = true);
Dataset generate_synthetic(const SyntheticSpec& spec, uint64_t seed);

// Three-table chain ta → tb → tc (each child of the previous), same value
// mechanics per hop; `incomplete_table` is annotated incomplete.
AnnotatedSchema chain_schema(const std::string& incomplete_table = "tc");
Dataset generate_chain(const SyntheticSpec& spec, uint64_t seed);

struct RemovalSpec {
  std::string table;
  std::string attribute;
  double keep_rate = 0.5;
  double removal_correlation = 0.0;
  double tf_keep_rate = 1.0;  // fraction of parent rows keeping true counts
  uint64_t seed = 1;
  bool cascade_links = false;  // drop child rows referencing removed rows
};

struct RemovalResult {
  Dataset data;
  std::vector<uint8_t> removed;  // per input row of the target table
  // Categorical bias target (the modal value); empty for continuous attrs.
  std::string designated_value;
  double realized_keep = 0.0;
  double realized_pearson = 0.0;  // continuous attrs only
};

// Removes rows of spec.table with value-dependent probabilities:
// categorical attrs boost the designated value's removal odds by
// removal_correlation, continuous attrs use a logistic removal probability
// whose slope is solved to hit the requested Pearson correlation between
// removal and value. True tuple factors survive on a tf_keep_rate fraction
// of parent rows; the rest become unknown.
RemovalResult biased_removal(const Dataset& dataset, const AnnotatedSchema& schema,
                             const RemovalSpec& spec);

// Turns a completed join back into tables: per table, all existing rows plus
// one row per synthesized tuple (decoded through the encoders).
Dataset materialize_completed(const CompletedJoin& join, const Dataset& available,
                              const AnnotatedSchema& schema, const EncoderSet& encoders);

// 1 − |AVG_c − AVG| / |AVG − AVG_i| over table.attribute: averages for
// continuous attributes, designated-value fraction for categorical ones.
// nullopt when the incomplete data shows no bias (zero denominator).
std::optional<double> bias_reduction(const Dataset& complete, const Dataset& incomplete,
                                     const Dataset& completed, const std::string& table,
                                     const std::string& attribute,
                                     const std::string& designated_value = "");

// E_r(Q(incomplete), Q(complete)) − E_r(Q(completed), Q(complete)), where
// group-by queries average relative error over result rows, groups missing
// from one side count as error 1, and zero-truth rows are skipped.
double relative_error_reduction(const AggregateQuery& query, const Dataset& complete,
                                const Dataset& incomplete, const Dataset& completed,
                                const AnnotatedSchema& schema);

// 1 − (|completed| − |complete|) / (|incomplete| − |complete|) over row
// counts of `table`; nullopt when nothing was missing.
std::optional<double> cardinality_correction(const Dataset& complete,
                                             const Dataset& incomplete,
                                             const Dataset& completed,
                                             const std::string& table);

struct QueryErrorRecord {
  std::string query;
  std::string aggregate;
  double error_incomplete = 0;  // mean relative error of the plain answer
  double error_completed = 0;   // mean relative error after completion
  double reduction = 0;
  bool zero_truth_skipped = false;  // some truth rows had value 0
  bool recommended = true;          // completion was recommended for this query
};

struct MetricsReport {
  std::vector<QueryErrorRecord> queries;
  double mean_reduction = 0;
  std::optional<double> bias_red;          // over the removal's bias attribute
  std::optional<double> cardinality_corr;  // over the incomplete table
};

// End-to-end protocol: trains a catalog on the incomplete data, answers
// every query on truth / incomplete / completed variants, and aggregates the
// error metrics. `out_dir` (optional) receives per-query CSV and a summary
// JSON. The workload file holds one query per line ('#' comments allowed).
MetricsReport run_workload_queries(const std::vector<std::string>& queries,
                                   const Dataset& complete, const Dataset& incomplete,
                                   const AnnotatedSchema& schema,
                                   const TrainConfig& config,
                                   const std::string& out_dir = "");
MetricsReport run_workload(const std::string& queries_path, const Dataset& complete,
                           const Dataset& incomplete, const AnnotatedSchema& schema,
                           const TrainConfig& config, const std::string& out_dir = "");

}  // namespace relcomp
