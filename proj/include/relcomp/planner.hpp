#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "relcomp/ar_model.hpp"
#include "relcomp/dataset.hpp"
#include "relcomp/encoding.hpp"
#include "relcomp/schema.hpp"
#include "relcomp/ssar_model.hpp"

namespace relcomp {

enum class ModelKind { AR, SSAR };

std::string to_string(ModelKind kind);

// One completion requirement: synthesize `target` rows next to an `anchor`
// row, conditioning on the anchor's evidence closure (the tables reachable
// from the anchor through child→parent hops, target excluded).
struct PairSpec {
  std::string anchor;
  std::string target;
  std::vector<std::string> evidence;  // sorted; always contains anchor

  MergeSpec merge_spec() const { return MergeSpec{evidence, target}; }
  std::set<std::string> tables() const;  // evidence ∪ {target}
  std::string key() const;               // "e1+e2>target"
};

// A trainable model: one variable order serving every member requirement.
struct ModelSpec {
  std::vector<std::string> order;  // topological over all member tables
  std::vector<PairSpec> members;   // deterministic order

  std::set<std::string> tables() const;
  std::string key() const;
};

// One spec per ordered FK-connected (anchor, target) pair; evidence closure
// capped at max_len - 1 tables so spec size never exceeds max_len.
std::vector<PairSpec> enumerate_pair_specs(const AnnotatedSchema& schema,
                                           int max_len = 5);

// Greedy merge: specs sorted by (table-set size descending, lexicographic
// table set, target), each placed into the first group with a subset-related
// table set whose combined requirements stay acyclic; then group pairs are
// merged to a fixpoint. Deterministic, so re-running yields identical specs.
// Orders are additionally FK-connected: every table is adjacent to an
// earlier one, so the order doubles as a join walk.
std::vector<ModelSpec> merge_pair_specs(const AnnotatedSchema& schema,
                                        std::vector<PairSpec> specs);

std::vector<ModelSpec> plan_models(const AnnotatedSchema& schema, int max_len = 5);

// Variable layout of a model over a table order: per table its non-key
// attributes in declared order, preceded (for tables joined from the child
// side) by the tuple factor of the FK linking them to their anchor — the
// closest earlier FK-connected table.
struct JoinLayout {
  std::vector<std::string> order;
  std::vector<VariableInfo> vars;
  std::vector<int> table_first_var;  // per order position: first attr var
  std::vector<int> table_var_count;  // attrs only, excludes the TF slot
  std::vector<int> anchor;           // order position of the anchor, -1 for first
  std::vector<const ForeignKey*> via;  // FK to the anchor, nullptr for first
  std::vector<bool> fanout;          // table sits on the many side of via
  std::vector<int> tf_var;           // var index of the TF slot, -1 if none

  int position_of(const std::string& table) const;  // -1 if absent
};

JoinLayout build_layout(const AnnotatedSchema& schema, const EncoderSet& encoders,
                        const std::vector<std::string>& order);

// Materializes the training join for a layout: anchor rows expand once per
// child (tuple factor attached as evidence), childless anchors keep one row
// with an absent child block, n:1 hops drop rows whose FK is null or
// dangling. Absent cells encode as NULL. `table_rows`, when given, receives
// per join row the dataset row per order position (-1 where absent).
std::vector<EncodedRow> build_join_rows(
    const Dataset& dataset, const AnnotatedSchema& schema, const EncoderSet& encoders,
    const JoinLayout& layout, std::vector<std::vector<int64_t>>* table_rows = nullptr);

// One usable (model, member) pairing in the catalog. AR entries of one
// merged spec share the trained core; SSAR entries own theirs.
struct ModelEntry {
  PairSpec spec;
  ModelKind kind = ModelKind::AR;
  std::vector<std::string> order;  // variable-table order of the model
  std::shared_ptr<MaskedARModel> ar;
  std::shared_ptr<SSARModel> ssar;

  const MaskedARModel& core() const { return kind == ModelKind::SSAR ? ssar->ar : *ar; }
  std::string key() const { return spec.key() + "#" + to_string(kind); }
  // Sum of held-out losses / marginal entropies over the target's attribute
  // variables (tuple factors excluded).
  double target_loss() const;
  double target_entropy() const;
};

struct ModelCatalog {
  std::vector<ModelEntry> entries;
  EncoderSet encoders;
  TrainConfig config;
  uint64_t dataset_fingerprint = 0;

  std::vector<const ModelEntry*> entries_for_target(const std::string& table) const;
  const ModelEntry* find(const std::string& key) const;  // nullptr if absent

  // Best model able to synthesize `next` given that evidence is available
  // exactly for `walked`: every model table ordered before `next` must be
  // walked. Prefers the requested kind, then more pre-target evidence, then
  // lexicographic key. A non-empty `anchor` keeps only entries anchored
  // there (needed when the hop's tuple factor is tied to a specific FK).
  // `allow_partial` relaxes the evidence requirement to "anchor walked";
  // unavailable evidence is fed as missing values. nullptr when nothing fits.
  const ModelEntry* best_for_hop(const std::set<std::string>& walked,
                                 const std::string& next,
                                 std::optional<ModelKind> prefer = {},
                                 const std::string& anchor = "",
                                 bool allow_partial = false) const;
};

// Trains every planned spec: the merged AR core once per spec, plus one SSAR
// variant per member whose anchor has fan-out evidence to walk (skipped
// entirely when config.context_dim is 0). Returns an entry per
// (member, kind). No incomplete tables → no entries.
ModelCatalog train_all(const Dataset& dataset, const AnnotatedSchema& schema,
                       const std::vector<ModelSpec>& specs, const TrainConfig& config);

// Entries targeting `target` whose summed held-out loss beats the marginal
// entropy baseline by the threshold factor. Empty result means completion of
// this table is not recommended.
std::vector<const ModelEntry*> basic_select(const ModelCatalog& catalog,
                                            const std::string& target,
                                            double threshold = 0.9);

struct BiasHint {
  std::string table;
  std::string column;
  bool overestimated = true;  // aggregates on the column are suspected too high
};

struct PlannedCompletion {
  std::string table;      // incomplete table to complete
  std::string entry_key;  // chosen catalog entry ("" when none admissible)
  double score = 0.0;
  bool recommended = true;
};

struct CompletionPlan {
  std::vector<PlannedCompletion> choices;  // in completion order
  std::vector<std::string> order;          // completion order, incomplete tables
  bool recommended = true;  // false → answer should be served uncompleted
  uint64_t seed = 1;

  const PlannedCompletion* choice_for(const std::string& table) const;
  uint64_t fingerprint() const;
};

// Chooses a model per incomplete table on the query path. Candidates pass
// basic_select first; with `scenarios` > 0 each candidate is scored by
// re-applying a biased removal to the available data and measuring how well
// completion with the existing catalog reconstructs it (mean bias reduction
// over scenarios); scenarios = 0 ranks by held-out loss ratio instead. A
// hint filters candidates that shift the hinted attribute the wrong way.
// `focus_attrs` (table → attribute) optionally names the attribute a query
// aggregates, used for scoring when no hint applies.
CompletionPlan advanced_select(const Dataset& dataset, const AnnotatedSchema& schema,
                               const ModelCatalog& catalog,
                               const std::vector<std::string>& query_path,
                               const std::optional<BiasHint>& hint = {},
                               int scenarios = 3, uint64_t seed = 1,
                               const std::map<std::string, std::string>& focus_attrs = {});

}  // namespace relcomp
