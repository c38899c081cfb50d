#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace relcomp {

enum class ColumnType { Categorical, Continuous, Key };

struct ColumnDef {
  std::string name;
  ColumnType type = ColumnType::Categorical;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  std::string primary_key;

  int column_index(const std::string& col) const;          // -1 if absent
  const ColumnDef& column(const std::string& col) const;   // throws ValidationError
  // Columns that carry attribute values (everything except keys).
  std::vector<std::string> attribute_columns() const;
};

struct ForeignKey {
  std::string child_table;   // many side, holds the FK column
  std::string child_column;
  std::string parent_table;  // one side, referenced primary key
  std::string parent_column;

  // Stable identifier used in annotations, CSV completeness columns and
  // tuple-factor bookkeeping.
  std::string id() const { return child_table + "." + child_column; }
  bool operator==(const ForeignKey& o) const = default;
};

// A database schema plus completeness annotations for tables and
// relationships.
struct AnnotatedSchema {
  std::vector<TableDef> tables;
  std::vector<ForeignKey> relationships;
  std::set<std::string> incomplete_tables;
  std::set<std::string> incomplete_relationships;  // ForeignKey::id values

  bool has_table(const std::string& name) const;
  const TableDef& table(const std::string& name) const;  // throws ValidationError
  bool table_complete(const std::string& name) const {
    return !incomplete_tables.count(name);
  }
  // A relationship is complete iff its parent-side table is complete and it
  // is not annotated incomplete. An incomplete child table does not by itself
  // make the relationship incomplete: the FK values of the rows that do exist
  // may still all be present and resolvable.
  bool relationship_complete(const ForeignKey& fk) const {
    return table_complete(fk.parent_table) && !incomplete_relationships.count(fk.id());
  }

  // All relationships touching `table`, in declaration order.
  std::vector<const ForeignKey*> relationships_of(const std::string& table) const;
  // The single FK connecting two tables (either direction); nullptr if none.
  const ForeignKey* fk_between(const std::string& a, const std::string& b) const;

  // Structural and annotation invariants; throws ValidationError.
  void validate() const;
};

// Parses the annotation document. Unknown keys anywhere are rejected so a
// typo cannot silently change completeness semantics.
AnnotatedSchema parse_annotation(const std::string& json_text);
AnnotatedSchema load_annotation(const std::string& path);

// One way to reach `target` from complete evidence: a chain of complete
// tables T_1..T_n where every hop T_i -> T_i+1 goes to the one side (no
// fan-out inside the evidence join) and T_n is adjacent to the target.
// Fan-out side tables hanging off the chain are usable as set evidence.
struct CompletionPath {
  std::string target;
  std::vector<std::string> evidence_chain;  // T_1 first, T_n adjacent to target
  std::vector<std::string> fanout_tables;   // sorted, disjoint from chain

  bool final_hop_fanout = false;  // target sits on the many side of the last hop
  std::string key() const;        // "T1>T2>...>target"
};

// Enumerates every completion path for `target` with at most max_len tables
// counting the target itself. Paths are ordered by (length, lexicographic
// chain) so planning is deterministic.
std::vector<CompletionPath> enumerate_completion_paths(const AnnotatedSchema& schema,
                                                       const std::string& target,
                                                       int max_len = 5);

// Tree of relationships used to gather set evidence around a root table.
// Each relationship is traversed at most once per branch and fan-out depth
// is capped; child groups are ordered by relationship id for determinism.
struct WalkNode {
  std::string table;
  // FK connecting this node to its parent node; empty id for the root.
  ForeignKey via;
  bool fanout = false;  // this node is on the many side of `via`
  std::vector<WalkNode> children;
};

WalkNode acyclic_walk(const AnnotatedSchema& schema, const std::string& root,
                      const std::set<std::string>& exclude_relationships = {},
                      int max_fanout_depth = 3);

// One trainable model specification: evidence tables (already ordered) plus
// the set of tables the model completes.
struct MergeSpec {
  std::vector<std::string> evidence;
  std::string target;
};

// Decides whether a set of specs can be served by one merged model: builds a
// directed graph with an arc from every evidence table to each table
// completed from it and topologically sorts it. Returns the table order
// (ties broken lexicographically) or nullopt when the requirements cycle.
std::optional<std::vector<std::string>> check_merge_legality(
    const std::vector<MergeSpec>& specs);

}  // namespace relcomp
