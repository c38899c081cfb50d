#include "relcomp/schema.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include "json.hpp"
#include "relcomp/errors.hpp"

namespace relcomp {

using nlohmann::json;

int TableDef::column_index(const std::string& col) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == col) return static_cast<int>(i);
  return -1;
}

const ColumnDef& TableDef::column(const std::string& col) const {
  int i = column_index(col);
  if (i < 0) throw ValidationError("table '" + name + "' has no column '" + col + "'");
  return columns[static_cast<size_t>(i)];
}

std::vector<std::string> TableDef::attribute_columns() const {
  std::vector<std::string> out;
  for (const auto& c : columns)
    if (c.type != ColumnType::Key) out.push_back(c.name);
  return out;
}

bool AnnotatedSchema::has_table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return true;
  return false;
}

const TableDef& AnnotatedSchema::table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return t;
  throw ValidationError("unknown table '" + name + "'");
}

std::vector<const ForeignKey*> AnnotatedSchema::relationships_of(
    const std::string& table) const {
  std::vector<const ForeignKey*> out;
  for (const auto& fk : relationships)
    if (fk.child_table == table || fk.parent_table == table) out.push_back(&fk);
  return out;
}

const ForeignKey* AnnotatedSchema::fk_between(const std::string& a,
                                              const std::string& b) const {
  for (const auto& fk : relationships) {
    if ((fk.child_table == a && fk.parent_table == b) ||
        (fk.child_table == b && fk.parent_table == a))
      return &fk;
  }
  return nullptr;
}

void AnnotatedSchema::validate() const {
  if (tables.empty()) throw ValidationError("schema has no tables");
  std::set<std::string> names;
  for (const auto& t : tables) {
    if (!names.insert(t.name).second)
      throw ValidationError("duplicate table '" + t.name + "'");
    if (t.columns.empty())
      throw ValidationError("table '" + t.name + "' has no columns");
    std::set<std::string> cols;
    for (const auto& c : t.columns) {
      if (!cols.insert(c.name).second)
        throw ValidationError("duplicate column '" + t.name + "." + c.name + "'");
    }
    if (t.primary_key.empty())
      throw ValidationError("table '" + t.name + "' has no primary key");
    if (t.column_index(t.primary_key) < 0)
      throw ValidationError("primary key '" + t.primary_key + "' missing from table '" +
                            t.name + "'");
    if (t.column(t.primary_key).type != ColumnType::Key)
      throw ValidationError("primary key '" + t.name + "." + t.primary_key +
                            "' must have type key");
  }

  std::set<std::pair<std::string, std::string>> pairs;
  std::set<std::string> fk_ids;
  for (const auto& fk : relationships) {
    if (!has_table(fk.child_table) || !has_table(fk.parent_table))
      throw ValidationError("foreign key " + fk.id() + " references unknown table");
    if (fk.child_table == fk.parent_table)
      throw ValidationError("self-referencing foreign key " + fk.id() +
                            " is not supported");
    const TableDef& child = table(fk.child_table);
    const TableDef& parent = table(fk.parent_table);
    if (child.column_index(fk.child_column) < 0)
      throw ValidationError("foreign key column '" + fk.id() + "' does not exist");
    if (child.column(fk.child_column).type != ColumnType::Key)
      throw ValidationError("foreign key column '" + fk.id() + "' must have type key");
    if (fk.parent_column != parent.primary_key)
      throw ValidationError("foreign key " + fk.id() + " must reference the primary key of '" +
                            fk.parent_table + "'");
    auto pair = std::minmax(fk.child_table, fk.parent_table);
    if (!pairs.insert({pair.first, pair.second}).second)
      throw ValidationError("parallel foreign keys between '" + fk.child_table + "' and '" +
                            fk.parent_table + "' are not supported");
    fk_ids.insert(fk.id());
  }

  for (const auto& t : incomplete_tables)
    if (!has_table(t)) throw ValidationError("incomplete_tables lists unknown table '" + t + "'");
  for (const auto& r : incomplete_relationships)
    if (!fk_ids.count(r))
      throw ValidationError("incomplete_relationships lists unknown foreign key '" + r + "'");
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ParseError("unknown key '" + it.key() + "' in " + where);
  }
}

ColumnType parse_type(const std::string& s, const std::string& where) {
  if (s == "categorical") return ColumnType::Categorical;
  if (s == "continuous") return ColumnType::Continuous;
  if (s == "key") return ColumnType::Key;
  throw ParseError("unknown column type '" + s + "' in " + where);
}

}  // namespace

AnnotatedSchema parse_annotation(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("annotation is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("annotation root must be an object");
  reject_unknown_keys(doc, {"tables", "foreign_keys", "incomplete_tables",
                            "incomplete_relationships"},
                      "annotation root");
  if (!doc.contains("tables")) throw ParseError("annotation missing 'tables'");

  AnnotatedSchema schema;
  try {
    for (const auto& jt : doc.at("tables")) {
      reject_unknown_keys(jt, {"name", "columns"}, "table entry");
      TableDef t;
      t.name = jt.at("name").get<std::string>();
      for (const auto& jc : jt.at("columns")) {
        reject_unknown_keys(jc, {"name", "type", "pk"}, "column of table '" + t.name + "'");
        ColumnDef c;
        c.name = jc.at("name").get<std::string>();
        c.type = parse_type(jc.at("type").get<std::string>(), t.name + "." + c.name);
        if (jc.value("pk", false)) {
          if (!t.primary_key.empty())
            throw ParseError("table '" + t.name + "' declares more than one primary key");
          t.primary_key = c.name;
        }
        t.columns.push_back(std::move(c));
      }
      schema.tables.push_back(std::move(t));
    }
    if (doc.contains("foreign_keys")) {
      for (const auto& jf : doc.at("foreign_keys")) {
        reject_unknown_keys(
            jf, {"child_table", "child_column", "parent_table", "parent_column"},
            "foreign key entry");
        ForeignKey fk;
        fk.child_table = jf.at("child_table").get<std::string>();
        fk.child_column = jf.at("child_column").get<std::string>();
        fk.parent_table = jf.at("parent_table").get<std::string>();
        fk.parent_column = jf.at("parent_column").get<std::string>();
        schema.relationships.push_back(std::move(fk));
      }
    }
    if (doc.contains("incomplete_tables"))
      for (const auto& jt : doc.at("incomplete_tables"))
        schema.incomplete_tables.insert(jt.get<std::string>());
    if (doc.contains("incomplete_relationships"))
      for (const auto& jr : doc.at("incomplete_relationships"))
        schema.incomplete_relationships.insert(jr.get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed annotation: ") + e.what());
  }

  schema.validate();
  return schema;
}

AnnotatedSchema load_annotation(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open annotation file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_annotation(buf.str());
}

std::string CompletionPath::key() const {
  std::string out;
  for (const auto& t : evidence_chain) out += t + ">";
  out += target;
  return out;
}

std::vector<CompletionPath> enumerate_completion_paths(const AnnotatedSchema& schema,
                                                       const std::string& target,
                                                       int max_len) {
  if (max_len < 1) throw ValidationError("max_len must be at least 1");
  schema.table(target);  // existence check

  std::vector<CompletionPath> out;
  // Grow chains backwards from the table adjacent to the target: chain[0] is
  // the far evidence end T_1, chain.back() is adjacent to the target. Every
  // hop T_i -> T_i+1 must reach the one side (T_i+1 is the parent), so the
  // evidence join never multiplies rows before the final hop.
  std::vector<std::string> chain;
  auto emit = [&](const ForeignKey* final_fk) {
    CompletionPath p;
    p.target = target;
    p.evidence_chain.assign(chain.rbegin(), chain.rend());
    p.final_hop_fanout = final_fk->child_table == target;
    std::set<std::string> on_chain(p.evidence_chain.begin(), p.evidence_chain.end());
    std::set<std::string> fanout;
    for (const auto& t : p.evidence_chain) {
      for (const ForeignKey* fk : schema.relationships_of(t)) {
        // Fan-out side table = the child table of a FK whose parent is t.
        if (fk->parent_table != t) continue;
        const std::string& side = fk->child_table;
        if (side == target || on_chain.count(side)) continue;
        if (!schema.table_complete(side)) continue;
        fanout.insert(side);
      }
    }
    p.fanout_tables.assign(fanout.begin(), fanout.end());
    out.push_back(std::move(p));
  };

  // DFS over evidence chains. `chain` is ordered from the target side
  // outward: chain[0] adjacent to target. Intermediate tables may themselves
  // be incomplete (their rows get synthesized along the way); a path is only
  // emitted once its far end T_1 is complete.
  auto extend = [&](auto&& self) -> void {
    const std::string& head = chain.back();  // current far end
    std::vector<std::string> nexts;
    for (const ForeignKey* fk : schema.relationships_of(head)) {
      // We grow away from the target, so the next table sits on the child
      // side of a FK whose parent is `head` (walking the chain toward the
      // target then always moves child -> parent: no fan-out).
      if (fk->parent_table != head) continue;
      const std::string& next = fk->child_table;
      if (next == target) continue;
      if (std::find(chain.begin(), chain.end(), next) != chain.end()) continue;
      nexts.push_back(next);
    }
    std::sort(nexts.begin(), nexts.end());
    for (const auto& next : nexts) {
      if (static_cast<int>(chain.size()) + 2 > max_len) break;  // +1 next, +1 target
      chain.push_back(next);
      if (schema.table_complete(next)) emit(schema.fk_between(chain[0], target));
      self(self);
      chain.pop_back();
    }
  };

  std::vector<std::string> anchors;
  for (const ForeignKey* fk : schema.relationships_of(target)) {
    const std::string& other = fk->child_table == target ? fk->parent_table : fk->child_table;
    anchors.push_back(other);
  }
  std::sort(anchors.begin(), anchors.end());
  for (const auto& anchor : anchors) {
    if (max_len < 2) break;  // need at least anchor + target
    chain = {anchor};
    if (schema.table_complete(anchor)) emit(schema.fk_between(anchor, target));
    extend(extend);
  }

  std::sort(out.begin(), out.end(), [](const CompletionPath& a, const CompletionPath& b) {
    if (a.evidence_chain.size() != b.evidence_chain.size())
      return a.evidence_chain.size() < b.evidence_chain.size();
    return a.evidence_chain < b.evidence_chain;
  });
  return out;
}

namespace {

void walk_from(const AnnotatedSchema& schema, WalkNode& node,
               std::set<std::string>& used_rels, const std::set<std::string>& exclude,
               int fanout_budget) {
  std::vector<const ForeignKey*> rels = schema.relationships_of(node.table);
  std::sort(rels.begin(), rels.end(),
            [](const ForeignKey* a, const ForeignKey* b) { return a->id() < b->id(); });
  for (const ForeignKey* fk : rels) {
    if (exclude.count(fk->id()) || used_rels.count(fk->id())) continue;
    const bool child_is_fanout = fk->parent_table == node.table;
    if (child_is_fanout && fanout_budget == 0) continue;
    used_rels.insert(fk->id());
    WalkNode child;
    child.table = child_is_fanout ? fk->child_table : fk->parent_table;
    child.via = *fk;
    child.fanout = child_is_fanout;
    walk_from(schema, child, used_rels, exclude,
              child_is_fanout ? fanout_budget - 1 : fanout_budget);
    node.children.push_back(std::move(child));
  }
}

}  // namespace

WalkNode acyclic_walk(const AnnotatedSchema& schema, const std::string& root,
                      const std::set<std::string>& exclude_relationships, int max_fanout_depth) {
  schema.table(root);
  WalkNode node;
  node.table = root;
  std::set<std::string> used;
  walk_from(schema, node, used, exclude_relationships, max_fanout_depth);
  return node;
}

std::optional<std::vector<std::string>> check_merge_legality(
    const std::vector<MergeSpec>& specs) {
  std::set<std::string> nodes;
  std::map<std::string, std::set<std::string>> succ;  // table -> completed-after tables
  for (const auto& s : specs) {
    nodes.insert(s.target);
    for (const auto& e : s.evidence) {
      nodes.insert(e);
      if (e != s.target) succ[e].insert(s.target);
    }
  }
  std::map<std::string, int> indegree;
  for (const auto& n : nodes) indegree[n] = 0;
  for (const auto& [from, tos] : succ)
    for (const auto& to : tos) indegree[to]++;

  // Kahn's algorithm with a lexicographic frontier: evidence-only tables
  // drain first in name order, so single-spec inputs come out as evidence
  // tables followed by the target.
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> frontier;
  for (const auto& [n, d] : indegree)
    if (d == 0) frontier.push(n);
  std::vector<std::string> order;
  while (!frontier.empty()) {
    std::string n = frontier.top();
    frontier.pop();
    order.push_back(n);
    auto it = succ.find(n);
    if (it == succ.end()) continue;
    for (const auto& to : it->second)
      if (--indegree[to] == 0) frontier.push(to);
  }
  if (order.size() != nodes.size()) return std::nullopt;
  return order;
}

}  // namespace relcomp
