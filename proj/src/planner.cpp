#include "relcomp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <queue>
#include <set>

#include "relcomp/completion.hpp"
#include "relcomp/errors.hpp"
#include "relcomp/eval_harness.hpp"
#include "relcomp/fingerprint.hpp"

namespace relcomp {

std::string to_string(ModelKind kind) { return kind == ModelKind::AR ? "AR" : "SSAR"; }

namespace {

std::string join_names(const std::vector<std::string>& names, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) out += sep;
    out += names[i];
  }
  return out;
}

uint64_t string_seed(const std::string& s) {
  Fingerprint fp;
  fp.str(s);
  return fp.value();
}

}  // namespace

std::set<std::string> PairSpec::tables() const {
  std::set<std::string> t(evidence.begin(), evidence.end());
  t.insert(target);
  return t;
}

std::string PairSpec::key() const {
  return anchor + ":" + join_names(evidence, "+") + ">" + target;
}

std::set<std::string> ModelSpec::tables() const {
  return std::set<std::string>(order.begin(), order.end());
}

std::string ModelSpec::key() const {
  std::string out = join_names(order, ">") + "|";
  for (size_t i = 0; i < members.size(); ++i) {
    if (i) out += ",";
    out += members[i].key();
  }
  return out;
}

std::vector<PairSpec> enumerate_pair_specs(const AnnotatedSchema& schema, int max_len) {
  std::vector<PairSpec> specs;
  for (const auto& anchor : schema.tables) {
    for (const auto& target : schema.tables) {
      if (anchor.name == target.name) continue;
      if (!schema.fk_between(anchor.name, target.name)) continue;

      // Evidence closure: tables reached from the anchor through repeated
      // child→parent hops (each contributes at most one row per anchor row),
      // never passing through the target.
      std::set<std::string> closure{anchor.name};
      std::deque<std::string> frontier{anchor.name};
      const size_t cap = static_cast<size_t>(std::max(1, max_len - 1));
      while (!frontier.empty() && closure.size() < cap) {
        const std::string u = frontier.front();
        frontier.pop_front();
        std::vector<std::string> parents;
        for (const ForeignKey* fk : schema.relationships_of(u))
          if (fk->child_table == u && fk->parent_table != target.name &&
              !closure.count(fk->parent_table))
            parents.push_back(fk->parent_table);
        std::sort(parents.begin(), parents.end());
        parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
        for (const auto& p : parents) {
          if (closure.size() >= cap) break;
          closure.insert(p);
          frontier.push_back(p);
        }
      }

      PairSpec spec;
      spec.anchor = anchor.name;
      spec.target = target.name;
      spec.evidence.assign(closure.begin(), closure.end());
      specs.push_back(std::move(spec));
    }
  }
  std::sort(specs.begin(), specs.end(),
            [](const PairSpec& a, const PairSpec& b) { return a.key() < b.key(); });
  return specs;
}

namespace {

bool subset_related(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::includes(a.begin(), a.end(), b.begin(), b.end()) ||
         std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// Legality via check_merge_legality, but the returned order is rebuilt so
// that every table is FK-adjacent to an earlier one (the lexicographic
// topological order can interleave disjoint evidence chains).  Evidence ->
// target precedence is preserved; within that, the lexicographically
// smallest reachable table goes next.
std::optional<std::vector<std::string>> combined_order(
    const AnnotatedSchema& schema, const std::vector<PairSpec>& members) {
  std::vector<MergeSpec> specs;
  specs.reserve(members.size());
  for (const auto& m : members) specs.push_back(m.merge_spec());
  auto base = check_merge_legality(specs);
  if (!base) return std::nullopt;

  std::set<std::string> nodes(base->begin(), base->end());
  std::set<std::pair<std::string, std::string>> arcs;
  for (const auto& m : members)
    for (const auto& ev : m.evidence)
      if (ev != m.target) arcs.insert({ev, m.target});
  std::map<std::string, int> indeg;
  for (const auto& t : nodes) indeg[t] = 0;
  for (const auto& [from, to] : arcs) ++indeg[to];

  std::vector<std::string> order;
  std::set<std::string> placed;
  auto adjacent_to_placed = [&](const std::string& t) {
    for (const auto& p : placed)
      if (schema.fk_between(t, p)) return true;
    return false;
  };
  while (order.size() < nodes.size()) {
    std::string pick;
    for (const auto& t : nodes) {
      if (placed.count(t) || indeg[t] > 0) continue;
      if (!placed.empty() && !adjacent_to_placed(t)) continue;
      pick = t;
      break;
    }
    if (pick.empty()) {
      // Disconnected remainder: fall back to plain topological choice.
      for (const auto& t : nodes) {
        if (!placed.count(t) && indeg[t] == 0) {
          pick = t;
          break;
        }
      }
    }
    if (pick.empty()) return std::nullopt;  // unreachable once legality held
    order.push_back(pick);
    placed.insert(pick);
    for (const auto& [from, to] : arcs)
      if (from == pick) --indeg[to];
  }
  return order;
}

}  // namespace

std::vector<ModelSpec> merge_pair_specs(const AnnotatedSchema& schema,
                                        std::vector<PairSpec> specs) {
  // Deterministic merge order: widest specs first, ties by table set and key.
  std::sort(specs.begin(), specs.end(), [](const PairSpec& a, const PairSpec& b) {
    const auto ta = a.tables();
    const auto tb = b.tables();
    if (ta.size() != tb.size()) return ta.size() > tb.size();
    if (ta != tb) return ta < tb;
    return a.key() < b.key();
  });

  std::vector<ModelSpec> groups;
  for (auto& spec : specs) {
    bool placed = false;
    for (auto& g : groups) {
      if (!subset_related(g.tables(), spec.tables())) continue;
      auto members = g.members;
      members.push_back(spec);
      if (auto order = combined_order(schema, members)) {
        g.members = std::move(members);
        g.order = std::move(*order);
        placed = true;
        break;
      }
    }
    if (!placed) {
      ModelSpec g;
      g.members.push_back(spec);
      g.order = *combined_order(schema, g.members);  // a single spec never cycles
      groups.push_back(std::move(g));
    }
  }

  // Group-level merges to a fixpoint so no legal merge remains.
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < groups.size() && !changed; ++i) {
      for (size_t j = i + 1; j < groups.size() && !changed; ++j) {
        if (!subset_related(groups[i].tables(), groups[j].tables())) continue;
        auto members = groups[i].members;
        members.insert(members.end(), groups[j].members.begin(), groups[j].members.end());
        if (auto order = combined_order(schema, members)) {
          groups[i].members = std::move(members);
          groups[i].order = std::move(*order);
          groups.erase(groups.begin() + static_cast<ptrdiff_t>(j));
          changed = true;
        }
      }
    }
  }

  std::sort(groups.begin(), groups.end(),
            [](const ModelSpec& a, const ModelSpec& b) { return a.key() < b.key(); });
  return groups;
}

std::vector<ModelSpec> plan_models(const AnnotatedSchema& schema, int max_len) {
  return merge_pair_specs(schema, enumerate_pair_specs(schema, max_len));
}

int JoinLayout::position_of(const std::string& table) const {
  for (size_t i = 0; i < order.size(); ++i)
    if (order[i] == table) return static_cast<int>(i);
  return -1;
}

JoinLayout build_layout(const AnnotatedSchema& schema, const EncoderSet& encoders,
                        const std::vector<std::string>& order) {
  JoinLayout layout;
  layout.order = order;
  const int n = static_cast<int>(order.size());
  layout.table_first_var.assign(static_cast<size_t>(n), 0);
  layout.table_var_count.assign(static_cast<size_t>(n), 0);
  layout.anchor.assign(static_cast<size_t>(n), -1);
  layout.via.assign(static_cast<size_t>(n), nullptr);
  layout.fanout.assign(static_cast<size_t>(n), false);
  layout.tf_var.assign(static_cast<size_t>(n), -1);

  for (int i = 0; i < n; ++i) {
    const std::string& t = order[static_cast<size_t>(i)];
    if (i > 0) {
      for (int j = i - 1; j >= 0; --j) {
        if (const ForeignKey* fk = schema.fk_between(t, order[static_cast<size_t>(j)])) {
          layout.anchor[static_cast<size_t>(i)] = j;
          layout.via[static_cast<size_t>(i)] = fk;
          layout.fanout[static_cast<size_t>(i)] = fk->child_table == t;
          break;
        }
      }
      if (!layout.via[static_cast<size_t>(i)])
        throw ValidationError("table order is not FK-connected at '" + t + "'");
      if (layout.fanout[static_cast<size_t>(i)]) {
        const ForeignKey* fk = layout.via[static_cast<size_t>(i)];
        VariableInfo tf;
        tf.table = fk->parent_table;
        tf.is_tuple_factor = true;
        tf.fk_id = fk->id();
        tf.cardinality = encoders.tf_encoder(tf.fk_id).cardinality;
        layout.tf_var[static_cast<size_t>(i)] = static_cast<int>(layout.vars.size());
        layout.vars.push_back(std::move(tf));
      }
    }
    layout.table_first_var[static_cast<size_t>(i)] = static_cast<int>(layout.vars.size());
    for (const auto& col : schema.table(t).attribute_columns()) {
      VariableInfo v;
      v.table = t;
      v.column = col;
      v.cardinality = encoders.column_encoder(t, col).cardinality;
      layout.vars.push_back(std::move(v));
      ++layout.table_var_count[static_cast<size_t>(i)];
    }
  }
  return layout;
}

std::vector<EncodedRow> build_join_rows(const Dataset& dataset,
                                        const AnnotatedSchema& schema,
                                        const EncoderSet& encoders,
                                        const JoinLayout& layout,
                                        std::vector<std::vector<int64_t>>* table_rows) {
  const int n = static_cast<int>(layout.order.size());
  struct Partial {
    std::vector<int64_t> refs;
    std::vector<int32_t> tfs;  // per order position; only fan-out slots used
  };
  std::vector<Partial> current;
  const TableData& base = dataset.table(layout.order[0]);
  current.reserve(base.row_count);
  for (size_t r = 0; r < base.row_count; ++r) {
    Partial p;
    p.refs.assign(static_cast<size_t>(n), -1);
    p.tfs.assign(static_cast<size_t>(n), -1);
    p.refs[0] = static_cast<int64_t>(r);
    current.push_back(std::move(p));
  }

  for (int i = 1; i < n; ++i) {
    const int a = layout.anchor[static_cast<size_t>(i)];
    const ForeignKey* fk = layout.via[static_cast<size_t>(i)];
    const FkIndex& index = dataset.fk_index(fk->id());
    std::vector<Partial> next;
    next.reserve(current.size());
    if (layout.fanout[static_cast<size_t>(i)]) {
      const auto& tf_col = dataset.tuple_factors.at(fk->id());
      for (auto& row : current) {
        const int64_t ar = row.refs[static_cast<size_t>(a)];
        if (ar < 0) {
          next.push_back(std::move(row));
          continue;
        }
        const int32_t count = tf_col.counts[static_cast<size_t>(ar)];
        const auto& children = index.parent_children[static_cast<size_t>(ar)];
        if (children.empty()) {
          row.tfs[static_cast<size_t>(i)] = count;
          next.push_back(std::move(row));
          continue;
        }
        for (int32_t child : children) {
          Partial p = row;
          p.refs[static_cast<size_t>(i)] = child;
          p.tfs[static_cast<size_t>(i)] = count;
          next.push_back(std::move(p));
        }
      }
    } else {
      for (auto& row : current) {
        const int64_t ar = row.refs[static_cast<size_t>(a)];
        if (ar < 0) {
          next.push_back(std::move(row));
          continue;
        }
        const int64_t parent = index.child_to_parent[static_cast<size_t>(ar)];
        if (parent < 0) continue;  // dangling FK: no evidence row to learn from
        row.refs[static_cast<size_t>(i)] = parent;
        next.push_back(std::move(row));
      }
    }
    current = std::move(next);
  }

  std::vector<EncodedRow> rows;
  rows.reserve(current.size());
  if (table_rows) {
    table_rows->clear();
    table_rows->reserve(current.size());
  }
  for (const auto& partial : current) {
    EncodedRow row;
    row.indices.reserve(layout.vars.size());
    for (int i = 0; i < n; ++i) {
      if (layout.tf_var[static_cast<size_t>(i)] >= 0) {
        const auto& enc = encoders.tf_encoder(layout.via[static_cast<size_t>(i)]->id());
        const int64_t ar = partial.refs[static_cast<size_t>(layout.anchor[static_cast<size_t>(i)])];
        row.indices.push_back(ar < 0 ? enc.null_index()
                                     : enc.encode_tuple_factor(partial.tfs[static_cast<size_t>(i)]));
      }
      const std::string& t = layout.order[static_cast<size_t>(i)];
      const int64_t ref = partial.refs[static_cast<size_t>(i)];
      if (ref < 0) {
        for (const auto& col : schema.table(t).attribute_columns())
          row.indices.push_back(encoders.column_encoder(t, col).null_index());
      } else {
        auto attrs = encode_table_attrs(dataset, schema, encoders, t,
                                        static_cast<size_t>(ref));
        row.indices.insert(row.indices.end(), attrs.begin(), attrs.end());
      }
    }
    row.observed = static_cast<int>(row.indices.size());
    rows.push_back(std::move(row));
    if (table_rows) table_rows->push_back(partial.refs);
  }
  return rows;
}

double ModelEntry::target_loss() const {
  const MaskedARModel& m = core();
  double sum = 0.0;
  for (int k = 0; k < m.n_vars(); ++k) {
    const auto& v = m.vars[static_cast<size_t>(k)];
    if (!v.is_tuple_factor && v.table == spec.target)
      sum += m.holdout_loss[static_cast<size_t>(k)];
  }
  return sum;
}

double ModelEntry::target_entropy() const {
  const MaskedARModel& m = core();
  double sum = 0.0;
  for (int k = 0; k < m.n_vars(); ++k) {
    const auto& v = m.vars[static_cast<size_t>(k)];
    if (!v.is_tuple_factor && v.table == spec.target)
      sum += m.marginal_entropy[static_cast<size_t>(k)];
  }
  return sum;
}

std::vector<const ModelEntry*> ModelCatalog::entries_for_target(
    const std::string& table) const {
  std::vector<const ModelEntry*> out;
  for (const auto& e : entries)
    if (e.spec.target == table) out.push_back(&e);
  return out;
}

const ModelEntry* ModelCatalog::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key() == key) return &e;
  return nullptr;
}

const ModelEntry* ModelCatalog::best_for_hop(const std::set<std::string>& walked,
                                             const std::string& next,
                                             std::optional<ModelKind> prefer,
                                             const std::string& anchor,
                                             bool allow_partial) const {
  const ModelEntry* best = nullptr;
  size_t best_pre = 0;
  for (const auto& e : entries) {
    if (e.spec.target != next) continue;
    if (!anchor.empty() && e.spec.anchor != anchor) continue;
    size_t pre = 0;
    bool usable = true;
    for (const auto& t : e.order) {
      if (t == next) break;
      if (walked.count(t)) {
        ++pre;
      } else if (!allow_partial) {
        usable = false;
        break;
      }
    }
    if (allow_partial && !walked.count(e.spec.anchor)) usable = false;
    if (!usable) continue;
    if (!best) {
      best = &e;
      best_pre = pre;
      continue;
    }
    if (pre != best_pre) {
      if (pre > best_pre) {
        best = &e;
        best_pre = pre;
      }
      continue;
    }
    if (prefer && (e.kind == *prefer) != (best->kind == *prefer)) {
      if (e.kind == *prefer) best = &e;
      continue;
    }
    if (e.key() < best->key()) best = &e;
  }
  return best;
}

namespace {

// Restricts the merged order to one member's tables and trains its SSAR
// variant; returns false when the anchor offers no set evidence to walk.
bool train_member_ssar(const Dataset& dataset, const AnnotatedSchema& schema,
                       const EncoderSet& encoders, const PairSpec& member,
                       const std::vector<std::string>& merged_order,
                       const TrainConfig& config, uint64_t spec_seed,
                       std::shared_ptr<SSARModel>& out,
                       std::vector<std::string>& restricted_order) {
  const auto member_tables = member.tables();
  restricted_order.clear();
  for (const auto& t : merged_order)
    if (member_tables.count(t)) restricted_order.push_back(t);

  // The walk gathers set evidence around the anchor. Relationships inside
  // the evidence closure are already conditioned on by the AR core; the
  // final-hop FK is excluded when the target is the anchor's parent (the
  // walk must not peek at the row being predicted).
  std::set<std::string> excluded;
  for (const auto& fk : schema.relationships)
    if (member_tables.count(fk.child_table) && member_tables.count(fk.parent_table) &&
        fk.child_table != member.target && fk.parent_table != member.target)
      excluded.insert(fk.id());
  const ForeignKey* final_fk = schema.fk_between(member.anchor, member.target);
  if (final_fk && final_fk->parent_table == member.target) excluded.insert(final_fk->id());

  WalkNode walk = acyclic_walk(schema, member.anchor, excluded);
  if (walk.children.empty()) return false;

  JoinLayout layout = build_layout(schema, encoders, restricted_order);
  std::vector<std::vector<int64_t>> table_rows;
  std::vector<EncodedRow> rows = build_join_rows(dataset, schema, encoders, layout,
                                                 &table_rows);
  const int anchor_pos = layout.position_of(member.anchor);
  const int target_pos = layout.position_of(member.target);

  std::vector<EncodedRow> kept_rows;
  std::vector<EncodedTree> trees;
  for (size_t i = 0; i < rows.size(); ++i) {
    const int64_t anchor_row = table_rows[i][static_cast<size_t>(anchor_pos)];
    if (anchor_row < 0) continue;  // no evidence tuple to root the tree at
    Rng tree_rng(Rng::derive(spec_seed, {0x74726565ull, i}));
    TreeOptions opts;
    opts.exclude_table = member.target;
    opts.exclude_row = table_rows[i][static_cast<size_t>(target_pos)];
    opts.max_children = config.max_children;
    opts.rng = &tree_rng;
    trees.push_back(encode_evidence_tree(dataset, schema, encoders, walk,
                                         static_cast<size_t>(anchor_row), opts));
    kept_rows.push_back(rows[i]);
  }
  if (kept_rows.empty()) return false;

  TrainConfig member_config = config;
  member_config.seed = Rng::derive(spec_seed, {0x73736172ull});
  out = std::make_shared<SSARModel>(train_ssar(kept_rows, trees, layout.vars, schema,
                                               encoders, walk, member_config));
  return true;
}

}  // namespace

ModelCatalog train_all(const Dataset& dataset, const AnnotatedSchema& schema,
                       const std::vector<ModelSpec>& specs, const TrainConfig& config) {
  ModelCatalog catalog;
  catalog.config = config;
  catalog.encoders = fit_encoders(dataset, schema, config.bins);
  catalog.dataset_fingerprint = dataset.fingerprint();
  if (schema.incomplete_tables.empty()) return catalog;

  for (const auto& spec : specs) {
    const uint64_t spec_seed = Rng::derive(config.seed, {string_seed(spec.key())});
    JoinLayout layout = build_layout(schema, catalog.encoders, spec.order);
    std::vector<EncodedRow> rows = build_join_rows(dataset, schema, catalog.encoders,
                                                   layout);
    if (rows.empty())
      throw TrainingError("no training rows for model over '" +
                          join_names(spec.order, ">") + "'");

    auto core = std::make_shared<MaskedARModel>();
    Rng init_rng(Rng::derive(spec_seed, {0x696e6974ull}));
    core->init(layout.vars, config.embed_dim, config.hidden_width, 0, init_rng);
    TrainConfig core_config = config;
    core_config.seed = Rng::derive(spec_seed, {0x636f7265ull});
    train_core(*core, rows, core_config, nullptr);

    for (const auto& member : spec.members) {
      ModelEntry entry;
      entry.spec = member;
      entry.kind = ModelKind::AR;
      entry.order = spec.order;
      entry.ar = core;
      catalog.entries.push_back(std::move(entry));

      std::shared_ptr<SSARModel> ssar;
      std::vector<std::string> restricted;
      if (config.context_dim > 0 &&
          train_member_ssar(dataset, schema, catalog.encoders, member, spec.order,
                            config, spec_seed, ssar, restricted)) {
        ModelEntry se;
        se.spec = member;
        se.kind = ModelKind::SSAR;
        se.order = std::move(restricted);
        se.ssar = std::move(ssar);
        catalog.entries.push_back(std::move(se));
      }
    }
  }

  std::sort(catalog.entries.begin(), catalog.entries.end(),
            [](const ModelEntry& a, const ModelEntry& b) { return a.key() < b.key(); });
  return catalog;
}

std::vector<const ModelEntry*> basic_select(const ModelCatalog& catalog,
                                            const std::string& target,
                                            double threshold) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw ValidationError("selection threshold must lie in (0, 1]");
  std::vector<const ModelEntry*> out;
  for (const ModelEntry* e : catalog.entries_for_target(target)) {
    // Admissible iff the model beats predicting each attribute from its
    // marginal by the required margin. The slack keeps exact-threshold
    // constructions deterministic across FP rounding.
    if (e->target_loss() <= threshold * e->target_entropy() + 1e-9) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const ModelEntry* a, const ModelEntry* b) {
    const double ra = a->target_entropy() > 0 ? a->target_loss() / a->target_entropy() : 0;
    const double rb = b->target_entropy() > 0 ? b->target_loss() / b->target_entropy() : 0;
    if (ra != rb) return ra < rb;
    return a->key() < b->key();
  });
  return out;
}

const PlannedCompletion* CompletionPlan::choice_for(const std::string& table) const {
  for (const auto& c : choices)
    if (c.table == table) return &c;
  return nullptr;
}

uint64_t CompletionPlan::fingerprint() const {
  Fingerprint fp;
  fp.u64(seed);
  fp.u64(recommended ? 1 : 0);
  fp.u64(order.size());
  for (const auto& t : order) fp.str(t);
  fp.u64(choices.size());
  for (const auto& c : choices) {
    fp.str(c.table);
    fp.str(c.entry_key);
  }
  return fp.value();
}

namespace {

struct AttrStats {
  double mean = 0.0;
  double weight = 0.0;
  bool valid() const { return weight > 0.0; }
};

// Mean of a continuous attribute (or designated-value fraction of a
// categorical one) over a table's rows.
AttrStats table_attr_stats(const Dataset& dataset, const std::string& table,
                           const std::string& column, const std::string& designated) {
  AttrStats s;
  const TableData& td = dataset.table(table);
  const Column& col = td.column(column);
  double sum = 0.0, n = 0.0;
  for (size_t r = 0; r < td.row_count; ++r) {
    if (col.is_null(r)) continue;
    if (col.type == ColumnType::Continuous) {
      sum += col.values[r];
    } else {
      sum += col.cell_text(r) == designated ? 1.0 : 0.0;
    }
    n += 1.0;
  }
  if (n > 0) {
    s.mean = sum / n;
    s.weight = n;
  }
  return s;
}

std::string modal_value(const Dataset& dataset, const std::string& table,
                        const std::string& column) {
  const TableData& td = dataset.table(table);
  const Column& col = td.column(column);
  std::map<std::string, size_t> counts;
  for (size_t r = 0; r < td.row_count; ++r)
    if (!col.is_null(r)) ++counts[col.cell_text(r)];
  std::string best;
  size_t best_n = 0;
  for (const auto& [v, c] : counts)
    if (c > best_n) {  // map order makes ties lexicographically smallest
      best = v;
      best_n = c;
    }
  return best;
}

// Mean over the distinct target-table tuples of a completed join: existing
// rows read from `dataset`, synthesized rows decode their drawn indices.
AttrStats completed_attr_stats(const CompletedJoin& join, const Dataset& dataset,
                               const AnnotatedSchema& schema, const EncoderSet& encoders,
                               const std::string& table, const std::string& column,
                               const std::string& designated) {
  AttrStats s;
  const int pos = join.table_pos(table);
  if (pos < 0) return s;
  const TableData& td = dataset.table(table);
  const Column& col = td.column(column);
  const auto& enc = encoders.column_encoder(table, column);
  const auto& attrs = schema.table(table).attribute_columns();
  int attr_pos = -1;
  for (size_t i = 0; i < attrs.size(); ++i)
    if (attrs[i] == column) attr_pos = static_cast<int>(i);
  if (attr_pos < 0) return s;

  double sum = 0.0, n = 0.0;
  std::set<int64_t> seen;
  for (size_t r = 0; r < join.rows.size(); ++r) {
    const int64_t ref = join.rows[r][static_cast<size_t>(pos)];
    if (!seen.insert(ref).second) continue;
    const double w = join.weights[r];
    if (CompletedJoin::is_synth_ref(ref)) {
      const SynthRow& sr = join.synth[CompletedJoin::synth_index(ref)];
      if (sr.nn_row >= 0) {
        if (col.is_null(static_cast<size_t>(sr.nn_row))) continue;
        sum += w * (col.type == ColumnType::Continuous
                        ? col.values[static_cast<size_t>(sr.nn_row)]
                        : (col.cell_text(static_cast<size_t>(sr.nn_row)) == designated
                               ? 1.0
                               : 0.0));
      } else {
        const int32_t idx = sr.attrs[static_cast<size_t>(attr_pos)];
        if (idx >= enc.value_count()) continue;  // drawn null
        sum += w * (col.type == ColumnType::Continuous
                        ? enc.decode_continuous(idx)
                        : (enc.decode_categorical(idx) == designated ? 1.0 : 0.0));
      }
      n += w;
    } else {
      if (col.is_null(static_cast<size_t>(ref))) continue;
      sum += w * (col.type == ColumnType::Continuous
                      ? col.values[static_cast<size_t>(ref)]
                      : (col.cell_text(static_cast<size_t>(ref)) == designated ? 1.0
                                                                               : 0.0));
      n += w;
    }
  }
  if (n > 0) {
    s.mean = sum / n;
    s.weight = n;
  }
  return s;
}

CompletionPlan single_table_plan(const std::string& table, const std::string& entry_key,
                                 uint64_t seed) {
  CompletionPlan plan;
  plan.seed = seed;
  plan.order = {table};
  plan.choices = {{table, entry_key, 0.0, true}};
  return plan;
}

// Score one candidate by rehearsal: re-remove part of the available data,
// complete it with the existing catalog, and measure how much of the induced
// bias the completion undoes (mean over scenarios).
double scenario_score(const Dataset& dataset, const AnnotatedSchema& schema,
                      const ModelCatalog& catalog, const ModelEntry& entry,
                      const std::string& table, const std::string& attribute,
                      int scenarios, uint64_t seed) {
  const bool categorical =
      dataset.table(table).column(attribute).type != ColumnType::Continuous;
  const std::string designated =
      categorical ? modal_value(dataset, table, attribute) : std::string();
  const AttrStats truth = table_attr_stats(dataset, table, attribute, designated);
  if (!truth.valid()) return 0.0;

  double total = 0.0;
  int used = 0;
  for (int s = 0; s < scenarios; ++s) {
    RemovalSpec rs;
    rs.table = table;
    rs.attribute = attribute;
    rs.keep_rate = 0.5;
    rs.removal_correlation = 0.4;
    rs.tf_keep_rate = 1.0;
    rs.seed = Rng::derive(seed, {0x5ce0ull, static_cast<uint64_t>(s)});
    RemovalResult rr = biased_removal(dataset, schema, rs);

    const std::string scen_designated = categorical ? rr.designated_value : designated;
    const AttrStats biased =
        table_attr_stats(rr.data, table, attribute, scen_designated);
    const AttrStats base = categorical && scen_designated != designated
                               ? table_attr_stats(dataset, table, attribute,
                                                  scen_designated)
                               : truth;
    if (!biased.valid() || !base.valid()) continue;
    const double denom = std::abs(base.mean - biased.mean);
    if (denom < 1e-9) continue;  // removal induced no bias; nothing to score

    CompletionPlan sp = single_table_plan(
        table, entry.key(), Rng::derive(seed, {0x5ce1ull, static_cast<uint64_t>(s)}));
    CompletedJoin cj = incompleteness_join(rr.data, schema, catalog, sp, {table}, {});
    const AttrStats completed = completed_attr_stats(
        cj, rr.data, schema, catalog.encoders, table, attribute, scen_designated);
    if (!completed.valid()) continue;

    total += 1.0 - std::abs(completed.mean - base.mean) / denom;
    ++used;
  }
  return used > 0 ? total / used : 0.0;
}

// Direction of the shift one real completion causes on the hinted attribute.
// Returns +1 when completion raises the average, -1 when it lowers it.
int completion_shift(const Dataset& dataset, const AnnotatedSchema& schema,
                     const ModelCatalog& catalog, const ModelEntry& entry,
                     const BiasHint& hint, uint64_t seed) {
  const bool categorical =
      dataset.table(hint.table).column(hint.column).type != ColumnType::Continuous;
  if (categorical) return 0;  // direction hints are about numeric averages
  const AttrStats before = table_attr_stats(dataset, hint.table, hint.column, "");
  if (!before.valid()) return 0;
  CompletionPlan sp =
      single_table_plan(hint.table, entry.key(), Rng::derive(seed, {0xbeadull}));
  CompletedJoin cj =
      incompleteness_join(dataset, schema, catalog, sp, {hint.table}, {});
  const AttrStats after = completed_attr_stats(cj, dataset, schema, catalog.encoders,
                                               hint.table, hint.column, "");
  if (!after.valid()) return 0;
  if (after.mean < before.mean - 1e-12) return -1;
  if (after.mean > before.mean + 1e-12) return +1;
  return 0;
}

}  // namespace

CompletionPlan advanced_select(const Dataset& dataset, const AnnotatedSchema& schema,
                               const ModelCatalog& catalog,
                               const std::vector<std::string>& query_path,
                               const std::optional<BiasHint>& hint, int scenarios,
                               uint64_t seed,
                               const std::map<std::string, std::string>& focus_attrs) {
  CompletionPlan plan;
  plan.seed = seed;

  std::vector<std::string> incomplete;
  for (const auto& t : query_path)
    if (!schema.table_complete(t) &&
        std::find(incomplete.begin(), incomplete.end(), t) == incomplete.end())
      incomplete.push_back(t);
  if (incomplete.empty()) return plan;

  const std::set<std::string> on_path(incomplete.begin(), incomplete.end());

  // Ranked candidate lists per incomplete table.
  std::map<std::string, std::vector<std::pair<double, const ModelEntry*>>> ranked;
  for (const auto& t : incomplete) {
    std::vector<const ModelEntry*> admissible = basic_select(catalog, t);
    // Every table the model conditions on before the target must be complete
    // or scheduled for completion on this path.
    std::vector<const ModelEntry*> usable;
    for (const ModelEntry* e : admissible) {
      bool ok = true;
      for (const auto& pre : e->order) {
        if (pre == t) break;
        if (!schema.table_complete(pre) && !on_path.count(pre)) {
          ok = false;
          break;
        }
      }
      if (ok) usable.push_back(e);
    }
    if (usable.empty()) {
      plan.recommended = false;
      plan.choices.push_back({t, "", 0.0, false});
      continue;
    }

    // Scoring attribute: the hinted column when the hint is about this
    // table, the query's focus attribute otherwise, the first attribute as
    // a deterministic fallback.
    std::string attr;
    if (hint && hint->table == t) {
      attr = hint->column;
    } else if (auto it = focus_attrs.find(t); it != focus_attrs.end()) {
      attr = it->second;
    } else {
      const auto attrs = schema.table(t).attribute_columns();
      if (!attrs.empty()) attr = attrs.front();
    }

    std::vector<const ModelEntry*> candidates = usable;
    if (hint && hint->table == t && candidates.size() > 1) {
      std::vector<const ModelEntry*> conforming;
      for (const ModelEntry* e : candidates) {
        const int shift = completion_shift(dataset, schema, catalog, *e, *hint, seed);
        const bool violates = hint->overestimated ? shift > 0 : shift < 0;
        if (!violates) conforming.push_back(e);
      }
      if (!conforming.empty()) candidates = std::move(conforming);
    }

    std::vector<std::pair<double, const ModelEntry*>> scored;
    if (candidates.size() == 1 || scenarios <= 0 || attr.empty()) {
      // Held-out loss ratio (already basic_select's sort key): best first.
      double rank = 0.0;
      for (const ModelEntry* e : candidates) scored.push_back({rank--, e});
    } else {
      for (const ModelEntry* e : candidates)
        scored.push_back({scenario_score(dataset, schema, catalog, *e, t, attr,
                                         scenarios, seed),
                          e});
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->key() < b.second->key();
      });
    }
    ranked[t] = std::move(scored);
  }

  // Completion order: evidence dependencies among the chosen models must be
  // acyclic. On a cycle the lexicographically last member table retries with
  // its next-ranked candidate.
  std::map<std::string, size_t> pick;
  for (const auto& [t, list] : ranked) pick[t] = 0;
  size_t attempts = 0, max_attempts = 1;
  for (const auto& [t, list] : ranked) max_attempts += list.size();

  std::vector<std::string> order;
  while (true) {
    std::map<std::string, std::set<std::string>> needs;  // table → prerequisites
    for (const auto& [t, list] : ranked) {
      needs[t];
      const ModelEntry* e = list[pick[t]].second;
      for (const auto& ev : e->spec.evidence)
        if (on_path.count(ev) && ev != t) needs[t].insert(ev);
    }
    order.clear();
    std::set<std::string> done;
    bool progress = true;
    while (progress && order.size() < needs.size()) {
      progress = false;
      for (auto& [t, pre] : needs) {  // map order = lexicographic = deterministic
        if (done.count(t)) continue;
        bool ready = true;
        for (const auto& p : pre)
          if (!done.count(p)) ready = false;
        if (ready) {
          order.push_back(t);
          done.insert(t);
          progress = true;
        }
      }
    }
    if (order.size() == needs.size() || ++attempts >= max_attempts) break;
    std::string worst;
    for (const auto& [t, pre] : needs)
      if (!done.count(t)) worst = t;  // lexicographically last unfinished
    if (pick[worst] + 1 < ranked[worst].size()) {
      ++pick[worst];
    } else {
      // No alternative left: schedule the stragglers lexicographically.
      for (const auto& [t, pre] : needs)
        if (!done.count(t)) order.push_back(t);
      break;
    }
  }

  std::vector<PlannedCompletion> unplanned = std::move(plan.choices);
  plan.choices.clear();
  for (const auto& t : order) {
    const auto& list = ranked[t];
    const auto& chosen = list[pick[t]];
    plan.choices.push_back({t, chosen.second->key(), chosen.first, true});
    plan.order.push_back(t);
  }
  // Tables with no admissible model keep their (unrecommended) markers.
  for (auto& c : unplanned) plan.choices.push_back(std::move(c));
  return plan;
}

}  // namespace relcomp
