#include "relcomp/completion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "relcomp/csv.hpp"
#include "relcomp/errors.hpp"
#include "relcomp/fingerprint.hpp"
#include "relcomp/nn_index.hpp"
#include "relcomp/serialize.hpp"

namespace relcomp {

int CompletedJoin::table_pos(const std::string& table) const {
  for (size_t i = 0; i < tables.size(); ++i)
    if (tables[i] == table) return static_cast<int>(i);
  return -1;
}

bool CompletedJoin::row_has_synth(size_t row) const {
  for (int64_t ref : rows[row])
    if (is_synth_ref(ref)) return true;
  return false;
}

void CompletedJoin::recount_origins() {
  existing_rows = 0;
  synthesized_rows = 0;
  for (size_t r = 0; r < rows.size(); ++r)
    (row_has_synth(r) ? synthesized_rows : existing_rows)++;
}

uint64_t CompletedJoin::fingerprint() const {
  Fingerprint fp;
  for (const auto& t : tables) fp.str(t);
  fp.u64(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    for (int64_t ref : rows[r]) fp.i64(ref);
    fp.f64(weights[r]);
  }
  fp.u64(synth.size());
  for (const auto& s : synth) {
    fp.i32(s.table);
    fp.vec(s.attrs);
    fp.u64(s.dists.size());
    for (const auto& d : s.dists) fp.vec(d);
    fp.str(s.entry_key);
    fp.i64(s.nn_row);
    fp.str(s.pk);
  }
  fp.i32(tf_clamp_warnings);
  return fp.value();
}

namespace {

std::string double_text(double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// Dataset-side caches: encoded attribute codes and NN vector space per table.

struct TableCodes {
  int width = 0;
  std::vector<int32_t> flat;
  const int32_t* row(int64_t r) const {
    return flat.data() + static_cast<size_t>(r) * static_cast<size_t>(width);
  }
};

TableCodes encode_table(const Dataset& dataset, const AnnotatedSchema& schema,
                        const EncoderSet& encoders, const std::string& table) {
  TableCodes tc;
  const TableData& td = dataset.table(table);
  tc.width = static_cast<int>(schema.table(table).attribute_columns().size());
  tc.flat.resize(td.row_count * static_cast<size_t>(tc.width));
  for (size_t r = 0; r < td.row_count; ++r) {
    auto v = encode_table_attrs(dataset, schema, encoders, table, r);
    std::copy(v.begin(), v.end(),
              tc.flat.begin() + static_cast<ptrdiff_t>(r * static_cast<size_t>(tc.width)));
  }
  return tc;
}

// One-hot categoricals (null = all zeros), continuous min-max scaled to [0,1]
// over the table's real values (null = 0.5).
struct TableVectors {
  struct Attr {
    bool continuous = false;
    int offset = 0;
    int width = 1;
    int col = -1;  // dataset column index
    double lo = 0.0, hi = 1.0;
    const AttributeEncoder* enc = nullptr;
  };
  std::vector<Attr> attrs;
  int dim = 0;

  double scale(const Attr& a, double v) const {
    if (std::isnan(v)) return 0.5;
    const double x = (v - a.lo) / (a.hi - a.lo);
    return std::clamp(x, 0.0, 1.0);
  }

  void from_real(const TableData& td, int64_t r, double* out) const {
    std::fill(out, out + dim, 0.0);
    for (const auto& a : attrs) {
      const Column& c = td.columns[static_cast<size_t>(a.col)];
      if (a.continuous) {
        out[a.offset] = scale(a, c.values[static_cast<size_t>(r)]);
      } else if (!c.is_null(static_cast<size_t>(r))) {
        const int32_t idx = a.enc->encode_categorical(c.cell_text(static_cast<size_t>(r)));
        if (idx < a.enc->value_count()) out[a.offset + idx] = 1.0;
      }
    }
  }

  void from_synth(const std::vector<int32_t>& cells, double* out) const {
    std::fill(out, out + dim, 0.0);
    for (size_t i = 0; i < attrs.size(); ++i) {
      const auto& a = attrs[i];
      const int32_t idx = cells[i];
      if (a.continuous) {
        out[a.offset] =
            idx < a.enc->value_count() ? scale(a, a.enc->decode_continuous(idx)) : 0.5;
      } else if (idx < a.enc->value_count()) {
        out[a.offset + idx] = 1.0;
      }
    }
  }
};

TableVectors build_vectors(const Dataset& dataset, const AnnotatedSchema& schema,
                           const EncoderSet& encoders, const std::string& table) {
  TableVectors tv;
  const TableDef& def = schema.table(table);
  const TableData& td = dataset.table(table);
  for (const auto& col : def.attribute_columns()) {
    TableVectors::Attr a;
    a.col = td.column_index(col);
    a.enc = &encoders.column_encoder(table, col);
    if (def.column(col).type == ColumnType::Continuous) {
      a.continuous = true;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (double v : td.columns[static_cast<size_t>(a.col)].values)
        if (!std::isnan(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      if (!(lo < hi)) {
        lo = std::isfinite(lo) ? lo - 0.5 : 0.0;
        hi = lo + 1.0;
      }
      a.lo = lo;
      a.hi = hi;
      a.width = 1;
    } else {
      a.width = std::max(1, a.enc->value_count());
    }
    a.offset = tv.dim;
    tv.dim += a.width;
    tv.attrs.push_back(a);
  }
  if (tv.dim == 0) tv.dim = 1;  // keyed-only tables still need a vector space
  return tv;
}

// Assigns each synth row its nearest real row id. Shared by in-walk
// replacement, the public entry point and the orphan top-up matching.
void assign_nn(const Dataset& dataset, const AnnotatedSchema& schema,
               const TableVectors& tv, const NnIndex& index, const std::string& table,
               const std::vector<SynthRow*>& targets, int batch) {
  const TableData& td = dataset.table(table);
  const std::string& pk = schema.table(table).primary_key;
  const Column& pkcol = td.column(pk);
  for (size_t base = 0; base < targets.size(); base += static_cast<size_t>(batch)) {
    const size_t n = std::min(targets.size() - base, static_cast<size_t>(batch));
    Matrix q(static_cast<int>(n), tv.dim);
    for (size_t i = 0; i < n; ++i) tv.from_synth(targets[base + i]->attrs, q.row(static_cast<int>(i)));
    const std::vector<int> hit = index.query_batch(q);
    for (size_t i = 0; i < n; ++i) {
      SynthRow& s = *targets[base + i];
      s.nn_row = hit[i];
      s.pk = pkcol.cell_text(static_cast<size_t>(hit[i]));
      s.dists.clear();
    }
  }
}

// ---------------------------------------------------------------------------
// Walk execution.

struct Hop {
  std::string table;
  int pos = 0;
  int anchor = -1;                    // walk position of the evidence side
  const ForeignKey* fk = nullptr;     // null only for the root
  bool fanout = false;                // table sits on the many side of fk
  const ModelEntry* entry = nullptr;  // synthesis model, may be null
};

struct ExecRow {
  std::vector<int64_t> refs;  // per walk position; -1 until the hop fills it
  std::vector<int32_t> tfs;   // per fan-out hop: tuple factor used, else -1
  double weight = 1.0;
};

// Model entry prepared against a concrete walk: where each model variable
// reads its evidence from.
struct ModelRuntime {
  const ModelEntry* entry = nullptr;
  JoinLayout layout;
  int target_pos = -1;  // position of the target table in the model order
  int attr_start = 0, attr_count = 0, tf_var = -1;
  std::string anchor_table;  // the layout anchor of the target
  int anchor_walk = -1;      // walk position of the spec anchor (tree root)
  std::vector<int> var_walk;        // per var: walk position of its table
  std::vector<int> var_attr;        // per var: attribute index in its table
  std::vector<int> tf_child_walk;   // per TF var: hop position tracking it
  std::vector<int> tf_parent_walk;  // per TF var: parent table's position
};

struct Task {
  size_t src = 0;    // evidence row
  int32_t tf = -1;   // decided tuple factor (fan-out synthesis only)
};

struct TaskOut {
  std::vector<int32_t> cells;
  std::vector<std::vector<float>> dists;
};

class WalkExec {
 public:
  WalkExec(const Dataset& dataset, const AnnotatedSchema& schema,
           const ModelCatalog& catalog, const CompletionPlan& plan)
      : dataset_(dataset), schema_(schema), catalog_(catalog), plan_(plan) {}

  CompletedJoin run(const std::vector<std::string>& query_tables,
                    const CompletionFilters& filters, bool topup) {
    build_walk(query_tables);
    init_root(filters);
    for (size_t i = 1; i < hops_.size(); ++i) {
      if (hops_[i].fanout)
        hop_fanout(hops_[i]);
      else
        hop_parent(hops_[i]);
    }
    if (topup) top_up();
    return finish();
  }

 private:
  // --- walk construction -----------------------------------------------

  bool adjacent(const std::string& t, const std::set<std::string>& placed) const {
    for (const auto& p : placed)
      if (schema_.fk_between(t, p)) return true;
    return false;
  }

  void build_walk(const std::vector<std::string>& query_tables) {
    if (query_tables.empty()) throw ValidationError("completion needs at least one query table");
    for (const auto& t : query_tables) schema_.table(t);

    std::vector<std::string> order;
    std::set<std::string> in;
    std::map<std::string, const ModelEntry*> chosen;
    auto append = [&](const std::string& t) {
      order.push_back(t);
      in.insert(t);
    };

    for (const auto& t : plan_.order) {
      const PlannedCompletion* c = plan_.choice_for(t);
      if (!c || c->entry_key.empty()) continue;
      const ModelEntry* e = catalog_.find(c->entry_key);
      if (!e) throw ValidationError("plan references unknown model '" + c->entry_key + "'");
      if (e->spec.target != t)
        throw ValidationError("model '" + c->entry_key + "' does not complete table '" + t + "'");
      chosen[t] = e;
      std::vector<std::string> pending;
      for (const auto& tbl : e->order) {
        if (tbl == t) break;
        if (!in.count(tbl)) pending.push_back(tbl);
      }
      while (!pending.empty()) {
        bool progressed = false;
        for (auto it = pending.begin(); it != pending.end(); ++it) {
          if (order.empty() || adjacent(*it, in)) {
            append(*it);
            pending.erase(it);
            progressed = true;
            break;
          }
        }
        if (!progressed)
          throw ExecutionError("evidence tables of model '" + c->entry_key +
                               "' do not FK-connect to the walk");
      }
      if (!in.count(t)) {
        if (!order.empty() && !adjacent(t, in))
          throw ExecutionError("completion target '" + t + "' does not FK-connect to the walk");
        append(t);
      }
    }

    std::vector<std::string> rest;
    for (const auto& t : query_tables)
      if (!in.count(t) && std::find(rest.begin(), rest.end(), t) == rest.end())
        rest.push_back(t);
    std::sort(rest.begin(), rest.end());
    while (!rest.empty()) {
      size_t pick = rest.size();
      for (size_t i = 0; i < rest.size(); ++i) {
        if (order.empty() || adjacent(rest[i], in)) {
          pick = i;
          break;
        }
      }
      if (pick == rest.size())
        throw ExecutionError("query tables are not FK-connected to the walk");
      append(rest[pick]);
      rest.erase(rest.begin() + static_cast<ptrdiff_t>(pick));
    }

    hops_.resize(order.size());
    for (size_t i = 0; i < order.size(); ++i) {
      hops_[i].table = order[i];
      hops_[i].pos = static_cast<int>(i);
      walk_pos_[order[i]] = static_cast<int>(i);
    }

    std::set<std::string> walked;
    for (size_t i = 0; i < order.size(); ++i) {
      Hop& h = hops_[i];
      if (i == 0) {
        walked.insert(h.table);
        continue;
      }
      auto te = chosen.find(h.table);
      if (te != chosen.end()) {
        h.entry = te->second;
        const ModelRuntime& rt = runtime(*h.entry);
        const int la = rt.layout.anchor[static_cast<size_t>(rt.target_pos)];
        const std::string& at = rt.layout.order[static_cast<size_t>(la)];
        h.anchor = walk_pos_.at(at);
        h.fk = rt.layout.via[static_cast<size_t>(rt.target_pos)];
        h.fanout = rt.layout.fanout[static_cast<size_t>(rt.target_pos)];
        if (h.anchor >= static_cast<int>(i))
          throw ExecutionError("model anchor for '" + h.table + "' is not walked yet");
      } else {
        for (size_t j = i; j-- > 0;) {
          if (const ForeignKey* fk = schema_.fk_between(h.table, order[j])) {
            h.anchor = static_cast<int>(j);
            h.fk = fk;
            break;
          }
        }
        if (!h.fk)
          throw ExecutionError("table '" + h.table + "' is not FK-connected to the walk");
        h.fanout = h.fk->child_table == h.table;
        const std::string& at = order[static_cast<size_t>(h.anchor)];
        const ModelEntry* e = catalog_.best_for_hop(walked, h.table, {}, at);
        if (!e) e = catalog_.best_for_hop(walked, h.table, {}, at, /*allow_partial=*/true);
        if (e && runtime(*e).anchor_table != at) e = nullptr;
        h.entry = e;
      }
      walked.insert(h.table);
    }
  }

  // --- per-model runtime -------------------------------------------------

  int walk_pos(const std::string& table) const {
    auto it = walk_pos_.find(table);
    return it == walk_pos_.end() ? -1 : it->second;
  }

  const ModelRuntime& runtime(const ModelEntry& e) {
    auto it = runtimes_.find(&e);
    if (it != runtimes_.end()) return it->second;
    ModelRuntime rt;
    rt.entry = &e;
    rt.layout = build_layout(schema_, catalog_.encoders, e.order);
    rt.target_pos = rt.layout.position_of(e.spec.target);
    const auto tp = static_cast<size_t>(rt.target_pos);
    rt.attr_start = rt.layout.table_first_var[tp];
    rt.attr_count = rt.layout.table_var_count[tp];
    rt.tf_var = rt.layout.tf_var[tp];
    const int la = rt.layout.anchor[tp];
    rt.anchor_table = la >= 0 ? rt.layout.order[static_cast<size_t>(la)] : "";
    rt.anchor_walk = walk_pos(e.spec.anchor);

    const size_t nv = rt.layout.vars.size();
    rt.var_walk.assign(nv, -1);
    rt.var_attr.assign(nv, -1);
    rt.tf_child_walk.assign(nv, -1);
    rt.tf_parent_walk.assign(nv, -1);
    for (size_t mp = 0; mp < rt.layout.order.size(); ++mp) {
      const int wp = walk_pos(rt.layout.order[mp]);
      const int first = rt.layout.table_first_var[mp];
      for (int j = 0; j < rt.layout.table_var_count[mp]; ++j) {
        rt.var_walk[static_cast<size_t>(first + j)] = wp;
        rt.var_attr[static_cast<size_t>(first + j)] = j;
      }
      const int tv = rt.layout.tf_var[mp];
      if (tv >= 0) {
        const ForeignKey* fk = rt.layout.via[mp];
        const int cp = walk_pos(fk->child_table);
        if (cp >= 0 && hops_[static_cast<size_t>(cp)].fk &&
            hops_[static_cast<size_t>(cp)].fk->id() == fk->id() &&
            hops_[static_cast<size_t>(cp)].fanout)
          rt.tf_child_walk[static_cast<size_t>(tv)] = cp;
        rt.tf_parent_walk[static_cast<size_t>(tv)] = walk_pos(fk->parent_table);
      }
    }
    return runtimes_.emplace(&e, std::move(rt)).first->second;
  }

  // --- caches ------------------------------------------------------------

  const TableCodes& codes(const std::string& table) {
    auto it = codes_.find(table);
    if (it == codes_.end())
      it = codes_.emplace(table, encode_table(dataset_, schema_, catalog_.encoders, table)).first;
    return it->second;
  }

  const TableVectors& vectors(const std::string& table) {
    auto it = vectors_.find(table);
    if (it == vectors_.end())
      it = vectors_.emplace(table, build_vectors(dataset_, schema_, catalog_.encoders, table)).first;
    return it->second;
  }

  const NnIndex& nn_index(const std::string& table) {
    auto it = nn_.find(table);
    if (it == nn_.end()) {
      const TableVectors& tv = vectors(table);
      const TableData& td = dataset_.table(table);
      Matrix points(static_cast<int>(td.row_count), tv.dim);
      for (size_t r = 0; r < td.row_count; ++r)
        tv.from_real(td, static_cast<int64_t>(r), points.row(static_cast<int>(r)));
      it = nn_.emplace(table, std::make_unique<NnIndex>(std::move(points))).first;
    }
    return *it->second;
  }

  // --- evidence ------------------------------------------------------------

  int64_t eff_ref(int64_t ref) const {
    if (ref >= 0) return ref;
    if (CompletedJoin::is_synth_ref(ref)) {
      const SynthRow& s = synth_[CompletedJoin::synth_index(ref)];
      if (s.nn_row >= 0) return s.nn_row;
    }
    return -1;
  }

  int32_t tf_evidence(const ModelRuntime& rt, size_t v, const ExecRow& row) const {
    const int cwp = rt.tf_child_walk[v];
    if (cwp >= 0) return row.tfs[static_cast<size_t>(cwp)];
    const int pwp = rt.tf_parent_walk[v];
    if (pwp >= 0) {
      const int64_t ref = eff_ref(row.refs[static_cast<size_t>(pwp)]);
      if (ref >= 0) {
        auto it = dataset_.tuple_factors.find(rt.layout.vars[v].fk_id);
        if (it != dataset_.tuple_factors.end()) return it->second.counts[static_cast<size_t>(ref)];
      }
    }
    return -1;
  }

  void fill_evidence(const ModelRuntime& rt, const ExecRow& row, int32_t tf_value,
                     EncodedRow& out) {
    const MaskedARModel& core = rt.entry->core();
    out.indices.assign(static_cast<size_t>(core.n_vars()), 0);
    out.observed = rt.attr_start;
    for (size_t v = 0; v < static_cast<size_t>(rt.attr_start); ++v) {
      const VariableInfo& var = core.vars[v];
      const AttributeEncoder& enc = encoder_for(catalog_.encoders, var);
      int32_t idx;
      if (var.is_tuple_factor) {
        idx = enc.encode_tuple_factor(static_cast<int>(v) == rt.tf_var ? tf_value
                                                                       : tf_evidence(rt, v, row));
      } else {
        const int wp = rt.var_walk[v];
        idx = enc.null_index();
        if (wp >= 0) {
          const int64_t ref = row.refs[static_cast<size_t>(wp)];
          const int j = rt.var_attr[v];
          if (ref >= 0) {
            idx = codes(var.table).row(ref)[j];
          } else if (CompletedJoin::is_synth_ref(ref)) {
            const SynthRow& s = synth_[CompletedJoin::synth_index(ref)];
            idx = s.nn_row >= 0 ? codes(var.table).row(s.nn_row)[j]
                                : s.attrs[static_cast<size_t>(j)];
          }
        }
      }
      out.indices[v] = idx;
    }
  }

  std::vector<double> context_for(const ModelRuntime& rt, const ExecRow& row, uint64_t seed) {
    const SSARModel& m = *rt.entry->ssar;
    EncodedTree tree;
    const int64_t ref =
        rt.anchor_walk >= 0 ? row.refs[static_cast<size_t>(rt.anchor_walk)] : -1;
    const int64_t eff = eff_ref(ref);
    if (eff >= 0) {
      Rng rng(seed);
      TreeOptions opts;
      opts.max_children = catalog_.config.max_children;
      opts.rng = &rng;
      tree = encode_evidence_tree(dataset_, schema_, catalog_.encoders, m.walk,
                                  static_cast<size_t>(eff), opts);
    } else {
      if (CompletedJoin::is_synth_ref(ref))
        tree.attrs = synth_[CompletedJoin::synth_index(ref)].attrs;
      else
        tree.attrs.assign(
            schema_.table(m.walk.table).attribute_columns().size(), 0);
      for (const auto& child : m.walk.children)
        tree.groups.push_back({child.table, child.via.id(), child.fanout, {}});
    }
    return m.tree.forward(tree);
  }

  // Samples model positions [from, to) for every task, in chunks. Rngs and
  // tree subsampling are derived per (hop, tag, task), so results do not
  // depend on chunking or threading.
  std::vector<TaskOut> sample_tasks(const ModelRuntime& rt, const std::vector<Task>& tasks,
                                    int hop, int from, int to, uint64_t tag, bool record) {
    std::vector<TaskOut> out(tasks.size());
    const MaskedARModel& core = rt.entry->core();
    const bool ssar = rt.entry->kind == ModelKind::SSAR;
    // Sampled positions belong to the tuple being synthesized, which is known
    // to exist, so its attributes are conditioned on being present.
    std::vector<uint8_t> no_null(core.vars.size(), 0);
    for (int k = from; k < to; ++k) no_null[static_cast<size_t>(k)] = 1;
    constexpr size_t kChunk = 1024;
    for (size_t base = 0; base < tasks.size(); base += kChunk) {
      const size_t n = std::min(kChunk, tasks.size() - base);
      std::vector<EncodedRow> rows(n);
      std::vector<Rng> rngs;
      rngs.reserve(n);
      std::vector<std::vector<double>> ctx_store(ssar ? n : 0);
      std::vector<const double*> ctxs(n, nullptr);
      for (size_t i = 0; i < n; ++i) {
        const Task& t = tasks[base + i];
        fill_evidence(rt, rows_[t.src], t.tf, rows[i]);
        const uint64_t id = static_cast<uint64_t>(base + i);
        rngs.emplace_back(Rng::derive(plan_.seed, {static_cast<uint64_t>(hop), tag, id}));
        if (ssar) {
          ctx_store[i] = context_for(
              rt, rows_[t.src],
              Rng::derive(plan_.seed, {static_cast<uint64_t>(hop), tag, id, 0x7472u}));
          ctxs[i] = ctx_store[i].data();
        }
      }
      std::vector<Matrix> dists;
      core.sample_block(std::span<EncodedRow>(rows.data(), n), from, to,
                        std::span<Rng>(rngs.data(), n), ctxs, nullptr, &no_null,
                        record ? &dists : nullptr);
      for (size_t i = 0; i < n; ++i) {
        TaskOut& o = out[base + i];
        o.cells.assign(rows[i].indices.begin() + from, rows[i].indices.begin() + to);
        if (record) {
          o.dists.resize(static_cast<size_t>(to - from));
          for (int k = 0; k < to - from; ++k) {
            const Matrix& d = dists[static_cast<size_t>(k)];
            o.dists[static_cast<size_t>(k)].assign(d.row(static_cast<int>(i)),
                                                   d.row(static_cast<int>(i)) + d.cols);
          }
        }
      }
    }
    return out;
  }

  std::string synth_pk(const std::string& table) {
    return "~synth:" + table + ":" + std::to_string(pk_counter_++);
  }

  void replace_by_nn(const std::string& table, const std::vector<size_t>& ids) {
    if (ids.empty() || dataset_.table(table).row_count == 0) return;
    std::vector<SynthRow*> targets;
    targets.reserve(ids.size());
    for (size_t id : ids) targets.push_back(&synth_[id]);
    assign_nn(dataset_, schema_, vectors(table), nn_index(table), table, targets, 1024);
  }

  // --- hops ----------------------------------------------------------------

  void hop_fanout(const Hop& h) {
    const ForeignKey& fk = *h.fk;
    const FkIndex& fidx = dataset_.fk_index(fk.id());
    auto tfit = dataset_.tuple_factors.find(fk.id());
    const TupleFactorColumn* tfc = tfit == dataset_.tuple_factors.end() ? nullptr : &tfit->second;
    const bool w_complete = schema_.table_complete(h.table);
    const auto wp = static_cast<size_t>(h.pos);
    const auto ap = static_cast<size_t>(h.anchor);
    const ModelRuntime* rt = h.entry ? &runtime(*h.entry) : nullptr;

    std::vector<int32_t> tf(rows_.size(), 0);
    std::vector<Task> tf_tasks;
    std::vector<size_t> tf_rows;
    for (size_t r = 0; r < rows_.size(); ++r) {
      const int64_t era = eff_ref(rows_[r].refs[ap]);
      const int nchild =
          era >= 0 ? static_cast<int>(fidx.parent_children[static_cast<size_t>(era)].size()) : 0;
      const int32_t known = era >= 0 && tfc ? tfc->counts[static_cast<size_t>(era)] : -1;
      if (w_complete && era >= 0)
        tf[r] = nchild;  // a complete table already holds every partner
      else if (known >= 0)
        tf[r] = known;
      else if (rt && rt->tf_var >= 0) {
        tf_tasks.push_back({r, -1});
        tf_rows.push_back(r);
      } else {
        tf[r] = nchild;
      }
    }
    if (!tf_tasks.empty()) {
      auto outs = sample_tasks(*rt, tf_tasks, h.pos, rt->tf_var, rt->tf_var + 1, 0xau, false);
      const AttributeEncoder& enc = catalog_.encoders.tf_encoder(fk.id());
      for (size_t i = 0; i < outs.size(); ++i)
        tf[tf_rows[i]] = enc.decode_tuple_factor(outs[i].cells[0]);
    }

    std::vector<ExecRow> next;
    std::vector<Task> tasks;
    for (size_t r = 0; r < rows_.size(); ++r) {
      const int64_t era = eff_ref(rows_[r].refs[ap]);
      const std::vector<int32_t>* children =
          era >= 0 ? &fidx.parent_children[static_cast<size_t>(era)] : nullptr;
      const int nchild = children ? static_cast<int>(children->size()) : 0;
      int t = tf[r];
      if (t < nchild) {
        t = nchild;
        ++warnings_;
      }
      rows_[r].tfs[wp] = t;
      if (children)
        for (int32_t c : *children) {
          ExecRow nr = rows_[r];
          nr.refs[wp] = c;
          next.push_back(std::move(nr));
        }
      const int deficit = t - nchild;
      if (deficit > 0) {
        if (!rt)
          throw ExecutionError("hop into '" + h.table +
                               "' needs synthesis but no model is available");
        for (int d = 0; d < deficit; ++d) tasks.push_back({r, t});
      }
    }

    if (!tasks.empty()) {
      auto outs = sample_tasks(*rt, tasks, h.pos, rt->attr_start,
                               rt->attr_start + rt->attr_count, 0xbu, true);
      std::vector<size_t> created;
      created.reserve(tasks.size());
      for (size_t i = 0; i < tasks.size(); ++i) {
        SynthRow s;
        s.table = h.pos;
        s.attrs = std::move(outs[i].cells);
        s.dists = std::move(outs[i].dists);
        s.entry_key = h.entry->key();
        s.pk = synth_pk(h.table);
        created.push_back(synth_.size());
        synth_.push_back(std::move(s));
        ExecRow nr = rows_[tasks[i].src];
        nr.refs[wp] = CompletedJoin::synth_ref(created.back());
        next.push_back(std::move(nr));
      }
      if (w_complete) replace_by_nn(h.table, created);
    }
    rows_.swap(next);
  }

  void hop_parent(const Hop& h) {
    const ForeignKey& fk = *h.fk;
    const FkIndex& fidx = dataset_.fk_index(fk.id());
    const bool w_complete = schema_.table_complete(h.table);
    const auto wp = static_cast<size_t>(h.pos);
    const auto ap = static_cast<size_t>(h.anchor);
    const Column& fkcol = dataset_.table(fk.child_table).column(fk.child_column);

    std::vector<ExecRow> next;
    std::vector<Task> tasks;
    std::vector<std::vector<size_t>> task_rows;
    std::vector<std::string> task_pk;  // "" → fresh synthetic key
    std::map<std::string, size_t> group_task;
    std::map<int64_t, size_t> synth_group;  // synthesized anchors share a parent

    auto enlist = [&](auto& groups, const auto& key, size_t r, const std::string& pk) {
      auto [it, fresh] = groups.emplace(key, tasks.size());
      if (fresh) {
        tasks.push_back({r, -1});
        task_rows.emplace_back();
        task_pk.push_back(pk);
      }
      task_rows[it->second].push_back(r);
    };

    for (size_t r = 0; r < rows_.size(); ++r) {
      const int64_t aref = rows_[r].refs[ap];
      const int64_t era = eff_ref(aref);
      if (era >= 0) {
        const int64_t parent = fidx.child_to_parent[static_cast<size_t>(era)];
        if (parent >= 0) {
          ExecRow nr = rows_[r];
          nr.refs[wp] = parent;
          next.push_back(std::move(nr));
          continue;
        }
        if (w_complete) continue;  // dangling FK against a complete table
        const std::string key = fkcol.cell_text(static_cast<size_t>(era));
        if (!key.empty()) {
          enlist(group_task, key, r, key);
          continue;
        }
        tasks.push_back({r, -1});
        task_rows.push_back({r});
        task_pk.emplace_back();
      } else {
        enlist(synth_group, aref, r, "");
      }
    }

    if (!tasks.empty()) {
      if (!h.entry)
        throw ExecutionError("hop into '" + h.table +
                             "' needs synthesis but no model is available");
      const ModelRuntime& rt = runtime(*h.entry);
      auto outs =
          sample_tasks(rt, tasks, h.pos, rt.attr_start, rt.attr_start + rt.attr_count, 0xbu, true);
      std::vector<size_t> created;
      created.reserve(tasks.size());
      for (size_t i = 0; i < tasks.size(); ++i) {
        SynthRow s;
        s.table = h.pos;
        s.attrs = std::move(outs[i].cells);
        s.dists = std::move(outs[i].dists);
        s.entry_key = h.entry->key();
        s.pk = task_pk[i].empty() ? synth_pk(h.table) : task_pk[i];
        created.push_back(synth_.size());
        synth_.push_back(std::move(s));
        const int64_t ref = CompletedJoin::synth_ref(created.back());
        for (size_t r : task_rows[i]) {
          ExecRow nr = rows_[r];
          nr.refs[wp] = ref;
          next.push_back(std::move(nr));
        }
      }
      if (w_complete) replace_by_nn(h.table, created);
    }
    rows_.swap(next);
  }

  // --- orphan top-up ---------------------------------------------------------

  void top_up() {
    for (size_t i = 1; i < hops_.size(); ++i) {
      const Hop& h = hops_[i];
      if (!h.fk || schema_.table_complete(h.table)) continue;
      const FkIndex& fidx = dataset_.fk_index(h.fk->id());
      const TableData& td = dataset_.table(h.table);

      std::vector<size_t> slots;
      std::vector<std::vector<size_t>> slot_rows;
      std::map<size_t, size_t> slot_of;
      for (size_t r = 0; r < rows_.size(); ++r) {
        const int64_t ref = rows_[r].refs[i];
        if (!CompletedJoin::is_synth_ref(ref)) continue;
        const size_t si = CompletedJoin::synth_index(ref);
        if (synth_[si].nn_row >= 0) continue;
        auto [it, fresh] = slot_of.emplace(si, slots.size());
        if (fresh) {
          slots.push_back(si);
          slot_rows.emplace_back();
        }
        slot_rows[it->second].push_back(r);
      }
      if (slots.empty()) continue;

      const TableVectors& tv = vectors(h.table);
      Matrix sv(static_cast<int>(slots.size()), tv.dim);
      for (size_t k = 0; k < slots.size(); ++k)
        tv.from_synth(synth_[slots[k]].attrs, sv.row(static_cast<int>(k)));
      std::vector<bool> used(slots.size(), false);
      size_t remaining = slots.size();
      std::vector<double> q(static_cast<size_t>(tv.dim));
      auto nearest = [&]() {
        size_t best = slots.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < slots.size(); ++k) {
          if (used[k]) continue;
          double d = 0.0;
          const double* p = sv.row(static_cast<int>(k));
          for (int j = 0; j < tv.dim; ++j) d += (q[static_cast<size_t>(j)] - p[j]) *
                                                (q[static_cast<size_t>(j)] - p[j]);
          if (d < best_d) {
            best_d = d;
            best = k;
          }
        }
        return best;
      };
      auto claim = [&](size_t k, int64_t row_id) {
        used[k] = true;
        --remaining;
        for (size_t r : slot_rows[k]) rows_[r].refs[i] = row_id;
      };

      if (h.fanout) {
        // Real rows whose link data is missing each take over one slot.
        for (size_t v = 0; v < td.row_count && remaining > 0; ++v) {
          if (fidx.child_to_parent[v] >= 0) continue;
          tv.from_real(td, static_cast<int64_t>(v), q.data());
          claim(nearest(), static_cast<int64_t>(v));
        }
      } else {
        // Never-referenced parents claim their expected share of slots.
        auto tfit = dataset_.tuple_factors.find(h.fk->id());
        double sum = 0.0;
        size_t n = 0;
        if (tfit != dataset_.tuple_factors.end())
          for (int32_t c : tfit->second.counts)
            if (c >= 0) {
              sum += c;
              ++n;
            }
        if (n == 0)
          for (const auto& ch : fidx.parent_children)
            if (!ch.empty()) {
              sum += static_cast<double>(ch.size());
              ++n;
            }
        const long share = std::max(1l, std::lround(n > 0 ? sum / static_cast<double>(n) : 1.0));
        for (size_t v = 0; v < td.row_count && remaining > 0; ++v) {
          if (!fidx.parent_children[v].empty()) continue;
          tv.from_real(td, static_cast<int64_t>(v), q.data());
          for (long s = 0; s < share && remaining > 0; ++s)
            claim(nearest(), static_cast<int64_t>(v));
        }
      }
    }
  }

  // --- root and assembly ------------------------------------------------------

  void init_root(const CompletionFilters& filters) {
    const std::string& root = hops_[0].table;
    const TableData& td = dataset_.table(root);
    std::vector<std::pair<const Column*, const std::string*>> fs;
    for (const auto& [key, value] : filters.root_equals) {
      const size_t dot = key.find('.');
      if (dot == std::string::npos)
        throw ValidationError("completion filter key must be table.column: '" + key + "'");
      if (key.substr(0, dot) != root) continue;
      fs.emplace_back(&td.column(key.substr(dot + 1)), &value);
    }
    const size_t n = hops_.size();
    for (size_t r = 0; r < td.row_count; ++r) {
      bool ok = true;
      for (const auto& [col, value] : fs)
        if (col->cell_text(r) != *value) {
          ok = false;
          break;
        }
      if (!ok) continue;
      ExecRow row;
      row.refs.assign(n, -1);
      row.tfs.assign(n, -1);
      row.refs[0] = static_cast<int64_t>(r);
      rows_.push_back(std::move(row));
    }
  }

  CompletedJoin finish() {
    CompletedJoin out;
    out.tables.reserve(hops_.size());
    for (const auto& h : hops_) out.tables.push_back(h.table);
    std::vector<int64_t> remap(synth_.size(), -1);
    out.rows.reserve(rows_.size());
    out.weights.reserve(rows_.size());
    for (const auto& row : rows_) {
      std::vector<int64_t> refs = row.refs;
      for (auto& ref : refs) {
        if (!CompletedJoin::is_synth_ref(ref)) continue;
        const size_t si = CompletedJoin::synth_index(ref);
        if (remap[si] < 0) {
          remap[si] = static_cast<int64_t>(out.synth.size());
          out.synth.push_back(synth_[si]);
        }
        ref = CompletedJoin::synth_ref(static_cast<size_t>(remap[si]));
      }
      out.rows.push_back(std::move(refs));
      out.weights.push_back(row.weight);
    }
    out.tf_clamp_warnings = warnings_;
    out.recount_origins();
    return out;
  }

  const Dataset& dataset_;
  const AnnotatedSchema& schema_;
  const ModelCatalog& catalog_;
  const CompletionPlan& plan_;

  std::vector<Hop> hops_;
  std::map<std::string, int> walk_pos_;
  std::vector<ExecRow> rows_;
  std::vector<SynthRow> synth_;
  int warnings_ = 0;
  size_t pk_counter_ = 0;

  std::map<const ModelEntry*, ModelRuntime> runtimes_;
  std::map<std::string, TableCodes> codes_;
  std::map<std::string, TableVectors> vectors_;
  std::map<std::string, std::unique_ptr<NnIndex>> nn_;
};

// Projects a join onto `query_tables`, dividing weight by the number of walk
// rows collapsing onto each projected tuple. Identity treats NN-replaced
// tuples as the real row they adopted.
CompletedJoin project_join(const CompletedJoin& in, const std::vector<std::string>& query_tables) {
  if (in.tables == query_tables) return in;
  std::vector<int> pos;
  pos.reserve(query_tables.size());
  for (const auto& t : query_tables) {
    const int p = in.table_pos(t);
    if (p < 0) throw ExecutionError("projection table '" + t + "' is not part of the join");
    pos.push_back(p);
  }

  std::map<std::vector<int64_t>, std::vector<size_t>> combos;
  for (size_t r = 0; r < in.rows.size(); ++r) {
    std::vector<int64_t> key(pos.size());
    for (size_t i = 0; i < pos.size(); ++i) {
      int64_t ref = in.rows[r][static_cast<size_t>(pos[i])];
      if (CompletedJoin::is_synth_ref(ref)) {
        const SynthRow& s = in.synth[CompletedJoin::synth_index(ref)];
        if (s.nn_row >= 0) ref = s.nn_row;
      }
      key[i] = ref;
    }
    combos[std::move(key)].push_back(r);
  }

  CompletedJoin out;
  out.tables = query_tables;
  out.tf_clamp_warnings = in.tf_clamp_warnings;
  std::vector<int64_t> remap(in.synth.size(), -1);
  for (const auto& [key, members] : combos) {
    double wsum = 0.0;
    for (size_t m : members) wsum += in.weights[m];
    std::vector<int64_t> refs(pos.size());
    for (size_t i = 0; i < pos.size(); ++i) {
      int64_t ref = in.rows[members.front()][static_cast<size_t>(pos[i])];
      if (CompletedJoin::is_synth_ref(ref)) {
        const size_t si = CompletedJoin::synth_index(ref);
        if (remap[si] < 0) {
          remap[si] = static_cast<int64_t>(out.synth.size());
          out.synth.push_back(in.synth[si]);
          out.synth.back().table = static_cast<int32_t>(i);
        }
        ref = CompletedJoin::synth_ref(static_cast<size_t>(remap[si]));
      }
      refs[i] = ref;
    }
    out.rows.push_back(std::move(refs));
    out.weights.push_back(wsum / static_cast<double>(members.size()));
  }
  out.recount_origins();
  return out;
}

std::map<std::string, CompletedJoin>& offline_registry() {
  static std::map<std::string, CompletedJoin> reg;
  return reg;
}

std::string offline_key(uint64_t dataset_fp, const std::string& complete_table,
                        const std::string& incomplete_table, uint64_t plan_fp) {
  Fingerprint fp;
  fp.u64(dataset_fp);
  fp.str(complete_table);
  fp.str(incomplete_table);
  fp.u64(plan_fp);
  return fp.hex();
}

}  // namespace

CompletedJoin incompleteness_join(const Dataset& dataset, const AnnotatedSchema& schema,
                                  const ModelCatalog& catalog, const CompletionPlan& plan,
                                  const std::vector<std::string>& query_tables,
                                  const CompletionFilters& filters) {
  return WalkExec(dataset, schema, catalog, plan).run(query_tables, filters, false);
}

CompletedJoin complete_multi_incomplete(const Dataset& dataset, const AnnotatedSchema& schema,
                                        const ModelCatalog& catalog, const CompletionPlan& plan,
                                        const std::vector<std::string>& query_tables,
                                        const CompletionFilters& filters) {
  return WalkExec(dataset, schema, catalog, plan).run(query_tables, filters, true);
}

CompletedJoin complete_with_additional_tables(const Dataset& dataset,
                                              const AnnotatedSchema& schema,
                                              const ModelCatalog& catalog,
                                              const CompletionPlan& plan,
                                              const std::vector<std::string>& query_tables,
                                              const CompletionFilters& filters) {
  CompletedJoin walk = WalkExec(dataset, schema, catalog, plan).run(query_tables, filters, true);
  return project_join(walk, query_tables);
}

void nearest_neighbor_replace(CompletedJoin& join, const Dataset& dataset,
                              const AnnotatedSchema& schema, const EncoderSet& encoders,
                              const std::string& table, int batch, double epsilon,
                              uint64_t seed) {
  const int pos = join.table_pos(table);
  if (pos < 0) throw ValidationError("table '" + table + "' is not part of the join");
  if (!schema.table_complete(table))
    throw ValidationError("nearest-neighbor replacement needs a complete table, got '" + table +
                          "'");
  const TableData& td = dataset.table(table);
  std::vector<SynthRow*> targets;
  for (auto& s : join.synth)
    if (s.table == pos && s.nn_row < 0) targets.push_back(&s);
  if (targets.empty() || td.row_count == 0) return;

  const TableVectors tv = build_vectors(dataset, schema, encoders, table);
  Matrix points(static_cast<int>(td.row_count), tv.dim);
  for (size_t r = 0; r < td.row_count; ++r)
    tv.from_real(td, static_cast<int64_t>(r), points.row(static_cast<int>(r)));
  NnIndexParams params;
  params.epsilon = epsilon;
  params.seed = seed;
  const NnIndex index(std::move(points), params);
  assign_nn(dataset, schema, tv, index, table, targets, batch);
}

CompletedJoin multi_path_complete(const Dataset& dataset, const AnnotatedSchema& schema,
                                  const ModelCatalog& catalog,
                                  const std::vector<CompletionPlan>& plans,
                                  const std::string& target) {
  if (plans.empty()) throw ValidationError("multi-path completion needs at least one plan");
  std::vector<CompletedJoin> parts;
  parts.reserve(plans.size());
  for (const auto& plan : plans)
    parts.push_back(complete_with_additional_tables(dataset, schema, catalog, plan, {target}));
  if (parts.size() == 1) return std::move(parts.front());

  CompletedJoin out;
  out.tables = {target};
  const double alpha = 1.0 / static_cast<double>(parts.size());
  std::set<int64_t> seen;
  for (const auto& part : parts) {
    out.tf_clamp_warnings += part.tf_clamp_warnings;
    for (size_t r = 0; r < part.rows.size(); ++r) {
      int64_t ref = part.rows[r][0];
      if (CompletedJoin::is_synth_ref(ref)) {
        const SynthRow& s = part.synth[CompletedJoin::synth_index(ref)];
        if (s.nn_row < 0) {
          out.rows.push_back({CompletedJoin::synth_ref(out.synth.size())});
          out.synth.push_back(s);
          out.weights.push_back(part.weights[r] * alpha);
          continue;
        }
        ref = s.nn_row;  // adopted existing tuple: dedup as such
      }
      if (seen.insert(ref).second) {
        out.rows.push_back({ref});
        out.weights.push_back(part.weights[r]);
      }
    }
  }
  out.recount_origins();
  return out;
}

std::string join_cell_text(const CompletedJoin& join, const Dataset& dataset,
                           const AnnotatedSchema& schema, const EncoderSet& encoders,
                           size_t row, const std::string& table, const std::string& column) {
  const int pos = join.table_pos(table);
  if (pos < 0) throw ValidationError("table '" + table + "' is not part of the join");
  const int64_t ref = join.rows[row][static_cast<size_t>(pos)];
  if (ref == -1) return "";
  const TableData& td = dataset.table(table);
  if (ref >= 0) return td.column(column).cell_text(static_cast<size_t>(ref));

  const SynthRow& s = join.synth[CompletedJoin::synth_index(ref)];
  if (s.nn_row >= 0) return td.column(column).cell_text(static_cast<size_t>(s.nn_row));

  const TableDef& def = schema.table(table);
  if (def.column(column).type == ColumnType::Key) {
    if (column == def.primary_key) return s.pk;
    for (const auto& fk : schema.relationships) {
      if (fk.child_table != table || fk.child_column != column) continue;
      const int ppos = join.table_pos(fk.parent_table);
      if (ppos < 0) return "";
      return join_cell_text(join, dataset, schema, encoders, row, fk.parent_table,
                            schema.table(fk.parent_table).primary_key);
    }
    return "";
  }
  const auto attrs = def.attribute_columns();
  const auto it = std::find(attrs.begin(), attrs.end(), column);
  const int32_t idx = s.attrs[static_cast<size_t>(it - attrs.begin())];
  const AttributeEncoder& enc = encoders.column_encoder(table, column);
  if (idx >= enc.value_count()) return "";
  if (enc.kind == AttributeEncoder::Kind::BinnedContinuous)
    return double_text(enc.decode_continuous(idx));
  return enc.decode_categorical(idx);
}

double join_cell_value(const CompletedJoin& join, const Dataset& dataset,
                       const AnnotatedSchema& schema, const EncoderSet& encoders,
                       size_t row, const std::string& table, const std::string& column) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (schema.table(table).column(column).type != ColumnType::Continuous) return nan;
  const int pos = join.table_pos(table);
  if (pos < 0) throw ValidationError("table '" + table + "' is not part of the join");
  int64_t ref = join.rows[row][static_cast<size_t>(pos)];
  if (CompletedJoin::is_synth_ref(ref)) {
    const SynthRow& s = join.synth[CompletedJoin::synth_index(ref)];
    if (s.nn_row >= 0) {
      ref = s.nn_row;
    } else {
      const auto attrs = schema.table(table).attribute_columns();
      const auto it = std::find(attrs.begin(), attrs.end(), column);
      const int32_t idx = s.attrs[static_cast<size_t>(it - attrs.begin())];
      const AttributeEncoder& enc = encoders.column_encoder(table, column);
      return idx < enc.value_count() ? enc.decode_continuous(idx) : nan;
    }
  }
  if (ref < 0) return nan;
  const Column& col = dataset.table(table).column(column);
  return col.values[static_cast<size_t>(ref)];
}

const CompletedJoin* find_offline(uint64_t dataset_fp, const std::string& complete_table,
                                  const std::string& incomplete_table, uint64_t plan_fp) {
  const std::string key = offline_key(dataset_fp, complete_table, incomplete_table, plan_fp);
  auto& reg = offline_registry();
  auto it = reg.find(key);
  if (it != reg.end()) return &it->second;
  if (const char* dir = std::getenv("RELCOMP_CACHE")) {
    const std::filesystem::path path = std::filesystem::path(dir) / (key + ".rccj");
    if (std::filesystem::exists(path)) {
      auto [nit, fresh] = reg.emplace(key, load_completed_join(path.string()));
      (void)fresh;
      return &nit->second;
    }
  }
  return nullptr;
}

std::vector<OfflineCompletion> offline_complete(const Dataset& dataset,
                                                const AnnotatedSchema& schema,
                                                const ModelCatalog& catalog) {
  std::vector<OfflineCompletion> out;
  std::set<std::pair<std::string, std::string>> done;
  const uint64_t dfp = dataset.fingerprint();
  for (const auto& fk : schema.relationships) {
    const bool pc = schema.table_complete(fk.parent_table);
    const bool cc = schema.table_complete(fk.child_table);
    if (pc == cc) continue;
    const std::string c = pc ? fk.parent_table : fk.child_table;
    const std::string i = pc ? fk.child_table : fk.parent_table;
    if (!done.emplace(c, i).second) continue;

    OfflineCompletion oc;
    oc.complete_table = c;
    oc.incomplete_table = i;
    oc.plan = advanced_select(dataset, schema, catalog, {c, i}, {}, /*scenarios=*/0,
                              catalog.config.seed);
    if (!oc.plan.recommended) continue;

    const std::string key = offline_key(dfp, c, i, oc.plan.fingerprint());
    auto& reg = offline_registry();
    const char* dir = std::getenv("RELCOMP_CACHE");
    if (const CompletedJoin* hit = find_offline(dfp, c, i, oc.plan.fingerprint())) {
      oc.join = *hit;
      oc.from_cache = true;
    } else {
      oc.join = complete_with_additional_tables(dataset, schema, catalog, oc.plan, {c, i});
      reg.emplace(key, oc.join);
      if (dir) {
        std::filesystem::create_directories(dir);
        save_completed_join(oc.join,
                            (std::filesystem::path(dir) / (key + ".rccj")).string());
      }
    }
    out.push_back(std::move(oc));
  }
  return out;
}

void export_completed_csv(const CompletedJoin& join, const Dataset& dataset,
                          const AnnotatedSchema& schema, const EncoderSet& encoders,
                          const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ExecutionError("cannot write '" + path + "'");
  std::vector<std::string> fields;
  for (const auto& t : join.tables)
    for (const auto& col : schema.table(t).columns) fields.push_back(t + "." + col.name);
  fields.push_back("__origin");
  fields.push_back("__weight");
  f << csv_join(fields) << "\n";
  for (size_t r = 0; r < join.rows.size(); ++r) {
    fields.clear();
    for (const auto& t : join.tables)
      for (const auto& col : schema.table(t).columns)
        fields.push_back(join_cell_text(join, dataset, schema, encoders, r, t, col.name));
    fields.push_back(join.row_has_synth(r) ? "synthesized" : "existing");
    fields.push_back(double_text(join.weights[r]));
    f << csv_join(fields) << "\n";
  }
  if (!f) throw ExecutionError("failed writing '" + path + "'");
}

}  // namespace relcomp
