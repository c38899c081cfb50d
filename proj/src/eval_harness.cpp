#include "relcomp/eval_harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "relcomp/csv.hpp"
#include "relcomp/errors.hpp"
#include "relcomp/rng.hpp"

namespace relcomp {
namespace {

std::string num_text(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

TableData empty_table(const TableDef& def) {
  TableData td;
  td.name = def.name;
  for (const auto& c : def.columns) {
    td.column_names.push_back(c.name);
    Column col;
    col.type = c.type;
    td.columns.push_back(std::move(col));
  }
  return td;
}

void push_text(Column& col, const std::string& text) {
  col.codes.push_back(text.empty() ? -1 : col.intern(text));
}

// Parent-determined child values; bijections on the domain so predictable
// children are exactly as diverse as their parents. The categorical and
// numeric attributes use different maps and independent draws, so at zero
// predictability the target attributes share no information with anything.
int determined(int idx, int domain) { return (idx * 7 + 3) % domain; }
int determined_num(int idx, int domain) { return (idx * 3 + 1) % domain; }

std::vector<double> zipf_cumulative(int domain, double skew) {
  std::vector<double> cum(static_cast<size_t>(domain));
  double total = 0;
  for (int k = 0; k < domain; ++k) total += 1.0 / std::pow(k + 1, skew);
  double run = 0;
  for (int k = 0; k < domain; ++k) {
    run += 1.0 / std::pow(k + 1, skew) / total;
    cum[static_cast<size_t>(k)] = run;
  }
  return cum;
}

struct ValueSampler {
  const SyntheticSpec& spec;
  std::vector<double> cum;  // empty → uniform root draws

  explicit ValueSampler(const SyntheticSpec& s) : spec(s) {
    if (spec.skew > 0) cum = zipf_cumulative(spec.domain, spec.skew);
  }

  int root(Rng& rng) const {
    if (cum.empty()) return static_cast<int>(rng.below(static_cast<uint64_t>(spec.domain)));
    const double u = rng.uniform();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return static_cast<int>(std::min<size_t>(static_cast<size_t>(it - cum.begin()),
                                             cum.size() - 1));
  }

  int child(Rng& rng, int parent_idx) const {
    if (rng.uniform() < spec.predictability) return determined(parent_idx, spec.domain);
    return static_cast<int>(rng.below(static_cast<uint64_t>(spec.domain)));
  }

  int child_num(Rng& rng, int parent_idx) const {
    if (rng.uniform() < spec.predictability) return determined_num(parent_idx, spec.domain);
    return static_cast<int>(rng.below(static_cast<uint64_t>(spec.domain)));
  }

  int count(Rng& rng, int parent_idx) const {
    switch (spec.tf_law) {
      case TfLaw::Fixed: return spec.tf_max;
      case TfLaw::Uniform: return static_cast<int>(rng.range(1, spec.tf_max));
      case TfLaw::PropA: return 1 + parent_idx % spec.tf_max;
    }
    return 1;
  }
};

// Fills ta and tb of `ds`; returns the categorical value index behind each
// tb row so a further hop can chain off it.
std::vector<int> populate_pair(Dataset& ds, const SyntheticSpec& spec, Rng& rng) {
  const ValueSampler sampler(spec);
  TableData& ta = ds.table("ta");
  TableData& tb = ds.table("tb");
  std::vector<int> child_idx;
  size_t children = 0;
  for (size_t r = 0; r < spec.rows; ++r) {
    const int idx = sampler.root(rng);
    const int num_idx = sampler.root(rng);
    push_text(ta.columns[0], "a" + std::to_string(r));
    push_text(ta.columns[1], "v" + std::to_string(idx));
    ta.columns[2].values.push_back(num_idx * 10.0 + rng.uniform() * 10.0);

    const int group = sampler.child(rng, idx);
    const int group_num = sampler.child_num(rng, idx);
    const int n = sampler.count(rng, idx);
    for (int c = 0; c < n; ++c) {
      const int cidx = rng.uniform() < spec.fanout_predictability ? group
                                                                  : sampler.child(rng, idx);
      const int nidx = rng.uniform() < spec.fanout_predictability
                           ? group_num
                           : sampler.child_num(rng, idx);
      push_text(tb.columns[0], "b" + std::to_string(children++));
      push_text(tb.columns[1], "a" + std::to_string(r));
      push_text(tb.columns[2], "v" + std::to_string(cidx));
      tb.columns[3].values.push_back(nidx * 10.0 + rng.uniform() * 10.0);
      child_idx.push_back(cidx);
    }
  }
  ta.row_count = spec.rows;
  tb.row_count = children;
  return child_idx;
}

}  // namespace

AnnotatedSchema synthetic_schema(bool mark_incomplete) {
  AnnotatedSchema s;
  s.tables.push_back({"ta",
                      {{"a_id", ColumnType::Key},
                       {"a_val", ColumnType::Categorical},
                       {"a_num", ColumnType::Continuous}},
                      "a_id"});
  s.tables.push_back({"tb",
                      {{"b_id", ColumnType::Key},
                       {"a_id", ColumnType::Key},
                       {"b_val", ColumnType::Categorical},
                       {"b_num", ColumnType::Continuous}},
                      "b_id"});
  s.relationships.push_back({"tb", "a_id", "ta", "a_id"});
  if (mark_incomplete) {
    s.incomplete_tables.insert("tb");
    s.incomplete_relationships.insert("tb.a_id");
  }
  s.validate();
  return s;
}

Dataset generate_synthetic(const SyntheticSpec& spec, uint64_t seed) {
  AnnotatedSchema schema = synthetic_schema(false);
  Dataset ds;
  for (const auto& t : schema.tables) ds.tables.push_back(empty_table(t));
  Rng rng(seed);
  populate_pair(ds, spec, rng);
  ds.build_fk_indexes(schema);
  compute_tuple_factors(ds, schema);
  return ds;
}

AnnotatedSchema chain_schema(const std::string& incomplete_table) {
  AnnotatedSchema s = synthetic_schema(false);
  s.tables.push_back({"tc",
                      {{"c_id", ColumnType::Key},
                       {"b_id", ColumnType::Key},
                       {"c_val", ColumnType::Categorical},
                       {"c_num", ColumnType::Continuous}},
                      "c_id"});
  s.relationships.push_back({"tc", "b_id", "tb", "b_id"});
  if (!incomplete_table.empty()) {
    s.incomplete_tables.insert(incomplete_table);
    for (const auto& fk : s.relationships)
      if (fk.child_table == incomplete_table) s.incomplete_relationships.insert(fk.id());
  }
  s.validate();
  return s;
}

Dataset generate_chain(const SyntheticSpec& spec, uint64_t seed) {
  AnnotatedSchema schema = chain_schema("");
  Dataset ds;
  for (const auto& t : schema.tables) ds.tables.push_back(empty_table(t));
  Rng rng(seed);
  const std::vector<int> b_idx = populate_pair(ds, spec, rng);

  const ValueSampler sampler(spec);
  TableData& tb = ds.table("tb");
  TableData& tc = ds.table("tc");
  size_t grandchildren = 0;
  for (size_t r = 0; r < b_idx.size(); ++r) {
    const int idx = b_idx[r];
    const int group = sampler.child(rng, idx);
    const int group_num = sampler.child_num(rng, idx);
    const int n = sampler.count(rng, idx);
    const std::string parent_id = tb.columns[0].cell_text(r);
    for (int c = 0; c < n; ++c) {
      const int cidx = rng.uniform() < spec.fanout_predictability ? group
                                                                  : sampler.child(rng, idx);
      const int nidx = rng.uniform() < spec.fanout_predictability
                           ? group_num
                           : sampler.child_num(rng, idx);
      push_text(tc.columns[0], "c" + std::to_string(grandchildren++));
      push_text(tc.columns[1], parent_id);
      push_text(tc.columns[2], "v" + std::to_string(cidx));
      tc.columns[3].values.push_back(nidx * 10.0 + rng.uniform() * 10.0);
    }
  }
  tc.row_count = grandchildren;
  ds.build_fk_indexes(schema);
  compute_tuple_factors(ds, schema);
  return ds;
}

namespace {

// Removal probabilities for a categorical attribute: the modal value's odds
// are boosted by `corr`, the base rate solves the overall keep target.
std::vector<double> categorical_probs(const Column& col, size_t rows, double remove,
                                      double corr, std::string& designated) {
  std::vector<size_t> freq(col.dict.size(), 0);
  for (size_t r = 0; r < rows; ++r)
    if (col.codes[r] >= 0) ++freq[static_cast<size_t>(col.codes[r])];
  size_t modal = 0;
  for (size_t k = 1; k < freq.size(); ++k)
    if (freq[k] > freq[modal]) modal = k;
  designated = col.dict.empty() ? "" : col.dict[modal];

  const double m = rows && !freq.empty() ? static_cast<double>(freq[modal]) / rows : 0.0;
  double q0 = remove;
  if (1.0 - m * corr > 1e-12) q0 = (remove - m * corr) / (1.0 - m * corr);
  q0 = std::clamp(q0, 0.0, 1.0);
  const double qm = std::clamp(q0 + corr * (1.0 - q0), 0.0, 1.0);

  std::vector<double> pi(rows, q0);
  for (size_t r = 0; r < rows; ++r)
    if (col.codes[r] >= 0 && static_cast<size_t>(col.codes[r]) == modal) pi[r] = qm;
  return pi;
}

// Logistic removal over a continuous attribute. The intercept is solved so
// the mean removal probability hits the target rate at any slope; the slope
// is then solved so the expected Pearson correlation between the removal
// indicator and the value hits `corr` (saturating when unattainable).
std::vector<double> continuous_probs(const Column& col, size_t rows, double remove,
                                     double corr) {
  std::vector<double> v;
  std::vector<size_t> vrow;
  for (size_t r = 0; r < rows; ++r)
    if (!std::isnan(col.values[r])) {
      v.push_back(col.values[r]);
      vrow.push_back(r);
    }
  std::vector<double> pi(rows, remove);
  if (v.empty() || remove <= 0.0 || remove >= 1.0) return pi;

  const double sign = corr < 0 ? -1.0 : 1.0;
  const double target = std::min(std::abs(corr), 0.999);
  std::vector<double> w(v.size());
  for (size_t i = 0; i < v.size(); ++i) w[i] = sign * v[i];
  double mean = 0;
  for (double x : w) mean += x;
  mean /= static_cast<double>(w.size());
  double var = 0;
  for (double x : w) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w.size());
  if (target <= 0 || var <= 0) return pi;

  const double lo = *std::min_element(w.begin(), w.end());
  const double hi = *std::max_element(w.begin(), w.end());

  const auto fill = [&](double s, double c, std::vector<double>& out) {
    double total = 0;
    for (size_t i = 0; i < w.size(); ++i) {
      out[i] = 1.0 / (1.0 + std::exp(-s * (w[i] - c)));
      total += out[i];
    }
    return total / static_cast<double>(w.size());
  };

  // Mean removal is decreasing in the intercept: bisect it to the rate.
  std::vector<double> p(w.size());
  const auto solve_intercept = [&](double s) {
    double clo = lo - 50.0 / s, chi = hi + 50.0 / s;
    for (int it = 0; it < 60; ++it) {
      const double c = 0.5 * (clo + chi);
      (fill(s, c, p) > remove ? clo : chi) = c;
    }
    return 0.5 * (clo + chi);
  };

  const auto rho = [&](double s) {
    const double c = solve_intercept(s);
    const double pbar = fill(s, c, p);
    double cov = 0;
    for (size_t i = 0; i < w.size(); ++i) cov += p[i] * (w[i] - mean);
    cov /= static_cast<double>(w.size());
    const double var_r = pbar * (1.0 - pbar);
    return var_r > 0 ? cov / std::sqrt(var_r * var) : 0.0;
  };

  const double sd = std::sqrt(var);
  double s_hi = 1.0 / sd;
  while (rho(s_hi) < target && s_hi < 1e6 / sd) s_hi *= 2.0;
  double s_lo = 0.0;
  for (int it = 0; it < 60; ++it) {
    const double s = 0.5 * (s_lo + s_hi);
    (rho(s) < target ? s_lo : s_hi) = s;
  }
  const double s = s_hi;
  const double c = solve_intercept(s);
  fill(s, c, p);
  for (size_t i = 0; i < vrow.size(); ++i) pi[vrow[i]] = p[i];
  return pi;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  if (n < 2) return 0.0;
  double ma = 0, mb = 0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0, va = 0, vb = 0;
  for (size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return va > 0 && vb > 0 ? cov / std::sqrt(va * vb) : 0.0;
}

TableData filter_rows(const TableData& t, const std::vector<uint8_t>& mask,
                      std::vector<size_t>& old_rows) {
  TableData nt;
  nt.name = t.name;
  nt.column_names = t.column_names;
  for (size_t r = 0; r < t.row_count; ++r)
    if (mask[r]) old_rows.push_back(r);
  for (const auto& c : t.columns) {
    Column nc;
    nc.type = c.type;
    nc.dict = c.dict;
    nc.dict_index = c.dict_index;
    if (c.type == ColumnType::Continuous) {
      nc.values.reserve(old_rows.size());
      for (size_t r : old_rows) nc.values.push_back(c.values[r]);
    } else {
      nc.codes.reserve(old_rows.size());
      for (size_t r : old_rows) nc.codes.push_back(c.codes[r]);
    }
    nt.columns.push_back(std::move(nc));
  }
  for (const auto& [fk, flags] : t.rel_complete) {
    std::vector<uint8_t> nf;
    nf.reserve(old_rows.size());
    for (size_t r : old_rows) nf.push_back(flags[r]);
    nt.rel_complete[fk] = std::move(nf);
  }
  nt.row_count = old_rows.size();
  return nt;
}

}  // namespace

RemovalResult biased_removal(const Dataset& dataset, const AnnotatedSchema& schema,
                             const RemovalSpec& spec) {
  if (spec.keep_rate <= 0.0 || spec.keep_rate > 1.0)
    throw ValidationError("keep_rate must be in (0, 1]");
  if (spec.tf_keep_rate < 0.0 || spec.tf_keep_rate > 1.0)
    throw ValidationError("tf_keep_rate must be in [0, 1]");
  const TableData& td = dataset.table(spec.table);
  const Column& col = td.column(spec.attribute);
  const size_t n = td.row_count;
  const double remove = 1.0 - spec.keep_rate;

  RemovalResult res;
  std::vector<double> pi;
  if (col.type == ColumnType::Continuous)
    pi = continuous_probs(col, n, remove, spec.removal_correlation);
  else
    pi = categorical_probs(col, n, remove, std::clamp(spec.removal_correlation, 0.0, 1.0),
                           res.designated_value);

  Rng rng(spec.seed);
  res.removed.assign(n, 0);
  size_t kept = 0;
  for (size_t r = 0; r < n; ++r) {
    res.removed[r] = rng.uniform() < pi[r] ? 1 : 0;
    kept += res.removed[r] ? 0u : 1u;
  }
  res.realized_keep = n ? static_cast<double>(kept) / n : 1.0;
  if (col.type == ColumnType::Continuous) {
    std::vector<double> rflag, vval;
    for (size_t r = 0; r < n; ++r)
      if (!std::isnan(col.values[r])) {
        rflag.push_back(res.removed[r] ? 1.0 : 0.0);
        vval.push_back(col.values[r]);
      }
    res.realized_pearson = pearson(rflag, vval);
  }

  std::map<std::string, std::vector<uint8_t>> keep_mask;
  for (const auto& t : dataset.tables) keep_mask[t.name].assign(t.row_count, 1);
  auto& target_mask = keep_mask[spec.table];
  for (size_t r = 0; r < n; ++r) target_mask[r] = res.removed[r] ? 0 : 1;

  if (spec.cascade_links) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& fk : schema.relationships) {
        const FkIndex& idx = dataset.fk_index(fk.id());
        const auto& pm = keep_mask[fk.parent_table];
        auto& cm = keep_mask[fk.child_table];
        for (size_t r = 0; r < cm.size(); ++r) {
          if (!cm[r]) continue;
          const int64_t p = idx.child_to_parent[r];
          if (p >= 0 && !pm[static_cast<size_t>(p)]) {
            cm[r] = 0;
            changed = true;
          }
        }
      }
    }
  }

  Dataset out;
  std::map<std::string, std::vector<size_t>> old_rows;
  for (const auto& t : dataset.tables)
    out.tables.push_back(filter_rows(t, keep_mask[t.name], old_rows[t.name]));
  out.build_fk_indexes(schema);
  compute_tuple_factors(out, schema);

  // The removal relationships keep their pre-removal ground-truth counts on a
  // tf_keep_rate fraction of parent rows; elsewhere the count is unknown.
  Rng tf_rng(Rng::derive(spec.seed, {0x7466ull}));
  for (const auto& fk : schema.relationships) {
    if (fk.child_table != spec.table) continue;
    const FkIndex& in_idx = dataset.fk_index(fk.id());
    auto it = out.tuple_factors.find(fk.id());
    if (it == out.tuple_factors.end()) continue;
    auto& counts = it->second.counts;
    const auto& parents = old_rows[fk.parent_table];
    for (size_t p = 0; p < parents.size(); ++p) {
      const bool keep_count = tf_rng.uniform() < spec.tf_keep_rate;
      counts[p] = keep_count
                      ? static_cast<int32_t>(in_idx.parent_children[parents[p]].size())
                      : -1;
    }
  }

  res.data = std::move(out);
  return res;
}

Dataset materialize_completed(const CompletedJoin& join, const Dataset& available,
                              const AnnotatedSchema& schema, const EncoderSet& encoders) {
  Dataset out = available;
  std::map<size_t, size_t> first_row;  // synth index → earliest referencing join row
  for (size_t r = 0; r < join.rows.size(); ++r)
    for (int64_t ref : join.rows[r])
      if (CompletedJoin::is_synth_ref(ref))
        first_row.emplace(CompletedJoin::synth_index(ref), r);

  for (const auto& [si, row] : first_row) {
    const SynthRow& s = join.synth[si];
    if (s.nn_row >= 0) continue;  // adopted an existing tuple, nothing new
    const std::string& tname = join.tables[static_cast<size_t>(s.table)];
    TableData& target = out.table(tname);
    for (const auto& cd : schema.table(tname).columns) {
      Column& c = target.column(cd.name);
      if (cd.type == ColumnType::Continuous)
        c.values.push_back(join_cell_value(join, available, schema, encoders, row, tname,
                                           cd.name));
      else
        push_text(c, join_cell_text(join, available, schema, encoders, row, tname, cd.name));
    }
    ++target.row_count;
  }

  // Grown parent tables get unknown counts for the appended rows.
  for (auto& [fk_id, tf] : out.tuple_factors)
    tf.counts.resize(out.table(tf.parent_table).row_count, -1);
  out.build_fk_indexes(schema);
  return out;
}

namespace {

std::optional<double> attr_average(const Dataset& ds, const std::string& table,
                                   const std::string& attribute,
                                   const std::string& designated) {
  const TableData& td = ds.table(table);
  const Column& col = td.column(attribute);
  if (col.type == ColumnType::Continuous) {
    double sum = 0;
    size_t cnt = 0;
    for (double v : col.values)
      if (!std::isnan(v)) {
        sum += v;
        ++cnt;
      }
    if (!cnt) return std::nullopt;
    return sum / static_cast<double>(cnt);
  }
  if (!td.row_count) return std::nullopt;
  size_t hits = 0;
  for (size_t r = 0; r < td.row_count; ++r)
    if (col.cell_text(r) == designated) ++hits;
  return static_cast<double>(hits) / static_cast<double>(td.row_count);
}

}  // namespace

std::optional<double> bias_reduction(const Dataset& complete, const Dataset& incomplete,
                                     const Dataset& completed, const std::string& table,
                                     const std::string& attribute,
                                     const std::string& designated_value) {
  const auto truth = attr_average(complete, table, attribute, designated_value);
  const auto before = attr_average(incomplete, table, attribute, designated_value);
  const auto after = attr_average(completed, table, attribute, designated_value);
  if (!truth || !before || !after) return std::nullopt;
  const double denom = std::abs(*truth - *before);
  if (denom < 1e-12) return std::nullopt;
  return 1.0 - std::abs(*after - *truth) / denom;
}

namespace {

struct ErrorStats {
  double mean_error = 0;
  bool zero_truth_skipped = false;
};

std::string group_key(const std::vector<std::string>& keys) {
  std::string k;
  for (const auto& s : keys) {
    k += s;
    k += '\x1f';
  }
  return k;
}

// Mean relative error of `answer` against `truth` over truth groups; groups
// the answer misses count as error 1, zero-valued truth groups are skipped.
ErrorStats relative_errors(const QueryResult& truth, const QueryResult& answer) {
  std::map<std::string, double> got;
  for (const auto& g : answer.groups) got[group_key(g.keys)] = g.estimate;
  ErrorStats st;
  double sum = 0;
  size_t counted = 0;
  for (const auto& g : truth.groups) {
    if (g.estimate == 0.0) {
      st.zero_truth_skipped = true;
      continue;
    }
    const auto it = got.find(group_key(g.keys));
    sum += it == got.end() ? 1.0 : std::abs(it->second - g.estimate) / std::abs(g.estimate);
    ++counted;
  }
  st.mean_error = counted ? sum / static_cast<double>(counted) : 0.0;
  return st;
}

const char* aggregate_name(AggregateKind kind) {
  switch (kind) {
    case AggregateKind::Count: return "COUNT";
    case AggregateKind::Sum: return "SUM";
    case AggregateKind::Avg: return "AVG";
    case AggregateKind::Rows: return "ROWS";
  }
  return "?";
}

void write_report(const MetricsReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "queries.csv");
  csv << csv_join({"query", "aggregate", "error_incomplete", "error_completed", "reduction",
                   "zero_truth_skipped", "recommended"})
      << '\n';
  for (const auto& r : report.queries)
    csv << csv_join({r.query, r.aggregate, num_text(r.error_incomplete),
                     num_text(r.error_completed), num_text(r.reduction),
                     r.zero_truth_skipped ? "1" : "0", r.recommended ? "1" : "0"})
        << '\n';
  if (!csv) throw ExecutionError("cannot write query report under '" + out_dir + "'");

  nlohmann::json summary;
  summary["queries"] = report.queries.size();
  summary["mean_reduction"] = report.mean_reduction;
  summary["bias_reduction"] =
      report.bias_red ? nlohmann::json(*report.bias_red) : nlohmann::json();
  summary["cardinality_correction"] =
      report.cardinality_corr ? nlohmann::json(*report.cardinality_corr) : nlohmann::json();
  std::ofstream js(fs::path(out_dir) / "summary.json");
  js << summary.dump(2) << '\n';
  if (!js) throw ExecutionError("cannot write summary under '" + out_dir + "'");
}

}  // namespace

double relative_error_reduction(const AggregateQuery& query, const Dataset& complete,
                                const Dataset& incomplete, const Dataset& completed,
                                const AnnotatedSchema& schema) {
  const QueryResult truth = execute_plain(query, complete, schema);
  const QueryResult before = execute_plain(query, incomplete, schema);
  const QueryResult after = execute_plain(query, completed, schema);
  return relative_errors(truth, before).mean_error - relative_errors(truth, after).mean_error;
}

std::optional<double> cardinality_correction(const Dataset& complete,
                                             const Dataset& incomplete,
                                             const Dataset& completed,
                                             const std::string& table) {
  const double full = static_cast<double>(complete.table(table).row_count);
  const double miss = static_cast<double>(incomplete.table(table).row_count);
  const double fixed = static_cast<double>(completed.table(table).row_count);
  if (miss == full) return std::nullopt;
  return 1.0 - (fixed - full) / (miss - full);
}

MetricsReport run_workload_queries(const std::vector<std::string>& queries,
                                   const Dataset& complete, const Dataset& incomplete,
                                   const AnnotatedSchema& schema, const TrainConfig& config,
                                   const std::string& out_dir) {
  MetricsReport report;
  const ModelCatalog catalog = train_all(incomplete, schema, plan_models(schema), config);

  QueryOptions opts;
  opts.seed = config.seed;

  double total = 0;
  for (const auto& sql : queries) {
    const AggregateQuery query = parse_query(sql, schema);
    const QueryResult truth = execute_plain(query, complete, schema);
    const QueryResult before = execute_plain(query, incomplete, schema);
    const QueryResult after = execute(query, incomplete, schema, catalog, opts);

    const ErrorStats eb = relative_errors(truth, before);
    const ErrorStats ea = relative_errors(truth, after);
    QueryErrorRecord rec;
    rec.query = sql;
    rec.aggregate = aggregate_name(query.agg);
    rec.error_incomplete = eb.mean_error;
    rec.error_completed = ea.mean_error;
    rec.reduction = eb.mean_error - ea.mean_error;
    rec.zero_truth_skipped = eb.zero_truth_skipped || ea.zero_truth_skipped;
    rec.recommended = after.recommended;
    total += rec.reduction;
    report.queries.push_back(std::move(rec));
  }
  if (!report.queries.empty())
    report.mean_reduction = total / static_cast<double>(report.queries.size());

  // Cardinality metric over the first incomplete table with a complete FK
  // neighbor, via a two-table completion materialized back into tables.
  for (const auto& t : schema.incomplete_tables) {
    std::string neighbor;
    for (const ForeignKey* fk : schema.relationships_of(t)) {
      const std::string& other = fk->child_table == t ? fk->parent_table : fk->child_table;
      if (schema.table_complete(other)) {
        neighbor = other;
        break;
      }
    }
    if (neighbor.empty()) continue;
    const CompletionPlan plan =
        advanced_select(incomplete, schema, catalog, {neighbor, t}, {}, 0, config.seed);
    if (plan.recommended) {
      const CompletedJoin join =
          complete_with_additional_tables(incomplete, schema, catalog, plan, {neighbor, t});
      const Dataset materialized =
          materialize_completed(join, incomplete, schema, catalog.encoders);
      report.cardinality_corr = cardinality_correction(complete, incomplete, materialized, t);
    }
    break;
  }

  if (!out_dir.empty()) write_report(report, out_dir);
  return report;
}

MetricsReport run_workload(const std::string& queries_path, const Dataset& complete,
                           const Dataset& incomplete, const AnnotatedSchema& schema,
                           const TrainConfig& config, const std::string& out_dir) {
  std::ifstream in(queries_path);
  if (!in) throw ValidationError("cannot open workload file '" + queries_path + "'");
  std::vector<std::string> queries;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    std::string q = line.substr(b, e - b + 1);
    if (q[0] == '#') continue;
    queries.push_back(std::move(q));
  }
  return run_workload_queries(queries, complete, incomplete, schema, config, out_dir);
}

}  // namespace relcomp
