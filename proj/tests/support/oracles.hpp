#pragma once

// Reference implementations the tests compare the library against. Everything
// here is deliberately naive (nested loops, exhaustive enumeration) and shares
// no code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "relcomp/dataset.hpp"
#include "relcomp/query.hpp"
#include "relcomp/schema.hpp"

namespace testsupport {

// ---------------------------------------------------------------------------
// Nested-loop SPJA executor over plain data.

struct OracleGroup {
  std::vector<std::string> keys;
  double estimate = 0;
};

inline bool oracle_cmp_num(double v, const std::string& op, double ref) {
  if (std::isnan(v)) return false;
  if (op == "=") return v == ref;
  if (op == "!=") return v != ref;
  if (op == "<") return v < ref;
  if (op == "<=") return v <= ref;
  if (op == ">") return v > ref;
  return v >= ref;
}

inline bool oracle_cmp_text(const std::string& v, const std::string& op,
                            const std::string& ref) {
  if (v.empty()) return false;
  return op == "=" ? v == ref : v != ref;
}

// Join order: first query table, then repeatedly the first remaining table
// adjacent to one already placed. Rows expand level by level, children in
// dataset row order, so even floating-point accumulation order is pinned.
inline std::vector<OracleGroup> oracle_execute(const relcomp::AggregateQuery& q,
                                               const relcomp::Dataset& data,
                                               const relcomp::AnnotatedSchema& schema) {
  using relcomp::ColumnType;

  std::vector<std::string> order;
  std::vector<std::string> rest = q.tables;
  while (!rest.empty()) {
    size_t pick = rest.size();
    for (size_t i = 0; i < rest.size() && pick == rest.size(); ++i) {
      if (order.empty()) {
        pick = i;
        break;
      }
      for (const auto& p : order)
        if (schema.fk_between(rest[i], p)) {
          pick = i;
          break;
        }
    }
    if (pick == rest.size()) throw std::runtime_error("oracle: tables not connected");
    order.push_back(rest[pick]);
    rest.erase(rest.begin() + static_cast<ptrdiff_t>(pick));
  }

  std::vector<std::vector<int64_t>> rows;
  for (size_t r = 0; r < data.table(order[0]).row_count; ++r)
    rows.push_back({static_cast<int64_t>(r)});
  for (size_t i = 1; i < order.size(); ++i) {
    const relcomp::ForeignKey* fk = nullptr;
    size_t anchor = 0;
    for (size_t x = i; x-- > 0;)
      if ((fk = schema.fk_between(order[i], order[x]))) {
        anchor = x;
        break;
      }
    const bool fanout = fk->child_table == order[i];
    const auto& child = data.table(fk->child_table);
    const auto& parent = data.table(fk->parent_table);
    const auto& ccol = child.column(fk->child_column);
    const auto& pcol = parent.column(fk->parent_column);
    std::vector<std::vector<int64_t>> next;
    for (const auto& row : rows) {
      const auto a = static_cast<size_t>(row[anchor]);
      if (fanout) {
        for (size_t c = 0; c < child.row_count; ++c) {
          if (ccol.is_null(c)) continue;
          if (ccol.cell_text(c) == pcol.cell_text(a)) {
            auto nr = row;
            nr.push_back(static_cast<int64_t>(c));
            next.push_back(std::move(nr));
          }
        }
      } else {
        if (ccol.is_null(a)) continue;
        for (size_t p = 0; p < parent.row_count; ++p) {
          if (pcol.cell_text(p) == ccol.cell_text(a)) {
            auto nr = row;
            nr.push_back(static_cast<int64_t>(p));
            next.push_back(std::move(nr));
            break;  // primary keys are unique
          }
        }
      }
    }
    rows.swap(next);
  }

  auto tpos = [&](const std::string& t) {
    for (size_t i = 0; i < order.size(); ++i)
      if (order[i] == t) return static_cast<int>(i);
    return -1;
  };
  auto cell_text = [&](const std::vector<int64_t>& row, const std::string& t,
                       const std::string& c) {
    return data.table(t).column(c).cell_text(static_cast<size_t>(row[tpos(t)]));
  };

  struct Acc {
    double count = 0, sum = 0, mass = 0;
  };
  std::map<std::vector<std::string>, Acc> groups;
  for (const auto& row : rows) {
    bool pass = true;
    for (const auto& p : q.predicates) {
      const auto& col = data.table(p.table).column(p.column);
      const auto r = static_cast<size_t>(row[tpos(p.table)]);
      const bool ok = col.type == ColumnType::Continuous
                          ? oracle_cmp_num(col.values[r], p.op, p.number)
                          : oracle_cmp_text(col.cell_text(r), p.op, p.text);
      if (!ok) {
        pass = false;
        break;
      }
    }
    if (!pass) continue;
    std::vector<std::string> key;
    for (const auto& [t, c] : q.group_by) key.push_back(cell_text(row, t, c));
    Acc& g = groups[key];
    g.count += 1.0;
    if (q.agg == relcomp::AggregateKind::Sum || q.agg == relcomp::AggregateKind::Avg) {
      const auto& col = data.table(q.agg_table).column(q.agg_column);
      const double v = col.values[static_cast<size_t>(row[tpos(q.agg_table)])];
      if (!std::isnan(v)) {
        g.sum += v;
        g.mass += 1.0;
      }
    }
  }
  if (groups.empty() && q.group_by.empty()) groups.emplace();

  std::vector<OracleGroup> out;
  for (const auto& [key, g] : groups) {
    OracleGroup og;
    og.keys = key;
    switch (q.agg) {
      case relcomp::AggregateKind::Count:
      case relcomp::AggregateKind::Rows:
        og.estimate = g.count;
        break;
      case relcomp::AggregateKind::Sum:
        og.estimate = g.mass > 0 ? g.sum : 0.0;
        break;
      case relcomp::AggregateKind::Avg:
        og.estimate = g.mass > 0 ? g.sum / g.mass : 0.0;
        break;
    }
    out.push_back(std::move(og));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force cycle detection over merge requirements: an arc from every
// evidence table to each table completed from it; cyclic iff some permutation
// argument fails — here checked by exhaustive reachability.

inline bool oracle_merge_has_cycle(const std::vector<relcomp::MergeSpec>& specs) {
  std::set<std::string> tables;
  for (const auto& s : specs) {
    tables.insert(s.target);
    for (const auto& e : s.evidence) tables.insert(e);
  }
  std::map<std::string, std::set<std::string>> arcs;
  for (const auto& s : specs)
    for (const auto& e : s.evidence) arcs[e].insert(s.target);

  // DFS from every node looking for a path back to itself.
  for (const auto& start : tables) {
    std::vector<std::string> stack(arcs[start].begin(), arcs[start].end());
    std::set<std::string> seen;
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      if (cur == start) return true;
      if (!seen.insert(cur).second) continue;
      for (const auto& n : arcs[cur]) stack.push_back(n);
    }
  }
  return false;
}

// Checks that `order` is a valid topological order for the specs' arcs.
inline bool oracle_order_valid(const std::vector<relcomp::MergeSpec>& specs,
                               const std::vector<std::string>& order) {
  std::map<std::string, size_t> pos;
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (const auto& s : specs) {
    if (!pos.count(s.target)) return false;
    for (const auto& e : s.evidence) {
      if (!pos.count(e)) return false;
      if (pos[e] >= pos[s.target]) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Exhaustive evidence-chain enumeration. A chain T_1..T_n (n ≥ 1) qualifies
// when T_1 is complete, each T_i is a child of T_i+1, T_n is FK-adjacent to
// the target, and n + 1 ≤ max_len. Returned as (chain, last-hop-fan-out).

struct OraclePath {
  std::vector<std::string> chain;
  bool final_fanout = false;
  bool operator<(const OraclePath& o) const {
    return std::tie(chain, final_fanout) < std::tie(o.chain, o.final_fanout);
  }
};

inline void oracle_paths_extend(const relcomp::AnnotatedSchema& schema,
                                const std::string& target,
                                std::vector<std::string>& chain, int max_len,
                                std::set<OraclePath>& out) {
  if (static_cast<int>(chain.size()) + 1 > max_len) return;
  if (schema.table_complete(chain.front())) {
    const relcomp::ForeignKey* fk = schema.fk_between(chain.back(), target);
    out.insert({chain, fk->child_table == target});
  }
  // Extend at the far end with any child of the current front.
  for (const auto& fk : schema.relationships) {
    if (fk.parent_table != chain.front()) continue;
    const std::string& next = fk.child_table;
    if (next == target) continue;
    if (std::find(chain.begin(), chain.end(), next) != chain.end()) continue;
    chain.insert(chain.begin(), next);
    oracle_paths_extend(schema, target, chain, max_len, out);
    chain.erase(chain.begin());
  }
}

inline std::set<OraclePath> oracle_completion_paths(const relcomp::AnnotatedSchema& schema,
                                                    const std::string& target,
                                                    int max_len) {
  std::set<OraclePath> out;
  if (max_len < 2) return out;
  for (const auto& fk : schema.relationships) {
    std::string anchor;
    if (fk.child_table == target) anchor = fk.parent_table;
    if (fk.parent_table == target) anchor = fk.child_table;
    if (anchor.empty()) continue;
    std::vector<std::string> chain = {anchor};
    oracle_paths_extend(schema, target, chain, max_len, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics helpers.

inline double entropy_nats(const std::map<std::string, size_t>& counts) {
  double total = 0;
  for (const auto& [_, c] : counts) total += static_cast<double>(c);
  double h = 0;
  for (const auto& [_, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

// Empirical mutual information (nats) between two aligned string vectors.
inline double mutual_information(const std::vector<std::string>& a,
                                 const std::vector<std::string>& b) {
  std::map<std::string, size_t> ca, cb;
  std::map<std::pair<std::string, std::string>, size_t> cab;
  for (size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++cab[{a[i], b[i]}];
  }
  const double n = static_cast<double>(a.size());
  double mi = 0;
  for (const auto& [key, c] : cab) {
    const double pab = static_cast<double>(c) / n;
    const double pa = static_cast<double>(ca[key.first]) / n;
    const double pb = static_cast<double>(cb[key.second]) / n;
    mi += pab * std::log(pab / (pa * pb));
  }
  return mi;
}

inline double empirical_entropy(const std::vector<std::string>& v) {
  std::map<std::string, size_t> c;
  for (const auto& s : v) ++c[s];
  return entropy_nats(c);
}

inline double chi_square_uniform(const std::vector<size_t>& counts) {
  double total = 0;
  for (size_t c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0;
  for (size_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0;
  return sxy / std::sqrt(sxx * syy);
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0;
  const size_t n = std::max(p.size(), q.size());
  for (size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p[i] : 0.0;
    const double b = i < q.size() ? q[i] : 0.0;
    tv += std::abs(a - b);
  }
  return tv / 2.0;
}

}  // namespace testsupport
