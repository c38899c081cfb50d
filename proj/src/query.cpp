#include "relcomp/query.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "relcomp/completion.hpp"
#include "relcomp/errors.hpp"

namespace relcomp {

double certainty(std::span<const double> model, std::span<const double> marginal) {
  const size_t n = std::min(model.size(), marginal.size());
  if (n == 0) return 1.0;
  double sp = 0.0, sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sp += model[i] + 1e-9;
    sq += marginal[i] + 1e-9;
  }
  double kl = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double p = (model[i] + 1e-9) / sp;
    const double q = (marginal[i] + 1e-9) / sq;
    kl += p * std::log(p / q);
  }
  return 1.0 - std::exp(-std::max(kl, 0.0));
}

double certainty(std::span<const float> model, std::span<const double> marginal) {
  std::vector<double> m(model.begin(), model.end());
  return certainty(std::span<const double>(m.data(), m.size()), marginal);
}

namespace {

// --- tokenizer -----------------------------------------------------------------

struct Token {
  enum Type { Ident, Number, String, Op, Punct, End } type = End;
  std::string text;
  double num = 0.0;
};

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::vector<Token> tokenize(const std::string& sql) {
  std::vector<Token> out;
  size_t i = 0;
  const size_t n = sql.size();
  auto isid = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  };
  while (i < n) {
    const char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '\'' || c == '"') {
      const size_t end = sql.find(c, i + 1);
      if (end == std::string::npos) throw ParseError("unterminated string literal");
      out.push_back({Token::String, sql.substr(i + 1, end - i - 1), 0.0});
      i = end + 1;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        ((c == '-' || c == '+') && i + 1 < n &&
         (std::isdigit(static_cast<unsigned char>(sql[i + 1])) || sql[i + 1] == '.')) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
      char* end = nullptr;
      const double v = std::strtod(sql.c_str() + i, &end);
      const size_t len = static_cast<size_t>(end - (sql.c_str() + i));
      if (len == 0) throw ParseError("bad numeric literal");
      out.push_back({Token::Number, sql.substr(i, len), v});
      i += len;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < n && isid(sql[j])) ++j;
      out.push_back({Token::Ident, sql.substr(i, j - i), 0.0});
      i = j;
      continue;
    }
    if (c == '!' || c == '<' || c == '>' || c == '=') {
      std::string op(1, c);
      if (i + 1 < n && sql[i + 1] == '=') {
        op += '=';
        ++i;
      }
      ++i;
      if (op == "!") throw ParseError("unexpected '!'");
      out.push_back({Token::Op, op, 0.0});
      continue;
    }
    if (c == '(' || c == ')' || c == ',' || c == '*' || c == ';') {
      if (c != ';') out.push_back({Token::Punct, std::string(1, c), 0.0});
      ++i;
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "' in query");
  }
  out.push_back({Token::End, "", 0.0});
  return out;
}

// --- parser ----------------------------------------------------------------------

class Parser {
 public:
  Parser(const std::string& sql, const AnnotatedSchema& schema)
      : schema_(schema), toks_(tokenize(sql)) {
    q_.text = sql;
  }

  AggregateQuery parse() {
    expect_kw("SELECT");
    parse_projection();
    expect_kw("FROM");
    q_.tables.push_back(table_name());
    while (true) {
      if (accept_punct(",")) {
        q_.tables.push_back(table_name());
      } else if (is_kw("NATURAL")) {
        ++pos_;
        expect_kw("JOIN");
        q_.tables.push_back(table_name());
      } else {
        break;
      }
    }
    dedup_tables();
    resolve_aggregate();
    if (is_kw("WHERE")) {
      ++pos_;
      q_.predicates.push_back(predicate());
      while (is_kw("AND")) {
        ++pos_;
        q_.predicates.push_back(predicate());
      }
    }
    if (is_kw("GROUP")) {
      ++pos_;
      expect_kw("BY");
      if (q_.agg == AggregateKind::Rows)
        throw ValidationError("GROUP BY requires an aggregate");
      q_.group_by.push_back(column_ref());
      while (accept_punct(",")) q_.group_by.push_back(column_ref());
    }
    if (cur().type != Token::End) throw ParseError("unexpected trailing input: '" + cur().text + "'");
    check_connectivity();
    return q_;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  bool is_kw(const char* kw) const {
    return cur().type == Token::Ident && upper(cur().text) == kw;
  }
  void expect_kw(const char* kw) {
    if (!is_kw(kw)) throw ParseError(std::string("expected ") + kw);
    ++pos_;
  }
  bool accept_punct(const char* p) {
    if (cur().type == Token::Punct && cur().text == p) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_punct(const char* p) {
    if (!accept_punct(p)) throw ParseError(std::string("expected '") + p + "'");
  }

  void parse_projection() {
    if (cur().type == Token::Punct && cur().text == "*") {
      ++pos_;
      q_.agg = AggregateKind::Rows;
      return;
    }
    if (is_kw("COUNT")) {
      ++pos_;
      expect_punct("(");
      expect_punct("*");
      expect_punct(")");
      q_.agg = AggregateKind::Count;
      return;
    }
    if (is_kw("SUM") || is_kw("AVG")) {
      q_.agg = is_kw("SUM") ? AggregateKind::Sum : AggregateKind::Avg;
      ++pos_;
      expect_punct("(");
      if (cur().type != Token::Ident) throw ParseError("expected a column inside the aggregate");
      agg_raw_ = cur().text;
      ++pos_;
      expect_punct(")");
      return;
    }
    throw ParseError("expected COUNT(*), SUM(col), AVG(col) or *");
  }

  std::string table_name() {
    if (cur().type != Token::Ident) throw ParseError("expected a table name");
    const std::string t = cur().text;
    ++pos_;
    if (!schema_.has_table(t)) throw ValidationError("unknown table '" + t + "'");
    return t;
  }

  void dedup_tables() {
    std::vector<std::string> uniq;
    for (const auto& t : q_.tables)
      if (std::find(uniq.begin(), uniq.end(), t) == uniq.end()) uniq.push_back(t);
    q_.tables = std::move(uniq);
  }

  std::pair<std::string, std::string> resolve_column(const std::string& raw) {
    const size_t dot = raw.find('.');
    if (dot != std::string::npos) {
      const std::string t = raw.substr(0, dot);
      const std::string c = raw.substr(dot + 1);
      if (std::find(q_.tables.begin(), q_.tables.end(), t) == q_.tables.end())
        throw ValidationError("table '" + t + "' is not part of the query");
      schema_.table(t).column(c);  // throws on unknown column
      return {t, c};
    }
    std::pair<std::string, std::string> hit;
    int matches = 0;
    for (const auto& t : q_.tables)
      for (const auto& col : schema_.table(t).columns)
        if (col.name == raw) {
          hit = {t, raw};
          ++matches;
        }
    if (matches == 0) throw ValidationError("unknown column '" + raw + "'");
    if (matches > 1) throw ValidationError("ambiguous column '" + raw + "'");
    return hit;
  }

  std::pair<std::string, std::string> column_ref() {
    if (cur().type != Token::Ident) throw ParseError("expected a column");
    const std::string raw = cur().text;
    ++pos_;
    return resolve_column(raw);
  }

  void resolve_aggregate() {
    if (q_.agg != AggregateKind::Sum && q_.agg != AggregateKind::Avg) return;
    auto [t, c] = resolve_column(agg_raw_);
    if (schema_.table(t).column(c).type != ColumnType::Continuous)
      throw ValidationError("aggregate column '" + t + "." + c + "' must be continuous");
    q_.agg_table = t;
    q_.agg_column = c;
  }

  Predicate predicate() {
    auto [t, c] = column_ref();
    if (cur().type != Token::Op) throw ParseError("expected a comparison operator");
    Predicate p;
    p.table = t;
    p.column = c;
    p.op = cur().text;
    ++pos_;
    const Token& lit = cur();
    if (lit.type != Token::String && lit.type != Token::Number && lit.type != Token::Ident)
      throw ParseError("expected a literal after '" + p.op + "'");
    p.text = lit.text;
    ++pos_;
    const ColumnType type = schema_.table(t).column(c).type;
    if (type == ColumnType::Continuous) {
      if (lit.type == Token::Number) {
        p.number = lit.num;
      } else {
        char* end = nullptr;
        p.number = std::strtod(p.text.c_str(), &end);
        if (end == p.text.c_str() || *end != '\0')
          throw ValidationError("continuous column '" + t + "." + c +
                                "' needs a numeric literal");
      }
      p.numeric = true;
    } else if (p.op != "=" && p.op != "!=") {
      throw ValidationError("operator '" + p.op + "' needs a continuous column");
    }
    return p;
  }

  void check_connectivity() {
    const std::set<std::string> set(q_.tables.begin(), q_.tables.end());
    size_t edges = 0;
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& fk : schema_.relationships) {
      if (!set.count(fk.child_table) || !set.count(fk.parent_table)) continue;
      ++edges;
      adj[fk.child_table].push_back(fk.parent_table);
      adj[fk.parent_table].push_back(fk.child_table);
    }
    std::set<std::string> seen{q_.tables.front()};
    std::vector<std::string> stack{q_.tables.front()};
    while (!stack.empty()) {
      const std::string t = stack.back();
      stack.pop_back();
      for (const auto& o : adj[t])
        if (seen.insert(o).second) stack.push_back(o);
    }
    if (seen.size() != set.size() || edges != set.size() - 1)
      throw ValidationError("query tables must form a connected acyclic join path");
  }

  const AnnotatedSchema& schema_;
  std::vector<Token> toks_;
  size_t pos_ = 0;
  AggregateQuery q_;
  std::string agg_raw_;
};

// --- plain join --------------------------------------------------------------------

CompletedJoin plain_join(const AggregateQuery& q, const Dataset& dataset,
                         const AnnotatedSchema& schema) {
  std::vector<std::string> order;
  std::vector<std::string> rest = q.tables;
  while (!rest.empty()) {
    size_t pick = rest.size();
    for (size_t i = 0; i < rest.size(); ++i) {
      if (order.empty()) {
        pick = i;
        break;
      }
      for (const auto& p : order)
        if (schema.fk_between(rest[i], p)) {
          pick = i;
          break;
        }
      if (pick != rest.size()) break;
    }
    if (pick == rest.size())
      throw ValidationError("query tables are not FK-connected");
    order.push_back(rest[pick]);
    rest.erase(rest.begin() + static_cast<ptrdiff_t>(pick));
  }

  CompletedJoin j;
  j.tables = order;
  std::vector<std::vector<int64_t>> rows;
  const TableData& root = dataset.table(order[0]);
  rows.reserve(root.row_count);
  for (size_t r = 0; r < root.row_count; ++r) rows.push_back({static_cast<int64_t>(r)});
  for (size_t i = 1; i < order.size(); ++i) {
    const ForeignKey* fk = nullptr;
    size_t ap = 0;
    for (size_t x = i; x-- > 0;)
      if ((fk = schema.fk_between(order[i], order[x]))) {
        ap = x;
        break;
      }
    const FkIndex& fidx = dataset.fk_index(fk->id());
    const bool fanout = fk->child_table == order[i];
    std::vector<std::vector<int64_t>> next;
    for (auto& row : rows) {
      const auto a = static_cast<size_t>(row[ap]);
      if (fanout) {
        for (int32_t c : fidx.parent_children[a]) {
          auto nr = row;
          nr.push_back(c);
          next.push_back(std::move(nr));
        }
      } else {
        const int64_t p = fidx.child_to_parent[a];
        if (p >= 0) {
          auto nr = row;
          nr.push_back(p);
          next.push_back(std::move(nr));
        }
      }
    }
    rows.swap(next);
  }
  j.rows = std::move(rows);
  j.weights.assign(j.rows.size(), 1.0);
  j.recount_origins();
  return j;
}

// --- aggregate machinery -------------------------------------------------------------

bool cmp_num(double v, const std::string& op, double ref) {
  if (std::isnan(v)) return false;
  if (op == "=") return v == ref;
  if (op == "!=") return v != ref;
  if (op == "<") return v < ref;
  if (op == "<=") return v <= ref;
  if (op == ">") return v > ref;
  return v >= ref;
}

bool cmp_text(const std::string& v, const std::string& op, const std::string& ref) {
  if (v.empty()) return false;  // null fails every predicate
  return op == "=" ? v == ref : v != ref;
}

std::string weight_text(double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

struct PredCtx {
  const Predicate* p = nullptr;
  int tpos = -1;
  int attr_pos = -1;  // index among attribute columns, -1 for key columns
  const AttributeEncoder* enc = nullptr;
  bool continuous = false;
  bool satisfiable = false, violable = false;
  std::vector<uint8_t> sat;  // per encoder value index
};

struct GroupStats {
  double cE = 0;                                  // existing passing mass
  double c_est = 0, c_low = 0, c_up = 0, c_ceil = 0;  // synthesized mass blends
  double vE_mass = 0, vE_sum = 0;                 // value-bearing existing rows
  double vM_est = 0, vM_low = 0, vM_up = 0, vM_ceil = 0;
  double vS_est = 0, vS_low = 0, vS_up = 0;
  double v_min = std::numeric_limits<double>::infinity();
  double v_max = -std::numeric_limits<double>::infinity();
  double th_sum_lo = 0, th_sum_hi = 0;  // synthesized sum contribution range
  double synth_mass = 0, total_mass = 0;
};

class Evaluator {
 public:
  Evaluator(const AggregateQuery& q, const CompletedJoin& join, const Dataset& dataset,
            const AnnotatedSchema& schema, const EncoderSet& encoders,
            const ModelCatalog* catalog, double level)
      : q_(q), join_(join), dataset_(dataset), schema_(schema), encoders_(encoders),
        catalog_(catalog), level_(level) {
    for (const auto& p : q_.predicates) preds_.push_back(make_pred(p));
    if (q_.agg == AggregateKind::Sum || q_.agg == AggregateKind::Avg) {
      vtpos_ = join_.table_pos(q_.agg_table);
      if (vtpos_ < 0) throw ExecutionError("aggregate table missing from the join");
      vattr_ = attr_pos(q_.agg_table, q_.agg_column);
      // Plain joins carry no synthesized cells, so they run without encoders.
      if (encoders_.columns.count(q_.agg_table + "." + q_.agg_column))
        venc_ = &encoders_.column_encoder(q_.agg_table, q_.agg_column);
    }
    for (const auto& [t, c] : q_.group_by) {
      const int tp = join_.table_pos(t);
      if (tp < 0) throw ExecutionError("group-by table missing from the join");
      gcols_.emplace_back(t, c);
    }
  }

  QueryResult run() {
    QueryResult res;
    res.query = q_;
    res.existing_rows = join_.existing_rows;
    res.synthesized_rows = join_.synthesized_rows;
    res.tf_clamp_warnings = join_.tf_clamp_warnings;
    if (q_.agg == AggregateKind::Rows) {
      run_rows(res);
      return res;
    }

    std::map<std::vector<std::string>, GroupStats> groups;
    for (size_t r = 0; r < join_.rows.size(); ++r) accumulate(r, groups);
    if (groups.empty() && q_.group_by.empty()) groups.emplace();

    for (const auto& [key, g] : groups) {
      GroupResult gr;
      gr.keys = key;
      finalize(g, gr);
      gr.synthesized_fraction = g.total_mass > 0 ? g.synth_mass / g.total_mass : 0.0;
      res.groups.push_back(std::move(gr));
    }
    return res;
  }

 private:
  int attr_pos(const std::string& table, const std::string& column) const {
    const auto attrs = schema_.table(table).attribute_columns();
    const auto it = std::find(attrs.begin(), attrs.end(), column);
    return it == attrs.end() ? -1 : static_cast<int>(it - attrs.begin());
  }

  PredCtx make_pred(const Predicate& p) {
    PredCtx pc;
    pc.p = &p;
    pc.tpos = join_.table_pos(p.table);
    if (pc.tpos < 0) throw ExecutionError("predicate table missing from the join");
    pc.continuous = schema_.table(p.table).column(p.column).type == ColumnType::Continuous;
    pc.attr_pos = attr_pos(p.table, p.column);
    if (pc.attr_pos >= 0 && encoders_.columns.count(p.table + "." + p.column)) {
      pc.enc = &encoders_.column_encoder(p.table, p.column);
      const int vc = pc.enc->value_count();
      pc.sat.resize(static_cast<size_t>(std::max(vc, 0)));
      for (int i = 0; i < vc; ++i) {
        const bool s = pc.continuous
                           ? cmp_num(pc.enc->bin_repr[static_cast<size_t>(i)], p.op, p.number)
                           : cmp_text(pc.enc->categories[static_cast<size_t>(i)], p.op, p.text);
        pc.sat[static_cast<size_t>(i)] = s ? 1 : 0;
        (s ? pc.satisfiable : pc.violable) = true;
      }
    } else {
      pc.satisfiable = pc.violable = true;
    }
    return pc;
  }

  // Resolves a join cell: a dataset row (real or adopted) or a sampled row.
  const SynthRow* resolve(size_t row, int tpos, int64_t& real) const {
    const int64_t ref = join_.rows[row][static_cast<size_t>(tpos)];
    real = ref;
    if (!CompletedJoin::is_synth_ref(ref)) return nullptr;
    const SynthRow& s = join_.synth[CompletedJoin::synth_index(ref)];
    if (s.nn_row >= 0) {
      real = s.nn_row;
      return nullptr;
    }
    real = -1;
    return &s;
  }

  const std::vector<double>* marginal(const SynthRow& s, const std::string& table,
                                      const std::string& column) const {
    if (!catalog_) return nullptr;
    const ModelEntry* e = catalog_->find(s.entry_key);
    if (!e) return nullptr;
    const MaskedARModel& core = e->core();
    const int vi = core.var_index(table + "." + column);
    if (vi < 0 || static_cast<size_t>(vi) >= core.train_marginal.size()) return nullptr;
    return &core.train_marginal[static_cast<size_t>(vi)];
  }

  double cell_certainty(const std::vector<float>& dist, const std::vector<double>* marg) const {
    if (!marg) return 1.0;
    return certainty(std::span<const float>(dist.data(), dist.size()),
                     std::span<const double>(marg->data(), marg->size()));
  }

  // Mean certainty over a sampled row's recorded distributions; existence
  // confidence of the tuple.
  double synth_confidence(const SynthRow& s) const {
    auto it = conf_cache_.find(&s);
    if (it != conf_cache_.end()) return it->second;
    double sum = 0.0;
    size_t n = 0;
    const std::string& table = join_.tables[static_cast<size_t>(s.table)];
    const auto attrs = schema_.table(table).attribute_columns();
    for (size_t i = 0; i < s.dists.size() && i < attrs.size(); ++i) {
      sum += cell_certainty(s.dists[i], marginal(s, table, attrs[i]));
      ++n;
    }
    const double c = n > 0 ? sum / static_cast<double>(n) : 1.0;
    conf_cache_.emplace(&s, c);
    return c;
  }

  double row_confidence(size_t r) const {
    double c = 1.0;
    for (int64_t ref : join_.rows[r]) {
      if (!CompletedJoin::is_synth_ref(ref)) continue;
      const SynthRow& s = join_.synth[CompletedJoin::synth_index(ref)];
      if (s.nn_row < 0) c *= synth_confidence(s);
    }
    return c;
  }

  bool exact_test(const PredCtx& pc, size_t r) const {
    const Predicate& p = *pc.p;
    if (pc.continuous)
      return cmp_num(join_cell_value(join_, dataset_, schema_, encoders_, r, p.table, p.column),
                     p.op, p.number);
    return cmp_text(join_cell_text(join_, dataset_, schema_, encoders_, r, p.table, p.column),
                    p.op, p.text);
  }

  struct Factors {
    double est = 1, low = 1, up = 1, ceil = 1;
  };

  Factors pred_factors(size_t r) const {
    Factors f;
    for (const auto& pc : preds_) {
      int64_t real = -1;
      const SynthRow* s = resolve(r, pc.tpos, real);
      if (s && pc.enc && pc.attr_pos >= 0 &&
          static_cast<size_t>(pc.attr_pos) < s->dists.size()) {
        const std::vector<float>& dist = s->dists[static_cast<size_t>(pc.attr_pos)];
        double p = 0.0;
        const size_t vc = pc.sat.size();
        for (size_t i = 0; i < vc && i < dist.size(); ++i)
          if (pc.sat[i]) p += dist[i];
        const double c = cell_certainty(dist, marginal(*s, pc.p->table, pc.p->column));
        f.est *= p;
        f.low *= c * p + (1.0 - c) * (pc.violable ? 1.0 - level_ : 1.0);
        f.up *= c * p + (1.0 - c) * (pc.satisfiable ? level_ : 0.0);
        f.ceil *= pc.satisfiable ? 1.0 : 0.0;
      } else {
        const double ind = exact_test(pc, r) ? 1.0 : 0.0;
        f.est *= ind;
        f.low *= ind;
        f.up *= ind;
        f.ceil *= ind;
      }
    }
    return f;
  }

  double marg_quantile(const std::vector<double>* marg, double p, double fallback) const {
    if (!marg || !venc_) return fallback;
    const auto vc = static_cast<size_t>(std::max(venc_->value_count(), 0));
    double total = 0.0;
    for (size_t i = 0; i < vc && i < marg->size(); ++i) total += (*marg)[i];
    if (total <= 0.0) return fallback;
    double cum = 0.0;
    for (size_t i = 0; i < vc && i < marg->size() && i < venc_->bin_repr.size(); ++i) {
      cum += (*marg)[i];
      if (cum >= p * total) return venc_->bin_repr[i];
    }
    return venc_->bin_repr.empty() ? fallback : venc_->bin_repr.back();
  }

  struct ValueInfo {
    bool has = false;
    bool inexact = false;
    double est = 0, low = 0, up = 0;
    double lo_bound = 0, hi_bound = 0;  // attainable extremes for this cell
  };

  ValueInfo value_info(size_t r) const {
    ValueInfo v;
    if (vtpos_ < 0) return v;
    int64_t real = -1;
    const SynthRow* s = resolve(r, vtpos_, real);
    if (s && venc_ && vattr_ >= 0 && static_cast<size_t>(vattr_) < s->dists.size()) {
      const std::vector<float>& dist = s->dists[static_cast<size_t>(vattr_)];
      const auto vc = static_cast<size_t>(std::max(venc_->value_count(), 0));
      double mass = 0.0, ex = 0.0;
      for (size_t i = 0; i < vc && i < dist.size() && i < venc_->bin_repr.size(); ++i) {
        mass += dist[i];
        ex += dist[i] * venc_->bin_repr[i];
      }
      if (mass <= 0.0 || venc_->bin_repr.empty()) return v;
      const double e = ex / mass;
      const std::vector<double>* marg = marginal(*s, q_.agg_table, q_.agg_column);
      const double c = cell_certainty(dist, marg);
      double lo = c * e + (1.0 - c) * marg_quantile(marg, 1.0 - level_, e);
      double hi = c * e + (1.0 - c) * marg_quantile(marg, level_, e);
      if (lo > hi) std::swap(lo, hi);
      v.has = true;
      v.inexact = true;
      v.est = e;
      v.low = lo;
      v.up = hi;
      v.lo_bound = venc_->bin_repr.front();
      v.hi_bound = venc_->bin_repr.back();
      return v;
    }
    double val;
    if (real >= 0) {
      val = dataset_.table(q_.agg_table).column(q_.agg_column).values[static_cast<size_t>(real)];
    } else {
      val = join_cell_value(join_, dataset_, schema_, encoders_, r, q_.agg_table, q_.agg_column);
    }
    if (std::isnan(val)) return v;
    v.has = true;
    v.est = v.low = v.up = v.lo_bound = v.hi_bound = val;
    return v;
  }

  std::vector<std::string> group_key(size_t r) const {
    std::vector<std::string> key;
    key.reserve(gcols_.size());
    for (const auto& [t, c] : gcols_)
      key.push_back(join_cell_text(join_, dataset_, schema_, encoders_, r, t, c));
    return key;
  }

  void accumulate(size_t r, std::map<std::vector<std::string>, GroupStats>& groups) const {
    const Factors f = pred_factors(r);
    const bool synth = join_.row_has_synth(r);
    if (f.est <= 0.0 && !(synth && f.up > 0.0)) return;
    const double w = join_.weights[r];
    GroupStats& g = groups[group_key(r)];
    g.total_mass += w * f.est;
    if (!synth) {
      g.cE += w * f.est;
      const ValueInfo v = value_info(r);
      if (v.has && f.est > 0.0) {
        g.vE_mass += w * f.est;
        g.vE_sum += w * f.est * v.est;
      }
      return;
    }
    g.synth_mass += w * f.est;
    const double conf = row_confidence(r);
    const double x = conf + (1.0 - conf) * (1.0 - level_);
    g.c_est += w * f.est;
    g.c_low += w * f.low * x;
    g.c_up += w * f.up;
    g.c_ceil += w * f.ceil;
    const ValueInfo v = value_info(r);
    if (!v.has) return;
    g.vM_est += w * f.est;
    g.vM_low += w * f.low * x;
    g.vM_up += w * f.up;
    g.vM_ceil += w * f.ceil;
    g.vS_est += w * f.est * v.est;
    g.vS_low += w * f.est * v.low;
    g.vS_up += w * f.est * v.up;
    g.v_min = std::min(g.v_min, v.lo_bound);
    g.v_max = std::max(g.v_max, v.hi_bound);
    g.th_sum_lo += std::min(0.0, w * f.ceil * v.lo_bound);
    g.th_sum_hi += std::max(0.0, w * f.ceil * v.hi_bound);
  }

  void finalize(const GroupStats& g, GroupResult& out) const {
    out.ci.level = level_;
    switch (q_.agg) {
      case AggregateKind::Count: {
        const double est = g.cE + g.c_est;
        const double thm = g.cE;
        const double thM = g.cE + g.c_ceil;
        out.estimate = est;
        out.ci.lower = std::clamp(std::min(g.cE + g.c_low, est), thm, thM);
        out.ci.upper = std::clamp(std::max(g.cE + g.c_up, est), thm, thM);
        out.ci.theoretical_min = thm;
        out.ci.theoretical_max = thM;
        break;
      }
      case AggregateKind::Avg: {
        const auto [est, low, up, thm, thM] = avg_parts(g);
        out.estimate = est;
        out.ci.lower = low;
        out.ci.upper = up;
        out.ci.theoretical_min = thm;
        out.ci.theoretical_max = thM;
        break;
      }
      case AggregateKind::Sum: {
        const double mass = g.vE_mass + g.vM_est;
        if (mass <= 0.0) {
          const double thM = g.th_sum_hi, thm = g.th_sum_lo;
          out.estimate = 0.0;
          out.ci = {level_, std::min(0.0, thm), std::max(0.0, thM), std::min(0.0, thm),
                    std::max(0.0, thM)};
          break;
        }
        const double est = g.vE_sum + g.vS_est;
        const auto [aest, al, au, atm, atM] = avg_parts(g);
        (void)aest;
        double cl = std::min(g.vE_mass + g.vM_low, mass);
        double cu = std::max(g.vE_mass + g.vM_up, mass);
        cl = std::max(cl, g.vE_mass);
        cu = std::min(cu, g.vE_mass + g.vM_ceil);
        double low = est, up = est;
        for (const double c : {cl, cu})
          for (const double a : {al, au}) {
            low = std::min(low, c * a);
            up = std::max(up, c * a);
          }
        const double thm = g.vE_sum + g.th_sum_lo;
        const double thM = g.vE_sum + g.th_sum_hi;
        out.estimate = est;
        out.ci.theoretical_min = std::min(thm, est);
        out.ci.theoretical_max = std::max(thM, est);
        out.ci.lower = std::clamp(low, out.ci.theoretical_min, out.ci.theoretical_max);
        out.ci.upper = std::clamp(up, out.ci.theoretical_min, out.ci.theoretical_max);
        break;
      }
      case AggregateKind::Rows:
        break;
    }
  }

  // (estimate, lower, upper, theoretical_min, theoretical_max) for AVG.
  std::tuple<double, double, double, double, double> avg_parts(const GroupStats& g) const {
    const double mass = g.vE_mass + g.vM_est;
    if (mass <= 0.0) return {0.0, 0.0, 0.0, 0.0, 0.0};
    const double est = (g.vE_sum + g.vS_est) / mass;
    double low = (g.vE_sum + g.vS_low) / mass;
    double up = (g.vE_sum + g.vS_up) / mass;
    std::vector<double> cands;
    if (g.vE_mass > 0.0) cands.push_back(g.vE_sum / g.vE_mass);
    if (g.vM_ceil > 0.0 && g.v_min <= g.v_max) {
      cands.push_back((g.vE_sum + g.vM_ceil * g.v_min) / (g.vE_mass + g.vM_ceil));
      cands.push_back((g.vE_sum + g.vM_ceil * g.v_max) / (g.vE_mass + g.vM_ceil));
    }
    cands.push_back(est);
    const double thm = *std::min_element(cands.begin(), cands.end());
    const double thM = *std::max_element(cands.begin(), cands.end());
    low = std::clamp(std::min(low, est), thm, thM);
    up = std::clamp(std::max(up, est), thm, thM);
    return {est, low, up, thm, thM};
  }

  void run_rows(QueryResult& res) const {
    for (const auto& t : q_.tables)
      for (const auto& col : schema_.table(t).columns)
        res.row_header.push_back(t + "." + col.name);
    res.row_header.push_back("__origin");
    res.row_header.push_back("__weight");

    double pass_mass = 0.0, synth_mass = 0.0, exist_mass = 0.0;
    for (size_t r = 0; r < join_.rows.size(); ++r) {
      bool pass = true;
      for (const auto& pc : preds_)
        if (!exact_test(pc, r)) {
          pass = false;
          break;
        }
      if (!pass) continue;
      const bool synth = join_.row_has_synth(r);
      const double w = join_.weights[r];
      pass_mass += w;
      (synth ? synth_mass : exist_mass) += w;
      std::vector<std::string> fields;
      for (const auto& t : q_.tables)
        for (const auto& col : schema_.table(t).columns)
          fields.push_back(join_cell_text(join_, dataset_, schema_, encoders_, r, t, col.name));
      fields.push_back(synth ? "synthesized" : "existing");
      fields.push_back(weight_text(w));
      res.rows.push_back(std::move(fields));
    }
    GroupResult g;
    g.estimate = pass_mass;
    g.ci = {level_, pass_mass, pass_mass, exist_mass, pass_mass};
    g.synthesized_fraction = pass_mass > 0 ? synth_mass / pass_mass : 0.0;
    res.groups.push_back(std::move(g));
  }

  const AggregateQuery& q_;
  const CompletedJoin& join_;
  const Dataset& dataset_;
  const AnnotatedSchema& schema_;
  const EncoderSet& encoders_;
  const ModelCatalog* catalog_;
  double level_;
  std::vector<PredCtx> preds_;
  int vtpos_ = -1, vattr_ = -1;
  const AttributeEncoder* venc_ = nullptr;
  std::vector<std::pair<std::string, std::string>> gcols_;
  mutable std::map<const SynthRow*, double> conf_cache_;
};

const EncoderSet& empty_encoders() {
  static EncoderSet e;
  return e;
}

}  // namespace

AggregateQuery parse_query(const std::string& sql, const AnnotatedSchema& schema) {
  return Parser(sql, schema).parse();
}

QueryResult execute_plain(const AggregateQuery& query, const Dataset& dataset,
                          const AnnotatedSchema& schema) {
  const CompletedJoin join = plain_join(query, dataset, schema);
  return Evaluator(query, join, dataset, schema, empty_encoders(), nullptr, 0.95).run();
}

QueryResult execute(const AggregateQuery& query, const Dataset& dataset,
                    const AnnotatedSchema& schema, const ModelCatalog& catalog,
                    const QueryOptions& options) {
  if (!(options.level > 0.0 && options.level < 1.0))
    throw ValidationError("confidence level must lie in (0, 1)");

  bool any_incomplete = false;
  for (const auto& t : query.tables)
    if (!schema.table_complete(t)) any_incomplete = true;
  if (!any_incomplete) {
    const CompletedJoin join = plain_join(query, dataset, schema);
    QueryResult res =
        Evaluator(query, join, dataset, schema, catalog.encoders, &catalog, options.level).run();
    return res;
  }

  CompletedJoin join;
  bool have_join = false;
  std::vector<std::string> notes;

  if (options.use_cache && !options.hint && query.tables.size() == 2) {
    const std::string* complete = nullptr;
    const std::string* incomplete = nullptr;
    for (const auto& t : query.tables)
      (schema.table_complete(t) ? complete : incomplete) = &t;
    if (complete && incomplete) {
      const CompletionPlan offline_plan = advanced_select(
          dataset, schema, catalog, {*complete, *incomplete}, {}, 0, catalog.config.seed);
      if (offline_plan.recommended) {
        if (const CompletedJoin* hit = find_offline(dataset.fingerprint(), *complete,
                                                    *incomplete, offline_plan.fingerprint())) {
          join = *hit;
          have_join = true;
          notes.push_back("served from offline completion cache");
        }
      }
    }
  }

  if (!have_join) {
    std::map<std::string, std::string> focus;
    if (query.agg == AggregateKind::Sum || query.agg == AggregateKind::Avg)
      focus.emplace(query.agg_table, query.agg_column);
    const CompletionPlan plan =
        advanced_select(dataset, schema, catalog, query.tables, options.hint,
                        options.scenarios, options.seed, focus);
    if (!plan.recommended) {
      QueryResult res = execute_plain(query, dataset, schema);
      res.completion_attempted = true;
      res.recommended = false;
      res.notes.push_back("no admissible completion model; serving the uncompleted answer");
      return res;
    }
    join = complete_with_additional_tables(dataset, schema, catalog, plan, query.tables);
  }

  QueryResult res =
      Evaluator(query, join, dataset, schema, catalog.encoders, &catalog, options.level).run();
  res.completion_attempted = true;
  res.recommended = true;
  for (auto& n : notes) res.notes.push_back(std::move(n));
  return res;
}

QueryResult execute_sql(const std::string& sql, const Dataset& dataset,
                        const AnnotatedSchema& schema, const ModelCatalog& catalog,
                        const QueryOptions& options) {
  return execute(parse_query(sql, schema), dataset, schema, catalog, options);
}

}  // namespace relcomp
