// relcomp command-line front end: ingest → train → query/complete, plus a
// synthetic benchmark driver. One command per process; all output is
// deterministic for fixed inputs and seeds.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "relcomp/completion.hpp"
#include "relcomp/csv.hpp"
#include "relcomp/dataset.hpp"
#include "relcomp/errors.hpp"
#include "relcomp/eval_harness.hpp"
#include "relcomp/fingerprint.hpp"
#include "relcomp/planner.hpp"
#include "relcomp/query.hpp"
#include "relcomp/rng.hpp"
#include "relcomp/schema.hpp"
#include "relcomp/serialize.hpp"

namespace fs = std::filesystem;
namespace rc = relcomp;
using nlohmann::json;

namespace {

std::string num_text(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct Workspace {
  fs::path dir;
  rc::AnnotatedSchema schema;
  rc::Dataset dataset;
};

Workspace load_workspace(const std::string& dir) {
  Workspace ws;
  ws.dir = dir;
  const fs::path schema_path = ws.dir / "schema.json";
  if (!fs::exists(schema_path))
    throw rc::ValidationError("'" + dir + "' is not a workspace (missing schema.json)");
  ws.schema = rc::load_annotation(schema_path.string());
  ws.dataset = rc::load_dataset((ws.dir / "dataset.rcds").string(), ws.schema);
  return ws;
}

rc::ModelCatalog load_ws_catalog(const Workspace& ws) {
  const fs::path path = ws.dir / "catalog.rcmo";
  if (!fs::exists(path))
    throw rc::ValidationError("no catalog in workspace; run `relcomp train` first");
  rc::ModelCatalog catalog = rc::load_catalog(path.string(), ws.schema);
  if (catalog.dataset_fingerprint != ws.dataset.fingerprint())
    throw rc::ValidationError("catalog was trained on different data; re-run `relcomp train`");
  return catalog;
}

std::optional<rc::BiasHint> parse_suspect(const std::string& s) {
  if (s.empty()) return {};
  const auto colon = s.rfind(':');
  const auto dot = s.find('.');
  if (colon == std::string::npos || dot == std::string::npos || dot > colon)
    throw rc::ValidationError("--suspect expects <table.attribute>:<over|under>");
  rc::BiasHint hint;
  hint.table = s.substr(0, dot);
  hint.column = s.substr(dot + 1, colon - dot - 1);
  const std::string dir = s.substr(colon + 1);
  if (dir == "over")
    hint.overestimated = true;
  else if (dir == "under")
    hint.overestimated = false;
  else
    throw rc::ValidationError("--suspect direction must be 'over' or 'under'");
  return hint;
}

json group_json(const rc::GroupResult& g) {
  json j;
  j["keys"] = g.keys;
  j["estimate"] = g.estimate;
  j["ci"] = {{"level", g.ci.level},
             {"lower", g.ci.lower},
             {"upper", g.ci.upper},
             {"theoretical_min", g.ci.theoretical_min},
             {"theoretical_max", g.ci.theoretical_max}};
  j["synthesized_fraction"] = g.synthesized_fraction;
  return j;
}

void print_result(const rc::QueryResult& r, bool json_out, std::ostream& os) {
  if (json_out) {
    json j;
    j["query"] = r.query.text;
    j["completion_attempted"] = r.completion_attempted;
    j["recommended"] = r.recommended;
    j["existing_rows"] = r.existing_rows;
    j["synthesized_rows"] = r.synthesized_rows;
    j["tf_clamp_warnings"] = r.tf_clamp_warnings;
    j["notes"] = r.notes;
    if (r.query.agg == rc::AggregateKind::Rows) {
      j["header"] = r.row_header;
      j["rows"] = r.rows;
    } else {
      j["groups"] = json::array();
      for (const auto& g : r.groups) j["groups"].push_back(group_json(g));
    }
    os << j.dump(2) << '\n';
    return;
  }
  if (r.query.agg == rc::AggregateKind::Rows) {
    os << rc::csv_join(r.row_header) << '\n';
    for (const auto& row : r.rows) os << rc::csv_join(row) << '\n';
  } else {
    for (const auto& g : r.groups) {
      std::string keys;
      for (const auto& k : g.keys) {
        if (!keys.empty()) keys += ", ";
        keys += k.empty() ? "(null)" : k;
      }
      os << (keys.empty() ? "(all)" : keys) << ": " << num_text(g.estimate) << "  ci=["
         << num_text(g.ci.lower) << ", " << num_text(g.ci.upper) << "]@"
         << num_text(g.ci.level) << "  theoretical=[" << num_text(g.ci.theoretical_min)
         << ", " << num_text(g.ci.theoretical_max) << "]  synthesized="
         << num_text(g.synthesized_fraction) << '\n';
    }
  }
  os << "-- rows: " << r.existing_rows << " existing, " << r.synthesized_rows
     << " synthesized";
  if (r.tf_clamp_warnings) os << "; " << r.tf_clamp_warnings << " tuple-factor clamps";
  os << '\n';
  if (r.completion_attempted && !r.recommended)
    os << "-- completion not recommended; uncompleted answer\n";
  for (const auto& n : r.notes) os << "-- " << n << '\n';
}

int cmd_ingest(const std::string& schema_path, const std::string& data_dir,
               const std::string& out, bool json_out) {
  rc::AnnotatedSchema schema = rc::load_annotation(schema_path);
  rc::Dataset ds = rc::ingest_csv(schema, data_dir);
  fs::create_directories(out);

  std::ifstream in(schema_path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  std::ofstream copy(fs::path(out) / "schema.json", std::ios::binary);
  copy << buf.str();
  if (!copy) throw rc::ExecutionError("cannot write workspace under '" + out + "'");
  copy.close();
  rc::save_dataset(ds, (fs::path(out) / "dataset.rcds").string());

  const std::string fp = hex64(ds.fingerprint());
  if (json_out) {
    json j;
    j["workspace"] = out;
    j["fingerprint"] = fp;
    j["tables"] = json::object();
    for (const auto& t : ds.tables) j["tables"][t.name] = t.row_count;
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& t : ds.tables)
      std::cout << t.name << ": " << t.row_count << " rows"
                << (schema.table_complete(t.name) ? "" : " (incomplete)") << '\n';
    std::cout << "workspace written to " << out << " (fingerprint " << fp << ")\n";
  }
  return 0;
}

int cmd_train(const std::string& ws_dir, int epochs, int width, int bins, uint64_t seed,
              const std::string& ssar, bool json_out) {
  Workspace ws = load_workspace(ws_dir);
  rc::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.hidden_width = width;
  cfg.bins = bins;
  cfg.seed = seed;
  if (ssar == "off") cfg.context_dim = 0;

  rc::ModelCatalog catalog = rc::train_all(ws.dataset, ws.schema, rc::plan_models(ws.schema),
                                           cfg);
  const std::string path = (ws.dir / "catalog.rcmo").string();
  rc::save_catalog(catalog, path);

  std::ifstream back(path, std::ios::binary);
  std::stringstream bytes;
  bytes << back.rdbuf();
  rc::Fingerprint fp;
  fp.bytes(bytes.str().data(), bytes.str().size());

  if (json_out) {
    json j;
    j["catalog"] = path;
    j["fingerprint"] = fp.hex();
    j["entries"] = json::array();
    for (const auto& e : catalog.entries)
      j["entries"].push_back({{"key", e.key()},
                              {"target", e.spec.target},
                              {"loss", e.target_loss()},
                              {"entropy", e.target_entropy()}});
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& e : catalog.entries)
      std::cout << e.key() << "  loss=" << num_text(e.target_loss())
                << "  entropy=" << num_text(e.target_entropy()) << '\n';
    std::cout << catalog.entries.size() << " model entries written to " << path
              << " (fingerprint " << fp.hex() << ")\n";
  }
  return 0;
}

int run_one_query(const std::string& sql, const Workspace& ws,
                  const rc::ModelCatalog& catalog, const rc::QueryOptions& opts,
                  bool json_out) {
  const rc::QueryResult r = rc::execute_sql(sql, ws.dataset, ws.schema, catalog, opts);
  print_result(r, json_out, std::cout);
  return 0;
}

int cmd_query(const std::string& ws_dir, const std::string& sql, bool repl, uint64_t seed,
              double level, const std::string& suspect, int scenarios, bool no_cache,
              bool json_out) {
  if (sql.empty() == !repl) {
    std::cerr << "error: pass exactly one of a SQL string or --repl\n";
    return 1;
  }
  Workspace ws = load_workspace(ws_dir);
  const rc::ModelCatalog catalog = load_ws_catalog(ws);
  rc::QueryOptions opts;
  opts.seed = seed;
  opts.level = level;
  opts.hint = parse_suspect(suspect);
  opts.scenarios = scenarios;
  opts.use_cache = !no_cache;

  if (!repl) return run_one_query(sql, ws, catalog, opts, json_out);

  std::string line;
  while (true) {
    std::cout << "sql> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    const std::string q = line.substr(b, e - b + 1);
    if (q == "exit" || q == "quit") break;
    try {
      run_one_query(q, ws, catalog, opts, json_out);
    } catch (const rc::Error& err) {
      std::cout << "error: " << err.what() << '\n';
    }
  }
  return 0;
}

int cmd_complete(const std::string& ws_dir, bool offline, const std::string& path_list,
                 const std::string& out, uint64_t seed, int scenarios, bool json_out) {
  if (offline == !path_list.empty()) {
    std::cerr << "error: pass exactly one of --offline or --path\n";
    return 1;
  }
  Workspace ws = load_workspace(ws_dir);
  const rc::ModelCatalog catalog = load_ws_catalog(ws);

  if (offline) {
    const auto results = rc::offline_complete(ws.dataset, ws.schema, catalog);
    json j = json::array();
    for (const auto& r : results) {
      if (!out.empty()) {
        fs::create_directories(out);
        const fs::path file =
            fs::path(out) / (r.complete_table + "__" + r.incomplete_table + ".csv");
        rc::export_completed_csv(r.join, ws.dataset, ws.schema, catalog.encoders,
                                 file.string());
      }
      if (json_out)
        j.push_back({{"complete", r.complete_table},
                     {"incomplete", r.incomplete_table},
                     {"existing_rows", r.join.existing_rows},
                     {"synthesized_rows", r.join.synthesized_rows},
                     {"plan_fingerprint", hex64(r.plan.fingerprint())},
                     {"from_cache", r.from_cache}});
      else
        std::cout << r.complete_table << " + " << r.incomplete_table << ": "
                  << r.join.existing_rows << " existing, " << r.join.synthesized_rows
                  << " synthesized" << (r.from_cache ? " (cached)" : "") << '\n';
    }
    if (json_out) std::cout << j.dump(2) << '\n';
    return 0;
  }

  const std::vector<std::string> tables = split_list(path_list, ',');
  if (tables.empty()) throw rc::ValidationError("--path needs a comma-separated table list");
  const rc::CompletionPlan plan =
      rc::advanced_select(ws.dataset, ws.schema, catalog, tables, {}, scenarios, seed);
  if (!plan.recommended) {
    if (json_out)
      std::cout << json({{"recommended", false}}).dump(2) << '\n';
    else
      std::cout << "completion not recommended for this path; nothing written\n";
    return 0;
  }
  const rc::CompletedJoin join =
      rc::complete_with_additional_tables(ws.dataset, ws.schema, catalog, plan, tables);
  const std::string file = out.empty() ? (ws.dir / "completed.csv").string() : out;
  rc::export_completed_csv(join, ws.dataset, ws.schema, catalog.encoders, file);
  if (json_out) {
    json j;
    j["recommended"] = true;
    j["csv"] = file;
    j["existing_rows"] = join.existing_rows;
    j["synthesized_rows"] = join.synthesized_rows;
    j["tf_clamp_warnings"] = join.tf_clamp_warnings;
    j["plan_fingerprint"] = hex64(plan.fingerprint());
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << join.existing_rows << " existing + " << join.synthesized_rows
              << " synthesized rows written to " << file << '\n';
  }
  return 0;
}

// ---- bench ---------------------------------------------------------------

void reject_unknown(const json& obj, const std::vector<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw rc::ValidationError("unknown key '" + key + "' in " + where);
  }
}

rc::SyntheticSpec parse_generator(const json& g) {
  reject_unknown(g, {"rows", "predictability", "skew", "fanout_predictability", "tf_law",
                     "tf_max", "domain", "chain"},
                 "generator");
  rc::SyntheticSpec spec;
  spec.rows = g.value("rows", static_cast<uint64_t>(spec.rows));
  spec.predictability = g.value("predictability", spec.predictability);
  spec.skew = g.value("skew", spec.skew);
  spec.fanout_predictability = g.value("fanout_predictability", spec.fanout_predictability);
  spec.tf_max = g.value("tf_max", spec.tf_max);
  spec.domain = g.value("domain", spec.domain);
  const std::string law = g.value("tf_law", std::string("uniform"));
  if (law == "fixed")
    spec.tf_law = rc::TfLaw::Fixed;
  else if (law == "uniform")
    spec.tf_law = rc::TfLaw::Uniform;
  else if (law == "prop_a")
    spec.tf_law = rc::TfLaw::PropA;
  else
    throw rc::ValidationError("tf_law must be fixed, uniform or prop_a");
  return spec;
}

struct BenchCell {
  double keep = 0, corr = 0;
  uint64_t seed = 0;
  bool recommended = false;
  std::optional<double> bias, card;
  std::optional<double> err;
};

int cmd_bench(const std::string& spec_path, const std::string& out_dir, bool json_out) {
  std::ifstream in(spec_path);
  if (!in) throw rc::ValidationError("cannot open bench spec '" + spec_path + "'");
  json spec;
  try {
    spec = json::parse(in);
  } catch (const json::exception& e) {
    throw rc::ParseError("bench spec: " + std::string(e.what()));
  }
  reject_unknown(spec, {"generator", "removal", "train", "queries", "seeds", "scenarios"},
                 "bench spec");
  if (!spec.contains("removal")) throw rc::ValidationError("bench spec needs 'removal'");

  const json gen_json = spec.value("generator", json::object());
  const rc::SyntheticSpec gen = parse_generator(gen_json);
  const bool chain = gen_json.value("chain", false);

  const json& rem = spec["removal"];
  reject_unknown(rem, {"table", "attribute", "keep_rates", "correlations", "tf_keep_rate",
                       "cascade"},
                 "removal");
  const std::string table = rem.value("table", std::string("tb"));
  const std::string attribute = rem.value("attribute", std::string("b_val"));
  const std::vector<double> keeps = rem.value("keep_rates", std::vector<double>{0.5});
  const std::vector<double> corrs = rem.value("correlations", std::vector<double>{0.0});
  const double tf_keep = rem.value("tf_keep_rate", 1.0);
  const bool cascade = rem.value("cascade", false);

  rc::TrainConfig cfg;
  if (spec.contains("train")) {
    const json& tr = spec["train"];
    reject_unknown(tr, {"epochs", "hidden", "bins", "batch", "seed", "ssar"}, "train");
    cfg.epochs = tr.value("epochs", cfg.epochs);
    cfg.hidden_width = tr.value("hidden", cfg.hidden_width);
    cfg.bins = tr.value("bins", cfg.bins);
    cfg.batch_size = tr.value("batch", cfg.batch_size);
    cfg.seed = tr.value("seed", cfg.seed);
    if (!tr.value("ssar", true)) cfg.context_dim = 0;
  }
  const std::vector<std::string> queries =
      spec.value("queries", std::vector<std::string>{});
  const std::vector<uint64_t> seeds = spec.value("seeds", std::vector<uint64_t>{1});
  const int scenarios = spec.value("scenarios", 0);

  const rc::AnnotatedSchema schema = chain ? rc::chain_schema(table)
                                           : rc::synthetic_schema(true);
  if (!schema.incomplete_tables.count(table))
    throw rc::ValidationError("removal table '" + table +
                              "' is not the generator's incomplete table");
  std::string neighbor;
  for (const rc::ForeignKey* fk : schema.relationships_of(table)) {
    const std::string& other = fk->child_table == table ? fk->parent_table : fk->child_table;
    if (schema.table_complete(other)) {
      neighbor = other;
      break;
    }
  }
  if (neighbor.empty())
    throw rc::ValidationError("removal table has no complete FK neighbor");

  std::vector<BenchCell> cells;
  for (const double keep : keeps)
    for (const double corr : corrs)
      for (const uint64_t seed : seeds) {
        const rc::Dataset complete = chain ? rc::generate_chain(gen, seed)
                                           : rc::generate_synthetic(gen, seed);
        rc::RemovalSpec rs;
        rs.table = table;
        rs.attribute = attribute;
        rs.keep_rate = keep;
        rs.removal_correlation = corr;
        rs.tf_keep_rate = tf_keep;
        rs.seed = rc::Rng::derive(seed, {0xbe5eull});
        rs.cascade_links = cascade;
        const rc::RemovalResult rr = rc::biased_removal(complete, schema, rs);

        rc::TrainConfig run_cfg = cfg;
        run_cfg.seed = rc::Rng::derive(cfg.seed, {seed});
        const rc::ModelCatalog catalog =
            rc::train_all(rr.data, schema, rc::plan_models(schema), run_cfg);
        const rc::CompletionPlan plan = rc::advanced_select(
            rr.data, schema, catalog, {neighbor, table}, {}, scenarios, seed);

        BenchCell cell;
        cell.keep = keep;
        cell.corr = corr;
        cell.seed = seed;
        cell.recommended = plan.recommended;
        const rc::Dataset* done = &rr.data;
        rc::Dataset materialized;
        if (plan.recommended) {
          const rc::CompletedJoin join = rc::complete_with_additional_tables(
              rr.data, schema, catalog, plan, {neighbor, table});
          materialized = rc::materialize_completed(join, rr.data, schema, catalog.encoders);
          done = &materialized;
        }
        cell.bias = rc::bias_reduction(complete, rr.data, *done, table, attribute,
                                       rr.designated_value);
        cell.card = rc::cardinality_correction(complete, rr.data, *done, table);
        if (!queries.empty()) {
          double sum = 0;
          for (const auto& q : queries)
            sum += rc::relative_error_reduction(rc::parse_query(q, schema), complete,
                                                rr.data, *done, schema);
          cell.err = sum / static_cast<double>(queries.size());
        }
        cells.push_back(cell);
      }

  fs::create_directories(out_dir);
  std::ofstream grid(fs::path(out_dir) / "grid.csv");
  grid << rc::csv_join({"keep_rate", "correlation", "seed", "recommended", "bias_reduction",
                        "cardinality_correction", "mean_error_reduction"})
       << '\n';
  for (const auto& c : cells)
    grid << rc::csv_join({num_text(c.keep), num_text(c.corr), std::to_string(c.seed),
                          c.recommended ? "1" : "0", c.bias ? num_text(*c.bias) : "",
                          c.card ? num_text(*c.card) : "", c.err ? num_text(*c.err) : ""})
         << '\n';
  if (!grid) throw rc::ExecutionError("cannot write grid under '" + out_dir + "'");

  // Seed-averaged summary per grid point.
  json summary = json::array();
  for (const double keep : keeps)
    for (const double corr : corrs) {
      double bias = 0, card = 0, err = 0;
      size_t nb = 0, nc = 0, ne = 0, rec = 0, n = 0;
      for (const auto& c : cells) {
        if (c.keep != keep || c.corr != corr) continue;
        ++n;
        rec += c.recommended ? 1 : 0;
        if (c.bias) bias += *c.bias, ++nb;
        if (c.card) card += *c.card, ++nc;
        if (c.err) err += *c.err, ++ne;
      }
      json cell;
      cell["keep_rate"] = keep;
      cell["correlation"] = corr;
      cell["seeds"] = n;
      cell["recommended"] = rec;
      cell["bias_reduction"] = nb ? json(bias / nb) : json();
      cell["cardinality_correction"] = nc ? json(card / nc) : json();
      cell["mean_error_reduction"] = ne ? json(err / ne) : json();
      summary.push_back(cell);
    }
  std::ofstream sj(fs::path(out_dir) / "summary.json");
  sj << summary.dump(2) << '\n';

  if (json_out) {
    std::cout << summary.dump(2) << '\n';
  } else {
    for (const auto& cell : summary) {
      std::cout << "keep=" << num_text(cell["keep_rate"].get<double>())
                << " corr=" << num_text(cell["correlation"].get<double>());
      if (!cell["bias_reduction"].is_null())
        std::cout << " bias=" << num_text(cell["bias_reduction"].get<double>());
      if (!cell["cardinality_correction"].is_null())
        std::cout << " card=" << num_text(cell["cardinality_correction"].get<double>());
      if (!cell["mean_error_reduction"].is_null())
        std::cout << " err=" << num_text(cell["mean_error_reduction"].get<double>());
      std::cout << " (" << cell["recommended"].get<size_t>() << "/"
                << cell["seeds"].get<size_t>() << " recommended)\n";
    }
    std::cout << "grid written to " << out_dir << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relcomp — query-time completion of incomplete relational data"};
  app.require_subcommand(1);
  bool json_out = false;

  auto add_json = [&](CLI::App* sub) {
    sub->add_flag("--json", json_out, "machine-readable JSON output");
  };

  std::string schema_path, data_dir, out_ws;
  auto* ingest = app.add_subcommand("ingest", "load CSVs into a workspace");
  ingest->add_option("schema", schema_path, "annotation JSON")->required();
  ingest->add_option("data", data_dir, "directory of <table>.csv files")->required();
  ingest->add_option("--out", out_ws, "workspace directory")->required();
  add_json(ingest);

  std::string train_ws, ssar = "on";
  int epochs = 30, width = 128, bins = 64;
  uint64_t train_seed = 1;
  auto* train = app.add_subcommand("train", "train completion models");
  train->add_option("workspace", train_ws)->required();
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--width", width, "hidden layer width");
  train->add_option("--bins", bins, "continuous-attribute bins");
  train->add_option("--seed", train_seed, "training seed");
  train->add_option("--ssar", ssar, "set-evidence models: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  add_json(train);

  std::string query_ws, sql, suspect;
  bool repl = false, no_cache = false;
  uint64_t query_seed = 1;
  double level = 0.95;
  int scenarios = 3;
  auto* query = app.add_subcommand("query", "answer a query with completion");
  query->add_option("workspace", query_ws)->required();
  query->add_option("sql", sql, "query text (omit with --repl)");
  query->add_flag("--repl", repl, "interactive query loop");
  query->add_option("--seed", query_seed, "sampling seed");
  query->add_option("--confidence", level, "confidence level in (0,1)");
  query->add_option("--suspect", suspect, "bias hint <table.attribute>:<over|under>");
  query->add_option("--scenarios", scenarios, "advanced-selection scenarios");
  query->add_flag("--no-cache", no_cache, "skip the offline completion cache");
  add_json(query);

  std::string complete_ws, path_list, complete_out;
  bool offline = false;
  uint64_t complete_seed = 1;
  int complete_scen = 3;
  auto* complete = app.add_subcommand("complete", "materialize completed joins");
  complete->add_option("workspace", complete_ws)->required();
  complete->add_flag("--offline", offline, "precompute every two-table completion");
  complete->add_option("--path", path_list, "comma-separated table path to complete");
  complete->add_option("--out", complete_out, "CSV file (--path) or directory (--offline)");
  complete->add_option("--seed", complete_seed, "plan seed");
  complete->add_option("--scenarios", complete_scen, "advanced-selection scenarios");
  add_json(complete);

  std::string bench_spec, bench_out = "bench_out";
  auto* bench = app.add_subcommand("bench", "synthetic removal/completion benchmark");
  bench->add_option("spec", bench_spec, "bench spec JSON")->required();
  bench->add_option("--out", bench_out, "output directory");
  add_json(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*ingest) return cmd_ingest(schema_path, data_dir, out_ws, json_out);
    if (*train)
      return cmd_train(train_ws, epochs, width, bins, train_seed, ssar, json_out);
    if (*query)
      return cmd_query(query_ws, sql, repl, query_seed, level, suspect, scenarios, no_cache,
                       json_out);
    if (*complete)
      return cmd_complete(complete_ws, offline, path_list, complete_out, complete_seed,
                          complete_scen, json_out);
    if (*bench) return cmd_bench(bench_spec, bench_out, json_out);
  } catch (const rc::TrainingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const rc::ExecutionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const rc::Error& e) {  // parse, validation, serialization
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 1;
}
