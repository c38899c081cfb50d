#include "relcomp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "relcomp/csv.hpp"
#include "relcomp/errors.hpp"
#include "relcomp/fingerprint.hpp"

namespace relcomp {

namespace fs = std::filesystem;

bool Column::is_null(size_t row) const {
  if (type == ColumnType::Continuous) return std::isnan(values[row]);
  return codes[row] < 0;
}

std::string Column::cell_text(size_t row) const {
  if (is_null(row)) return "";
  if (type == ColumnType::Continuous) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, values[row]);
    return std::string(buf, end);
  }
  return dict[static_cast<size_t>(codes[row])];
}

int32_t Column::intern(const std::string& value) {
  auto it = dict_index.find(value);
  if (it != dict_index.end()) return it->second;
  int32_t code = static_cast<int32_t>(dict.size());
  dict.push_back(value);
  dict_index.emplace(value, code);
  return code;
}

uint64_t Column::digest() const {
  Fingerprint fp;
  fp.u64(static_cast<uint64_t>(type));
  if (type == ColumnType::Continuous) {
    fp.u64(values.size());
    for (double v : values) {
      const bool null = std::isnan(v);
      fp.f64(null ? 0.0 : v);
      fp.u64(null);
    }
  } else {
    fp.u64(codes.size());
    for (int32_t c : codes) fp.str(c < 0 ? "" : dict[static_cast<size_t>(c)]);
  }
  return fp.value();
}

int TableData::column_index(const std::string& name) const {
  for (size_t i = 0; i < column_names.size(); ++i)
    if (column_names[i] == name) return static_cast<int>(i);
  return -1;
}

Column& TableData::column(const std::string& name) {
  int i = column_index(name);
  if (i < 0) throw ValidationError("table '" + this->name + "' has no column '" + name + "'");
  return columns[static_cast<size_t>(i)];
}

const Column& TableData::column(const std::string& name) const {
  return const_cast<TableData*>(this)->column(name);
}

bool Dataset::has_table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return true;
  return false;
}

TableData& Dataset::table(const std::string& name) {
  for (auto& t : tables)
    if (t.name == name) return t;
  throw ValidationError("dataset has no table '" + name + "'");
}

const TableData& Dataset::table(const std::string& name) const {
  return const_cast<Dataset*>(this)->table(name);
}

const FkIndex& Dataset::fk_index(const std::string& fk_id) const {
  auto it = fk_indexes.find(fk_id);
  if (it == fk_indexes.end())
    throw ExecutionError("foreign key index for '" + fk_id + "' not built");
  return it->second;
}

void Dataset::build_fk_indexes(const AnnotatedSchema& schema) {
  fk_indexes.clear();
  for (const auto& fk : schema.relationships) {
    const TableData& child = table(fk.child_table);
    const TableData& parent = table(fk.parent_table);
    const Column& ccol = child.column(fk.child_column);
    const Column& pcol = parent.column(fk.parent_column);

    std::unordered_map<std::string, int64_t> parent_by_key;
    parent_by_key.reserve(parent.row_count);
    for (size_t r = 0; r < parent.row_count; ++r)
      if (!pcol.is_null(r)) parent_by_key.emplace(pcol.dict[static_cast<size_t>(pcol.codes[r])], static_cast<int64_t>(r));

    FkIndex idx;
    idx.child_to_parent.assign(child.row_count, -1);
    idx.parent_children.assign(parent.row_count, {});
    for (size_t r = 0; r < child.row_count; ++r) {
      if (ccol.is_null(r)) continue;
      auto it = parent_by_key.find(ccol.dict[static_cast<size_t>(ccol.codes[r])]);
      if (it == parent_by_key.end()) continue;  // dangling FK: treated as missing parent
      idx.child_to_parent[r] = it->second;
      idx.parent_children[static_cast<size_t>(it->second)].push_back(static_cast<int32_t>(r));
    }
    fk_indexes.emplace(fk.id(), std::move(idx));
  }
}

uint64_t Dataset::fingerprint() const {
  std::vector<uint64_t> digests;
  for (const auto& t : tables) {
    for (size_t c = 0; c < t.columns.size(); ++c) {
      Fingerprint fp;
      fp.str(t.name);
      fp.str(t.column_names[c]);
      fp.u64(t.columns[c].digest());
      digests.push_back(fp.value());
    }
    for (const auto& [fk_id, flags] : t.rel_complete) {
      Fingerprint fp;
      fp.str(t.name);
      fp.str("__rel_complete_" + fk_id);
      fp.vec(flags);
      digests.push_back(fp.value());
    }
  }
  for (const auto& [fk_id, tf] : tuple_factors) {
    Fingerprint fp;
    fp.str("__tf_" + fk_id);
    fp.vec(tf.counts);
    digests.push_back(fp.value());
  }
  std::sort(digests.begin(), digests.end());
  Fingerprint fp;
  fp.vec(digests);
  return fp.value();
}

namespace {

constexpr const char* kRelCompletePrefix = "__rel_complete_";

double parse_double_or_nan(const std::string& s) {
  if (s.empty()) return std::nan("");
  const char* begin = s.data();
  const char* end = begin + s.size();
  double v = 0.0;
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end) return std::nan("");
  return v;
}

}  // namespace

Dataset ingest_csv(const AnnotatedSchema& schema, const std::string& dir) {
  Dataset ds;
  for (const auto& tdef : schema.tables) {
    fs::path path = fs::path(dir) / (tdef.name + ".csv");
    if (!fs::exists(path))
      throw ValidationError("missing CSV file for table '" + tdef.name + "': " + path.string());

    CsvReader reader(path.string());
    std::vector<CsvField> header;
    if (!reader.next(header))
      throw ParseError("CSV file '" + path.string() + "' is empty (no header)");

    TableData t;
    t.name = tdef.name;
    for (const auto& cdef : tdef.columns) {
      t.column_names.push_back(cdef.name);
      Column col;
      col.type = cdef.type;
      t.columns.push_back(std::move(col));
    }

    // Map CSV positions onto declared columns; extra __rel_complete_<fk>
    // columns are routed to per-row flags when this table is the parent.
    std::vector<int> col_of_field(header.size(), -1);
    std::vector<std::string> flag_of_field(header.size());
    std::vector<bool> seen(tdef.columns.size(), false);
    for (size_t f = 0; f < header.size(); ++f) {
      const std::string& h = header[f].text;
      int ci = tdef.column_index(h);
      if (ci >= 0) {
        if (seen[static_cast<size_t>(ci)])
          throw ParseError("duplicate column '" + h + "' in " + path.string());
        seen[static_cast<size_t>(ci)] = true;
        col_of_field[f] = ci;
        continue;
      }
      if (h.rfind(kRelCompletePrefix, 0) == 0) {
        std::string fk_id = h.substr(std::string(kRelCompletePrefix).size());
        bool known = false;
        for (const auto& fk : schema.relationships)
          if (fk.id() == fk_id && fk.parent_table == tdef.name) known = true;
        if (!known)
          throw ParseError("completeness column '" + h + "' in " + path.string() +
                           " does not match a relationship with parent '" + tdef.name + "'");
        flag_of_field[f] = fk_id;
        continue;
      }
      throw ParseError("unexpected column '" + h + "' in " + path.string());
    }
    for (size_t c = 0; c < tdef.columns.size(); ++c)
      if (!seen[c])
        throw ParseError("column '" + tdef.columns[c].name + "' missing from " + path.string());

    std::vector<CsvField> fields;
    while (reader.next(fields)) {
      if (fields.size() == 1 && fields[0].text.empty() && !fields[0].quoted)
        continue;  // tolerate blank lines
      if (fields.size() != header.size())
        throw ParseError("row with " + std::to_string(fields.size()) + " fields (expected " +
                         std::to_string(header.size()) + ") at line " +
                         std::to_string(reader.line()) + " of " + path.string());
      for (size_t f = 0; f < fields.size(); ++f) {
        const std::string& text = fields[f].text;
        if (col_of_field[f] >= 0) {
          Column& col = t.columns[static_cast<size_t>(col_of_field[f])];
          if (col.type == ColumnType::Continuous) {
            col.values.push_back(parse_double_or_nan(text));
          } else {
            col.codes.push_back(text.empty() ? -1 : col.intern(text));
          }
        } else {
          const std::string& fk_id = flag_of_field[f];
          auto& flags = t.rel_complete[fk_id];
          flags.push_back(text == "1" || text == "true" || text == "TRUE" ? 1 : 0);
        }
      }
      ++t.row_count;
    }

    const Column& pk = t.columns[static_cast<size_t>(tdef.column_index(tdef.primary_key))];
    std::unordered_map<int32_t, size_t> seen_keys;
    for (size_t r = 0; r < t.row_count; ++r) {
      if (pk.is_null(r))
        throw ValidationError("null primary key in '" + tdef.name + "' at row " +
                              std::to_string(r));
      auto [it, inserted] = seen_keys.emplace(pk.codes[r], r);
      if (!inserted)
        throw ValidationError("duplicate primary key '" + pk.cell_text(r) + "' in table '" +
                              tdef.name + "'");
    }
    ds.tables.push_back(std::move(t));
  }

  ds.build_fk_indexes(schema);
  compute_tuple_factors(ds, schema);
  return ds;
}

void compute_tuple_factors(Dataset& dataset, const AnnotatedSchema& schema) {
  dataset.tuple_factors.clear();
  for (const auto& fk : schema.relationships) {
    const TableData& parent = dataset.table(fk.parent_table);
    const FkIndex& idx = dataset.fk_index(fk.id());
    const bool globally_complete = schema.relationship_complete(fk);
    const std::vector<uint8_t>* flags = nullptr;
    auto it = parent.rel_complete.find(fk.id());
    if (it != parent.rel_complete.end()) flags = &it->second;

    TupleFactorColumn tf;
    tf.fk_id = fk.id();
    tf.parent_table = fk.parent_table;
    tf.counts.assign(parent.row_count, -1);
    for (size_t r = 0; r < parent.row_count; ++r) {
      const bool row_complete = globally_complete || (flags && r < flags->size() && (*flags)[r]);
      if (row_complete)
        tf.counts[r] = static_cast<int32_t>(idx.parent_children[r].size());
    }
    dataset.tuple_factors[fk.id()] = std::move(tf);
  }
}

void export_csv(const Dataset& dataset, const AnnotatedSchema& schema,
                const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& tdef : schema.tables) {
    const TableData& t = dataset.table(tdef.name);
    std::ofstream out(fs::path(dir) / (tdef.name + ".csv"), std::ios::binary);
    std::vector<std::string> row = t.column_names;
    out << csv_join(row) << "\n";
    for (size_t r = 0; r < t.row_count; ++r) {
      row.clear();
      for (const auto& col : t.columns) row.push_back(col.cell_text(r));
      out << csv_join(row) << "\n";
    }
  }
}

}  // namespace relcomp
