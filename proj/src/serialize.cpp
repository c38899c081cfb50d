#include "relcomp/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "relcomp/errors.hpp"

namespace relcomp {

namespace {

// Little-endian binary writer. Output goes to "<path>.tmp" and is renamed
// into place on commit, so readers never observe a partial artifact.
class Writer {
 public:
  explicit Writer(const std::string& path)
      : final_(path), tmp_(path + ".tmp"), f_(tmp_, std::ios::binary | std::ios::trunc) {
    if (!f_) throw SerializationError("cannot write '" + tmp_ + "'");
  }
  ~Writer() {
    if (!committed_) {
      f_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  void commit() {
    f_.flush();
    if (!f_) throw SerializationError("failed writing '" + tmp_ + "'");
    f_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, final_, ec);
    if (ec) throw SerializationError("cannot move '" + tmp_ + "' to '" + final_ + "'");
    committed_ = true;
  }

  void bytes(const void* p, size_t n) { f_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void magic(const char m[4]) { bytes(m, 4); }
  void u8(uint8_t v) { bytes(&v, 1); }
  void u32(uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
    bytes(b, 8);
  }
  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
  void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void vi32(const std::vector<int32_t>& v) {
    u64(v.size());
    for (int32_t x : v) i32(x);
  }
  void vf64(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void vf32(const std::vector<float>& v) {
    u64(v.size());
    for (float x : v) f32(x);
  }
  void vu8(const std::vector<uint8_t>& v) {
    u64(v.size());
    bytes(v.data(), v.size());
  }
  void vstr(const std::vector<std::string>& v) {
    u64(v.size());
    for (const auto& s : v) str(s);
  }
  void matrix(const Matrix& m) {
    i32(m.rows);
    i32(m.cols);
    for (double x : m.data) f64(x);
  }

 private:
  std::string final_, tmp_;
  std::ofstream f_;
  bool committed_ = false;
};

class Reader {
 public:
  Reader(const std::string& path, const char expect[4], const char* what) : what_(what) {
    f_.open(path, std::ios::binary);
    if (!f_) throw SerializationError("cannot open '" + path + "'");
    f_.seekg(0, std::ios::end);
    remaining_ = static_cast<size_t>(f_.tellg());
    f_.seekg(0);
    char m[4];
    need(m, 4);
    if (std::string(m, 4) != std::string(expect, 4))
      throw SerializationError("'" + path + "' is not a " + what_ + " artifact");
    const uint32_t version = u32();
    if (version != kArtifactVersion)
      throw VersionMismatchError(what_ + " artifact version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(kArtifactVersion) + ")");
  }

  void need(void* p, size_t n) {
    if (n > remaining_ || !f_.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
      throw SerializationError("truncated " + what_ + " artifact");
    remaining_ -= n;
  }
  // Guards vector lengths against garbage before allocating.
  size_t count(size_t elem_size) {
    const uint64_t n = u64();
    if (elem_size > 0 && n > remaining_ / elem_size)
      throw SerializationError("corrupt " + what_ + " artifact");
    return static_cast<size_t>(n);
  }

  uint8_t u8() {
    uint8_t v;
    need(&v, 1);
    return v;
  }
  uint32_t u32() {
    uint8_t b[4];
    need(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint8_t b[8];
    need(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  int64_t i64() { return static_cast<int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const size_t n = count(1);
    std::string s(n, '\0');
    need(s.data(), n);
    return s;
  }
  std::vector<int32_t> vi32() {
    std::vector<int32_t> v(count(4));
    for (auto& x : v) x = i32();
    return v;
  }
  std::vector<double> vf64() {
    std::vector<double> v(count(8));
    for (auto& x : v) x = f64();
    return v;
  }
  std::vector<float> vf32() {
    std::vector<float> v(count(4));
    for (auto& x : v) x = f32();
    return v;
  }
  std::vector<uint8_t> vu8() {
    std::vector<uint8_t> v(count(1));
    need(v.data(), v.size());
    return v;
  }
  std::vector<std::string> vstr() {
    std::vector<std::string> v(count(8));
    for (auto& s : v) s = str();
    return v;
  }
  Matrix matrix() {
    const int32_t rows = i32();
    const int32_t cols = i32();
    if (rows < 0 || cols < 0 ||
        (cols > 0 && static_cast<size_t>(rows) > remaining_ / (8 * static_cast<size_t>(cols))))
      throw SerializationError("corrupt " + what_ + " artifact");
    Matrix m(rows, cols);
    for (auto& x : m.data) x = f64();
    return m;
  }

 private:
  std::ifstream f_;
  std::string what_;
  size_t remaining_ = 0;
};

// --- model pieces ------------------------------------------------------------

void write_encoder(Writer& w, const AttributeEncoder& e) {
  w.u8(static_cast<uint8_t>(e.kind));
  w.vstr(e.categories);
  w.vf64(e.bin_edges);
  w.vf64(e.bin_repr);
  w.i32(e.tf_cap);
  w.i32(e.cardinality);
}

AttributeEncoder read_encoder(Reader& r) {
  AttributeEncoder e;
  e.kind = static_cast<AttributeEncoder::Kind>(r.u8());
  e.categories = r.vstr();
  e.bin_edges = r.vf64();
  e.bin_repr = r.vf64();
  e.tf_cap = r.i32();
  e.cardinality = r.i32();
  for (size_t i = 0; i < e.categories.size(); ++i)
    e.category_index.emplace(e.categories[i], static_cast<int32_t>(i));
  return e;
}

void write_encoder_set(Writer& w, const EncoderSet& e) {
  w.i32(e.bins);
  w.u64(e.columns.size());
  for (const auto& [key, enc] : e.columns) {
    w.str(key);
    write_encoder(w, enc);
  }
  w.u64(e.tuple_factors.size());
  for (const auto& [key, enc] : e.tuple_factors) {
    w.str(key);
    write_encoder(w, enc);
  }
}

EncoderSet read_encoder_set(Reader& r) {
  EncoderSet e;
  e.bins = r.i32();
  for (size_t i = 0, n = r.count(1); i < n; ++i) {
    std::string key = r.str();
    e.columns.emplace(std::move(key), read_encoder(r));
  }
  for (size_t i = 0, n = r.count(1); i < n; ++i) {
    std::string key = r.str();
    e.tuple_factors.emplace(std::move(key), read_encoder(r));
  }
  return e;
}

void write_var(Writer& w, const VariableInfo& v) {
  w.str(v.table);
  w.str(v.column);
  w.u8(v.is_tuple_factor ? 1 : 0);
  w.str(v.fk_id);
  w.i32(v.cardinality);
}

VariableInfo read_var(Reader& r) {
  VariableInfo v;
  v.table = r.str();
  v.column = r.str();
  v.is_tuple_factor = r.u8() != 0;
  v.fk_id = r.str();
  v.cardinality = r.i32();
  return v;
}

void write_ar(Writer& w, const MaskedARModel& m) {
  w.u64(m.vars.size());
  for (const auto& v : m.vars) write_var(w, v);
  w.i32(m.embed_dim);
  w.i32(m.hidden_width);
  w.i32(m.context_dim);
  w.u64(m.embeddings.size());
  for (const auto& e : m.embeddings) w.matrix(e);
  w.matrix(m.w1);
  w.matrix(m.w2);
  w.vf64(m.b1);
  w.vf64(m.b2);
  w.u64(m.head_w.size());
  for (const auto& h : m.head_w) w.matrix(h);
  w.u64(m.head_b.size());
  for (const auto& h : m.head_b) w.vf64(h);
  w.u64(m.hidden_degree.size());
  for (int d : m.hidden_degree) w.i32(d);
  w.matrix(m.mask1);
  w.matrix(m.mask2);
  w.vf64(m.holdout_loss);
  w.vf64(m.marginal_entropy);
  w.u64(m.train_marginal.size());
  for (const auto& t : m.train_marginal) w.vf64(t);
}

MaskedARModel read_ar(Reader& r) {
  MaskedARModel m;
  m.vars.resize(r.count(1));
  for (auto& v : m.vars) v = read_var(r);
  m.embed_dim = r.i32();
  m.hidden_width = r.i32();
  m.context_dim = r.i32();
  m.embeddings.resize(r.count(1));
  for (auto& e : m.embeddings) e = r.matrix();
  m.w1 = r.matrix();
  m.w2 = r.matrix();
  m.b1 = r.vf64();
  m.b2 = r.vf64();
  m.head_w.resize(r.count(1));
  for (auto& h : m.head_w) h = r.matrix();
  m.head_b.resize(r.count(1));
  for (auto& h : m.head_b) h = r.vf64();
  m.hidden_degree.resize(r.count(4));
  for (auto& d : m.hidden_degree) d = r.i32();
  m.mask1 = r.matrix();
  m.mask2 = r.matrix();
  m.holdout_loss = r.vf64();
  m.marginal_entropy = r.vf64();
  m.train_marginal.resize(r.count(1));
  for (auto& t : m.train_marginal) t = r.vf64();
  return m;
}

void write_tree_encoder(Writer& w, const TreeEncoder& t) {
  w.i32(t.embed_dim);
  w.i32(t.hidden);
  w.i32(t.node_dim);
  w.i32(t.context_dim);
  w.i32(t.n_groups);
  w.u64(t.tables.size());
  for (const auto& [name, enc] : t.tables) {
    w.str(name);
    w.str(enc.table);
    w.vstr(enc.attrs);
    w.u64(enc.attr_embeddings.size());
    for (const auto& e : enc.attr_embeddings) w.matrix(e);
    w.matrix(enc.w_in);
    w.vf64(enc.b_in);
    w.matrix(enc.w_out);
    w.vf64(enc.b_out);
    w.i32(enc.embed_dim);
    w.i32(enc.node_dim);
  }
  w.matrix(t.w_root);
  w.vf64(t.b_root);
}

TreeEncoder read_tree_encoder(Reader& r) {
  TreeEncoder t;
  t.embed_dim = r.i32();
  t.hidden = r.i32();
  t.node_dim = r.i32();
  t.context_dim = r.i32();
  t.n_groups = r.i32();
  for (size_t i = 0, n = r.count(1); i < n; ++i) {
    std::string name = r.str();
    TableNodeEncoder enc;
    enc.table = r.str();
    enc.attrs = r.vstr();
    enc.attr_embeddings.resize(r.count(1));
    for (auto& e : enc.attr_embeddings) e = r.matrix();
    enc.w_in = r.matrix();
    enc.b_in = r.vf64();
    enc.w_out = r.matrix();
    enc.b_out = r.vf64();
    enc.embed_dim = r.i32();
    enc.node_dim = r.i32();
    t.tables.emplace(std::move(name), std::move(enc));
  }
  t.w_root = r.matrix();
  t.b_root = r.vf64();
  return t;
}

void write_walk(Writer& w, const WalkNode& n) {
  w.str(n.table);
  w.str(n.via.child_table);
  w.str(n.via.child_column);
  w.str(n.via.parent_table);
  w.str(n.via.parent_column);
  w.u8(n.fanout ? 1 : 0);
  w.u64(n.children.size());
  for (const auto& c : n.children) write_walk(w, c);
}

WalkNode read_walk(Reader& r) {
  WalkNode n;
  n.table = r.str();
  n.via.child_table = r.str();
  n.via.child_column = r.str();
  n.via.parent_table = r.str();
  n.via.parent_column = r.str();
  n.fanout = r.u8() != 0;
  const size_t kids = r.count(1);
  n.children.reserve(kids);
  for (size_t i = 0; i < kids; ++i) n.children.push_back(read_walk(r));
  return n;
}

void write_train_config(Writer& w, const TrainConfig& c) {
  w.i32(c.bins);
  w.i32(c.epochs);
  w.i32(c.batch_size);
  w.f64(c.learning_rate);
  w.f64(c.momentum);
  w.f64(c.lr_decay);
  w.i32(c.lr_decay_every);
  w.i32(c.hidden_width);
  w.i32(c.embed_dim);
  w.i32(c.patience);
  w.f64(c.holdout_fraction);
  w.u64(c.seed);
  w.i32(c.context_dim);
  w.i32(c.child_hidden);
  w.i32(c.tree_embed_dim);
  w.i32(c.max_children);
}

TrainConfig read_train_config(Reader& r) {
  TrainConfig c;
  c.bins = r.i32();
  c.epochs = r.i32();
  c.batch_size = r.i32();
  c.learning_rate = r.f64();
  c.momentum = r.f64();
  c.lr_decay = r.f64();
  c.lr_decay_every = r.i32();
  c.hidden_width = r.i32();
  c.embed_dim = r.i32();
  c.patience = r.i32();
  c.holdout_fraction = r.f64();
  c.seed = r.u64();
  c.context_dim = r.i32();
  c.child_hidden = r.i32();
  c.tree_embed_dim = r.i32();
  c.max_children = r.i32();
  return c;
}

}  // namespace

// --- dataset -----------------------------------------------------------------

void save_dataset(const Dataset& dataset, const std::string& path) {
  Writer w(path);
  w.magic("RCDS");
  w.u32(kArtifactVersion);
  w.u64(dataset.tables.size());
  for (const auto& t : dataset.tables) {
    w.str(t.name);
    w.u64(t.row_count);
    w.u64(t.columns.size());
    for (size_t c = 0; c < t.columns.size(); ++c) {
      const Column& col = t.columns[c];
      w.str(t.column_names[c]);
      w.u8(static_cast<uint8_t>(col.type));
      if (col.type == ColumnType::Continuous) {
        w.vf64(col.values);
      } else {
        w.vstr(col.dict);
        w.vi32(col.codes);
      }
    }
    w.u64(t.rel_complete.size());
    for (const auto& [fk_id, flags] : t.rel_complete) {
      w.str(fk_id);
      w.vu8(flags);
    }
  }
  w.u64(dataset.tuple_factors.size());
  for (const auto& [fk_id, tf] : dataset.tuple_factors) {
    w.str(fk_id);
    w.str(tf.parent_table);
    w.vi32(tf.counts);
  }
  w.commit();
}

Dataset load_dataset(const std::string& path, const AnnotatedSchema& schema) {
  Reader r(path, "RCDS", "dataset");
  Dataset d;
  d.tables.resize(r.count(1));
  for (auto& t : d.tables) {
    t.name = r.str();
    t.row_count = r.u64();
    const size_t n_cols = r.count(1);
    t.column_names.resize(n_cols);
    t.columns.resize(n_cols);
    for (size_t c = 0; c < n_cols; ++c) {
      t.column_names[c] = r.str();
      Column& col = t.columns[c];
      col.type = static_cast<ColumnType>(r.u8());
      if (col.type == ColumnType::Continuous) {
        col.values = r.vf64();
      } else {
        col.dict = r.vstr();
        col.codes = r.vi32();
        for (size_t i = 0; i < col.dict.size(); ++i)
          col.dict_index.emplace(col.dict[i], static_cast<int32_t>(i));
      }
      if (col.size() != t.row_count)
        throw SerializationError("corrupt dataset artifact: column size mismatch");
    }
    for (size_t i = 0, n = r.count(1); i < n; ++i) {
      std::string fk_id = r.str();
      t.rel_complete.emplace(std::move(fk_id), r.vu8());
    }
  }
  for (size_t i = 0, n = r.count(1); i < n; ++i) {
    TupleFactorColumn tf;
    tf.fk_id = r.str();
    tf.parent_table = r.str();
    tf.counts = r.vi32();
    d.tuple_factors.emplace(tf.fk_id, std::move(tf));
  }
  for (const auto& t : schema.tables)
    if (!d.has_table(t.name))
      throw SerializationError("dataset artifact is missing table '" + t.name + "'");
  d.build_fk_indexes(schema);
  return d;
}

// --- model catalog -------------------------------------------------------------

void save_catalog(const ModelCatalog& catalog, const std::string& path) {
  Writer w(path);
  w.magic("RCMO");
  w.u32(kArtifactVersion);
  write_encoder_set(w, catalog.encoders);
  w.u64(catalog.encoders.fingerprint());
  write_train_config(w, catalog.config);
  w.u64(catalog.dataset_fingerprint);

  // AR cores are shared between entries of one merged spec; keep that.
  std::vector<const MaskedARModel*> cores;
  std::map<const MaskedARModel*, size_t> core_index;
  for (const auto& e : catalog.entries) {
    if (e.kind != ModelKind::AR) continue;
    if (core_index.emplace(e.ar.get(), cores.size()).second) cores.push_back(e.ar.get());
  }
  w.u64(cores.size());
  for (const auto* core : cores) write_ar(w, *core);

  w.u64(catalog.entries.size());
  for (const auto& e : catalog.entries) {
    w.str(e.spec.anchor);
    w.str(e.spec.target);
    w.vstr(e.spec.evidence);
    w.u8(e.kind == ModelKind::SSAR ? 1 : 0);
    w.vstr(e.order);
    if (e.kind == ModelKind::AR) {
      w.u64(core_index.at(e.ar.get()));
    } else {
      write_ar(w, e.ssar->ar);
      write_tree_encoder(w, e.ssar->tree);
      write_walk(w, e.ssar->walk);
    }
  }
  w.commit();
}

ModelCatalog load_catalog(const std::string& path, const AnnotatedSchema& schema) {
  Reader r(path, "RCMO", "model catalog");
  ModelCatalog c;
  c.encoders = read_encoder_set(r);
  const uint64_t enc_fp = r.u64();
  if (c.encoders.fingerprint() != enc_fp)
    throw SerializationError("model catalog encoder state does not match its fingerprint");
  c.config = read_train_config(r);
  c.dataset_fingerprint = r.u64();

  std::vector<std::shared_ptr<MaskedARModel>> cores(r.count(1));
  for (auto& core : cores) core = std::make_shared<MaskedARModel>(read_ar(r));

  c.entries.resize(r.count(1));
  for (auto& e : c.entries) {
    e.spec.anchor = r.str();
    e.spec.target = r.str();
    e.spec.evidence = r.vstr();
    e.kind = r.u8() != 0 ? ModelKind::SSAR : ModelKind::AR;
    e.order = r.vstr();
    if (e.kind == ModelKind::AR) {
      const size_t idx = r.u64();
      if (idx >= cores.size())
        throw SerializationError("corrupt model catalog artifact: bad core index");
      e.ar = cores[idx];
    } else {
      auto ssar = std::make_shared<SSARModel>();
      ssar->ar = read_ar(r);
      ssar->tree = read_tree_encoder(r);
      ssar->walk = read_walk(r);
      e.ssar = std::move(ssar);
    }
    for (const auto& t : e.order)
      if (!schema.has_table(t))
        throw SerializationError("model catalog references unknown table '" + t + "'");
  }
  return c;
}

// --- completed join -------------------------------------------------------------

void save_completed_join(const CompletedJoin& join, const std::string& path) {
  Writer w(path);
  w.magic("RCCJ");
  w.u32(kArtifactVersion);
  w.vstr(join.tables);
  w.u64(join.synth.size());
  for (const auto& s : join.synth) {
    w.i32(s.table);
    w.vi32(s.attrs);
    w.u64(s.dists.size());
    for (const auto& d : s.dists) w.vf32(d);
    w.str(s.entry_key);
    w.i64(s.nn_row);
    w.str(s.pk);
  }
  w.u64(join.rows.size());
  for (size_t i = 0; i < join.rows.size(); ++i) {
    for (int64_t ref : join.rows[i]) w.i64(ref);
    w.f64(join.weights[i]);
  }
  w.i32(join.tf_clamp_warnings);
  w.commit();
}

CompletedJoin load_completed_join(const std::string& path) {
  Reader r(path, "RCCJ", "completed join");
  CompletedJoin j;
  j.tables = r.vstr();
  j.synth.resize(r.count(1));
  for (auto& s : j.synth) {
    s.table = r.i32();
    s.attrs = r.vi32();
    s.dists.resize(r.count(1));
    for (auto& d : s.dists) d = r.vf32();
    s.entry_key = r.str();
    s.nn_row = r.i64();
    s.pk = r.str();
  }
  const size_t width = j.tables.size();
  const size_t n_rows = r.count(8 * (width + 1));
  j.rows.resize(n_rows);
  j.weights.resize(n_rows);
  for (size_t i = 0; i < n_rows; ++i) {
    j.rows[i].resize(width);
    for (auto& ref : j.rows[i]) {
      ref = r.i64();
      if (CompletedJoin::is_synth_ref(ref) &&
          CompletedJoin::synth_index(ref) >= j.synth.size())
        throw SerializationError("corrupt completed join artifact: bad synth reference");
    }
    j.weights[i] = r.f64();
  }
  j.tf_clamp_warnings = r.i32();
  j.recount_origins();
  return j;
}

}  // namespace relcomp
