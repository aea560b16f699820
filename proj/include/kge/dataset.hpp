#pragma once
// Triple ingestion, vocabulary construction, split management, the
// filtered-membership index and relation-cardinality statistics.
//
// File formats:
//  - tsv-labels: UTF-8, one triple per line, "head\trelation\ttail", no
//    header. A path may be a single file (all triples become the train
//    split) or a directory containing train.tsv and optionally valid.tsv /
//    test.tsv. Ids are assigned by first occurrence.
//  - id-binary: header line "kge-ids v1 <entities> <relations> <n_train>
//    <n_valid> <n_test>\n" followed by little-endian u32 (head, relation,
//    tail) records, train then valid then test.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kge {

using EntityId = uint32_t;
using RelationId = uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
  size_t operator()(const Triple& t) const {
    uint64_t x = (uint64_t(t.head) << 32) ^ (uint64_t(t.relation) << 20) ^ t.tail;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return static_cast<size_t>(x);
  }
};

// Dense label<->id bijection. Labels are optional on the binary path, in
// which case canonical names e<i> / r<i> are synthesized.
class Vocabulary {
 public:
  EntityId intern_entity(const std::string& label) {
    auto it = entity_ids_.find(label);
    if (it != entity_ids_.end()) return it->second;
    EntityId id = static_cast<EntityId>(entity_names_.size());
    entity_names_.push_back(label);
    entity_ids_.emplace(label, id);
    return id;
  }

  RelationId intern_relation(const std::string& label) {
    auto it = relation_ids_.find(label);
    if (it != relation_ids_.end()) return it->second;
    RelationId id = static_cast<RelationId>(relation_names_.size());
    relation_names_.push_back(label);
    relation_ids_.emplace(label, id);
    return id;
  }

  static Vocabulary with_counts(size_t n_entities, size_t n_relations) {
    Vocabulary v;
    v.entity_names_.reserve(n_entities);
    for (size_t i = 0; i < n_entities; ++i) v.intern_entity("e" + std::to_string(i));
    for (size_t i = 0; i < n_relations; ++i) v.intern_relation("r" + std::to_string(i));
    return v;
  }

  size_t entity_count() const { return entity_names_.size(); }
  size_t relation_count() const { return relation_names_.size(); }

  const std::string& entity_name(EntityId id) const { return entity_names_.at(id); }
  const std::string& relation_name(RelationId id) const { return relation_names_.at(id); }

  // Returns -1 when the label is unknown.
  int64_t entity_id(const std::string& label) const {
    auto it = entity_ids_.find(label);
    return it == entity_ids_.end() ? -1 : int64_t(it->second);
  }
  int64_t relation_id(const std::string& label) const {
    auto it = relation_ids_.find(label);
    return it == relation_ids_.end() ? -1 : int64_t(it->second);
  }

 private:
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
};

enum class Split { train, valid, test };

struct TripleStore {
  Vocabulary vocab;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;

  const std::vector<Triple>& split(Split s) const {
    switch (s) {
      case Split::train: return train;
      case Split::valid: return valid;
      default: return test;
    }
  }

  size_t total_triples() const { return train.size() + valid.size() + test.size(); }

  void check_bounds() const {
    auto check = [&](const std::vector<Triple>& ts, const char* name) {
      for (size_t i = 0; i < ts.size(); ++i) {
        const Triple& t = ts[i];
        if (t.head >= vocab.entity_count() || t.tail >= vocab.entity_count() ||
            t.relation >= vocab.relation_count()) {
          throw std::runtime_error("triple out of vocabulary bounds in " +
                                   std::string(name) + " at index " + std::to_string(i));
        }
      }
    };
    check(train, "train");
    check(valid, "valid");
    check(test, "test");
  }
};

// Membership set over train ∪ valid ∪ test. Queries are pure; set semantics
// (a triple duplicated across splits is stored once).
class FilterIndex {
 public:
  FilterIndex() = default;

  explicit FilterIndex(const std::vector<const std::vector<Triple>*>& lists) {
    size_t n = 0;
    for (auto* l : lists) n += l->size();
    set_.reserve(n);
    for (auto* l : lists)
      for (const Triple& t : *l) set_.insert(t);
  }

  bool contains(const Triple& t) const { return set_.count(t) != 0; }
  size_t size() const { return set_.size(); }

 private:
  std::unordered_set<Triple, TripleHash> set_;
};

inline FilterIndex build_filter_index(const TripleStore& store) {
  return FilterIndex({&store.train, &store.valid, &store.test});
}

inline FilterIndex build_train_filter(const TripleStore& store) {
  return FilterIndex({&store.train});
}

enum class RelationCategory { one_to_one, one_to_n, n_to_one, n_to_n, undefined };

inline const char* to_string(RelationCategory c) {
  switch (c) {
    case RelationCategory::one_to_one: return "1-to-1";
    case RelationCategory::one_to_n: return "1-to-N";
    case RelationCategory::n_to_one: return "N-to-1";
    case RelationCategory::n_to_n: return "N-to-N";
    default: return "undefined";
  }
}

struct RelationStat {
  RelationId relation = 0;
  size_t n_train_triples = 0;
  double avg_tails_per_head = 0.0;  // defined only when n_train_triples > 0
  double avg_heads_per_tail = 0.0;
  RelationCategory category = RelationCategory::undefined;
};

struct RelationStats {
  std::vector<RelationStat> per_relation;  // dense, one entry per relation id
  double threshold = 1.5;
};

// Cardinality statistics over the train split. A ratio at or above the
// threshold puts that side in the "N" class; relations absent from train are
// reported as undefined rather than guessed.
inline RelationStats relation_stats(const TripleStore& store, double threshold = 1.5) {
  const size_t n_rel = store.vocab.relation_count();
  std::vector<size_t> counts(n_rel, 0);
  std::vector<std::unordered_set<EntityId>> heads(n_rel), tails(n_rel);
  for (const Triple& t : store.train) {
    counts[t.relation]++;
    heads[t.relation].insert(t.head);
    tails[t.relation].insert(t.tail);
  }
  RelationStats stats;
  stats.threshold = threshold;
  stats.per_relation.resize(n_rel);
  for (size_t r = 0; r < n_rel; ++r) {
    RelationStat& s = stats.per_relation[r];
    s.relation = static_cast<RelationId>(r);
    s.n_train_triples = counts[r];
    if (counts[r] == 0) continue;
    s.avg_tails_per_head = double(counts[r]) / double(heads[r].size());
    s.avg_heads_per_tail = double(counts[r]) / double(tails[r].size());
    const bool n_tails = s.avg_tails_per_head >= threshold;
    const bool n_heads = s.avg_heads_per_tail >= threshold;
    s.category = n_tails ? (n_heads ? RelationCategory::n_to_n : RelationCategory::one_to_n)
                         : (n_heads ? RelationCategory::n_to_one : RelationCategory::one_to_one);
  }
  return stats;
}

// Count of (head, tail) pairs carrying >= 2 distinct relations, over the
// union of splits.
inline size_t multi_relation_pair_count(const TripleStore& store) {
  std::unordered_map<uint64_t, std::unordered_set<RelationId>> pair_rels;
  auto add = [&](const std::vector<Triple>& ts) {
    for (const Triple& t : ts)
      pair_rels[(uint64_t(t.head) << 32) | t.tail].insert(t.relation);
  };
  add(store.train);
  add(store.valid);
  add(store.test);
  size_t n = 0;
  for (const auto& [pair, rels] : pair_rels)
    if (rels.size() >= 2) ++n;
  return n;
}

enum class TripleFormat { tsv_labels, id_binary };

namespace detail {

inline void parse_tsv_into(const std::filesystem::path& path, Vocabulary& vocab,
                           std::vector<Triple>& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": malformed line: empty");
    }
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos ||
        line.find('\t', t2 + 1) != std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": malformed line: expected 3 tab-separated fields");
    }
    Triple t;
    t.head = vocab.intern_entity(line.substr(0, t1));
    t.relation = vocab.intern_relation(line.substr(t1 + 1, t2 - t1 - 1));
    t.tail = vocab.intern_entity(line.substr(t2 + 1));
    out.push_back(t);
  }
}

inline void write_u32le(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32le(const unsigned char* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

}  // namespace detail

inline TripleStore load_tsv_labels(const std::filesystem::path& path) {
  TripleStore store;
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    const fs::path train = path / "train.tsv";
    if (!fs::exists(train))
      throw std::runtime_error("tsv-labels directory " + path.string() + " has no train.tsv");
    detail::parse_tsv_into(train, store.vocab, store.train);
    if (fs::exists(path / "valid.tsv"))
      detail::parse_tsv_into(path / "valid.tsv", store.vocab, store.valid);
    if (fs::exists(path / "test.tsv"))
      detail::parse_tsv_into(path / "test.tsv", store.vocab, store.test);
  } else {
    detail::parse_tsv_into(path, store.vocab, store.train);
  }
  return store;
}

inline TripleStore load_id_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error(path.string() + ": missing id-binary header");
  std::istringstream hs(header);
  std::string magic, version;
  uint64_t n_ent = 0, n_rel = 0, n_train = 0, n_valid = 0, n_test = 0;
  hs >> magic >> version >> n_ent >> n_rel >> n_train >> n_valid >> n_test;
  if (!hs || magic != "kge-ids" || version != "v1")
    throw std::runtime_error(path.string() + ": bad id-binary header: \"" + header + "\"");

  TripleStore store;
  store.vocab = Vocabulary::with_counts(n_ent, n_rel);
  const uint64_t header_bytes = header.size() + 1;

  auto read_split = [&](std::vector<Triple>& out, uint64_t count, uint64_t base_index) {
    out.resize(count);
    std::vector<unsigned char> buf(count * 12);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (static_cast<uint64_t>(in.gcount()) != buf.size())
      throw std::runtime_error(path.string() + ": truncated id-binary payload");
    for (uint64_t i = 0; i < count; ++i) {
      const unsigned char* p = buf.data() + i * 12;
      Triple t{detail::read_u32le(p), detail::read_u32le(p + 4), detail::read_u32le(p + 8)};
      const uint64_t offset = header_bytes + (base_index + i) * 12;
      if (t.head >= n_ent || t.tail >= n_ent)
        throw std::runtime_error(path.string() + ": entity id out of range at byte offset " +
                                 std::to_string(offset));
      if (t.relation >= n_rel)
        throw std::runtime_error(path.string() + ": relation id out of range at byte offset " +
                                 std::to_string(offset + 4));
      out[i] = t;
    }
  };
  read_split(store.train, n_train, 0);
  read_split(store.valid, n_valid, n_train);
  read_split(store.test, n_test, n_train + n_valid);
  return store;
}

inline TripleStore load_triples(const std::filesystem::path& path, TripleFormat format) {
  return format == TripleFormat::tsv_labels ? load_tsv_labels(path) : load_id_binary(path);
}

inline void save_id_binary(const TripleStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "kge-ids v1 " << store.vocab.entity_count() << ' ' << store.vocab.relation_count() << ' '
      << store.train.size() << ' ' << store.valid.size() << ' ' << store.test.size() << '\n';
  auto write_split = [&](const std::vector<Triple>& ts) {
    for (const Triple& t : ts) {
      detail::write_u32le(out, t.head);
      detail::write_u32le(out, t.relation);
      detail::write_u32le(out, t.tail);
    }
  };
  write_split(store.train);
  write_split(store.valid);
  write_split(store.test);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline void save_tsv_labels(const TripleStore& store, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write_split = [&](const std::vector<Triple>& ts, const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    for (const Triple& t : ts) {
      out << store.vocab.entity_name(t.head) << '\t' << store.vocab.relation_name(t.relation)
          << '\t' << store.vocab.entity_name(t.tail) << '\n';
    }
  };
  write_split(store.train, "train.tsv");
  if (!store.valid.empty()) write_split(store.valid, "valid.tsv");
  if (!store.test.empty()) write_split(store.test, "test.tsv");
}

}  // namespace kge
