#pragma once
// Filtered ranking evaluation: sampled-negative protocol (rank the true
// entity against n sampled corruptions that are not known triples) and
// exhaustive mode (rank against every entity whose substitution is not a
// known triple). Metrics are MRR and Hits@{1,3,10}; ties get the expected
// rank (half-count of equals).

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kge/anchor.hpp"
#include "kge/dataset.hpp"
#include "kge/rng.hpp"
#include "kge/scoring.hpp"

namespace kge {

enum class EvalMode { sampled, exhaustive };
enum class EvalSides { head, tail, both };

inline const char* to_string(EvalMode m) { return m == EvalMode::sampled ? "sampled" : "exhaustive"; }
inline EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "sampled") return EvalMode::sampled;
  if (s == "exhaustive") return EvalMode::exhaustive;
  throw std::runtime_error("unknown eval mode \"" + s + "\"");
}
inline const char* to_string(EvalSides s) {
  return s == EvalSides::head ? "head" : s == EvalSides::tail ? "tail" : "both";
}
inline EvalSides eval_sides_from_string(const std::string& s) {
  if (s == "head") return EvalSides::head;
  if (s == "tail") return EvalSides::tail;
  if (s == "both") return EvalSides::both;
  throw std::runtime_error("unknown eval sides \"" + s + "\"");
}

struct EvalConfig {
  size_t n_negatives = 1000;
  EvalMode mode = EvalMode::sampled;
  EvalSides sides = EvalSides::both;
  uint64_t seed = 0;
};

struct SideMetrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  size_t n = 0;
};

struct EvalReport {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  size_t n_evaluated = 0;
  SideMetrics head;
  SideMetrics tail;
  size_t shortfall_queries = 0;  // sampled queries with fewer candidates than requested
};

struct RankRecord {
  Triple triple;
  CorruptionSlot side = CorruptionSlot::head;
  double rank = 0.0;
};

// Benchmark-provided per-triple negative candidate lists. Binary format:
// "kge-cands v1 <n_triples> <n_negatives>\n" then per triple n u32 head-side
// candidates followed by n u32 tail-side candidates, little-endian, in split
// order.
struct CandidateLists {
  size_t n_negatives = 0;
  std::vector<EntityId> head_candidates;  // n_triples * n_negatives
  std::vector<EntityId> tail_candidates;

  size_t n_triples() const {
    return n_negatives == 0 ? 0 : head_candidates.size() / n_negatives;
  }
  std::span<const EntityId> of(size_t triple_index, CorruptionSlot side) const {
    const auto& v = side == CorruptionSlot::head ? head_candidates : tail_candidates;
    return {v.data() + triple_index * n_negatives, n_negatives};
  }
};

inline void save_candidate_lists(const CandidateLists& lists, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "kge-cands v1 " << lists.n_triples() << ' ' << lists.n_negatives << '\n';
  for (size_t i = 0; i < lists.n_triples(); ++i) {
    for (EntityId e : lists.of(i, CorruptionSlot::head)) detail::write_u32le(out, e);
    for (EntityId e : lists.of(i, CorruptionSlot::tail)) detail::write_u32le(out, e);
  }
}

inline CandidateLists load_candidate_lists(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version;
  size_t n_triples = 0, n_neg = 0;
  hs >> magic >> version >> n_triples >> n_neg;
  if (!hs || magic != "kge-cands" || version != "v1")
    throw std::runtime_error(path.string() + ": bad candidate-list header");
  CandidateLists lists;
  lists.n_negatives = n_neg;
  lists.head_candidates.resize(n_triples * n_neg);
  lists.tail_candidates.resize(n_triples * n_neg);
  std::vector<unsigned char> buf(n_neg * 4);
  for (size_t i = 0; i < n_triples; ++i) {
    for (auto* dst : {&lists.head_candidates, &lists.tail_candidates}) {
      in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
      if (static_cast<size_t>(in.gcount()) != buf.size())
        throw std::runtime_error(path.string() + ": truncated candidate lists");
      for (size_t j = 0; j < n_neg; ++j)
        (*dst)[i * n_neg + j] = detail::read_u32le(buf.data() + j * 4);
    }
  }
  return lists;
}

struct SampledNegatives {
  std::vector<EntityId> entities;
  bool shortfall = false;
};

// n distinct entities whose substitution into the triple is not a known
// triple. Deterministic per (seed, triple, side). When fewer than n valid
// candidates exist, all of them are returned and the shortfall recorded.
inline SampledNegatives sample_eval_negatives(const Triple& triple, CorruptionSlot side, size_t n,
                                              const FilterIndex& filter, size_t n_entities,
                                              uint64_t seed) {
  Rng rng(mix_seed(seed, fnv1a("eval-neg"), triple.head, triple.relation, triple.tail,
                   side == CorruptionSlot::head ? 0u : 1u));
  Triple probe = triple;
  EntityId& slot_ref = side == CorruptionSlot::head ? probe.head : probe.tail;

  SampledNegatives out;
  std::unordered_set<EntityId> seen;
  const size_t max_rejects = 16 * n + 256;
  size_t rejects = 0;
  while (out.entities.size() < n && rejects < max_rejects) {
    const EntityId e = static_cast<EntityId>(rng.uniform_below(n_entities));
    if (seen.count(e)) {
      ++rejects;
      continue;
    }
    slot_ref = e;
    if (filter.contains(probe)) {
      seen.insert(e);
      ++rejects;
      continue;
    }
    seen.insert(e);
    out.entities.push_back(e);
  }
  if (out.entities.size() == n) return out;

  // Slow path: enumerate the valid candidate set and draw from it directly.
  std::vector<EntityId> valid;
  for (size_t e = 0; e < n_entities; ++e) {
    slot_ref = static_cast<EntityId>(e);
    if (!filter.contains(probe)) valid.push_back(static_cast<EntityId>(e));
  }
  if (valid.size() <= n) {
    out.entities = std::move(valid);
    out.shortfall = out.entities.size() < n;
    return out;
  }
  out.entities.clear();
  for (size_t i = 0; i < n; ++i) {
    const size_t j = i + rng.uniform_below(valid.size() - i);
    std::swap(valid[i], valid[j]);
    out.entities.push_back(valid[i]);
  }
  return out;
}

// Expected rank under ties: 1 + #{score > positive} + #{score == positive}/2.
inline double rank(double positive_score, std::span<const double> candidate_scores) {
  size_t above = 0, equal = 0;
  for (double s : candidate_scores) {
    if (s > positive_score) ++above;
    else if (s == positive_score) ++equal;
  }
  return 1.0 + double(above) + double(equal) / 2.0;
}

namespace detail {

struct QueryScorer {
  const ModelParams& params;
  const AnchorVocab* vocab;
  int p;

  double operator()(const Triple& t) const {
    return vocab ? score_anchor(params, *vocab, t, p)
                 : score_vectors(params.scorer, resolve_direct(params, t), p);
  }
};

}  // namespace detail

inline EvalReport evaluate(const ModelParams& params, const TripleStore& store, Split split,
                           const EvalConfig& cfg, int p, const AnchorVocab* vocab = nullptr,
                           const CandidateLists* candidates = nullptr,
                           std::vector<RankRecord>* rank_dump = nullptr) {
  const std::vector<Triple>& triples = store.split(split);
  if (triples.empty()) throw std::runtime_error("evaluate: split is empty");
  const FilterIndex filter = build_filter_index(store);
  const size_t n_entities = store.vocab.entity_count();
  const detail::QueryScorer score{params, vocab, p};

  SideMetrics side_acc[2];
  size_t shortfall = 0;
  std::vector<double> cand_scores;
  std::vector<EntityId> cand_entities;

  const bool do_head = cfg.sides != EvalSides::tail;
  const bool do_tail = cfg.sides != EvalSides::head;

  for (size_t ti = 0; ti < triples.size(); ++ti) {
    const Triple& t = triples[ti];
    for (int side_i = 0; side_i < 2; ++side_i) {
      const CorruptionSlot side = side_i == 0 ? CorruptionSlot::head : CorruptionSlot::tail;
      if (side == CorruptionSlot::head && !do_head) continue;
      if (side == CorruptionSlot::tail && !do_tail) continue;

      cand_entities.clear();
      if (cfg.mode == EvalMode::exhaustive) {
        Triple probe = t;
        EntityId& slot_ref = side == CorruptionSlot::head ? probe.head : probe.tail;
        for (size_t e = 0; e < n_entities; ++e) {
          slot_ref = static_cast<EntityId>(e);
          if (!filter.contains(probe)) cand_entities.push_back(static_cast<EntityId>(e));
        }
      } else if (candidates != nullptr) {
        auto span = candidates->of(ti, side);
        cand_entities.assign(span.begin(), span.end());
      } else {
        SampledNegatives neg =
            sample_eval_negatives(t, side, cfg.n_negatives, filter, n_entities, cfg.seed);
        if (neg.shortfall) ++shortfall;
        cand_entities = std::move(neg.entities);
      }

      const double pos_score = score(t);
      cand_scores.clear();
      cand_scores.reserve(cand_entities.size());
      Triple probe = t;
      EntityId& slot_ref = side == CorruptionSlot::head ? probe.head : probe.tail;
      for (EntityId e : cand_entities) {
        slot_ref = e;
        cand_scores.push_back(score(probe));
      }

      const double r = rank(pos_score, cand_scores);
      SideMetrics& acc = side_acc[side_i];
      acc.mrr += 1.0 / r;
      acc.hits1 += r <= 1.0 ? 1.0 : 0.0;
      acc.hits3 += r <= 3.0 ? 1.0 : 0.0;
      acc.hits10 += r <= 10.0 ? 1.0 : 0.0;
      acc.n += 1;
      if (rank_dump) rank_dump->push_back(RankRecord{t, side, r});
    }
  }

  EvalReport report;
  report.shortfall_queries = shortfall;
  for (int i = 0; i < 2; ++i) {
    SideMetrics& acc = side_acc[i];
    report.mrr += acc.mrr;
    report.hits1 += acc.hits1;
    report.hits3 += acc.hits3;
    report.hits10 += acc.hits10;
    report.n_evaluated += acc.n;
    if (acc.n > 0) {
      const double inv = 1.0 / double(acc.n);
      acc.mrr *= inv;
      acc.hits1 *= inv;
      acc.hits3 *= inv;
      acc.hits10 *= inv;
    }
  }
  report.head = side_acc[0];
  report.tail = side_acc[1];
  if (report.n_evaluated > 0) {
    const double inv = 1.0 / double(report.n_evaluated);
    report.mrr *= inv;
    report.hits1 *= inv;
    report.hits3 *= inv;
    report.hits10 *= inv;
  }
  return report;
}

inline nlohmann::json to_json(const SideMetrics& m) {
  return {{"mrr", m.mrr}, {"hits1", m.hits1}, {"hits3", m.hits3}, {"hits10", m.hits10}, {"n", m.n}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"mrr", r.mrr},
          {"hits1", r.hits1},
          {"hits3", r.hits3},
          {"hits10", r.hits10},
          {"n_evaluated", r.n_evaluated},
          {"head", to_json(r.head)},
          {"tail", to_json(r.tail)},
          {"shortfall_queries", r.shortfall_queries}};
}

}  // namespace kge
