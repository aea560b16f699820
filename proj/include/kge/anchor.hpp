#pragma once
// Fixed-size entity vocabulary: anchor selection, tokenization of entities
// by undirected BFS distance to their nearest anchors, and composition of
// entity vectors from anchor + distance embeddings.
//
// Each entity carries exactly m (anchor, hop-distance) tokens. Real tokens
// have distance < delta_max; missing or unreachable slots hold the padding
// token, which contributes only the sentinel distance row (row delta_max).
// In anchor mode the entity tables of ModelParams are per-anchor, so the
// parameter budget is independent of the entity count.
//
// Tokenization runs one bounded BFS per anchor: O(k * ball(delta_max)). Fine
// at the scales this library targets; it is not the place to plug in a
// web-scale landmark-labeling scheme.

#include <cstdint>
#include <fstream>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kge/dataset.hpp"
#include "kge/rng.hpp"
#include "kge/scoring.hpp"

namespace kge {

inline constexpr uint32_t kPaddingAnchor = std::numeric_limits<uint32_t>::max();

struct AnchorToken {
  uint32_t anchor_index = kPaddingAnchor;  // position in the anchor list
  uint8_t distance = 0;
};

enum class AnchorStrategy { top_degree, uniform_random };

inline const char* to_string(AnchorStrategy s) {
  return s == AnchorStrategy::top_degree ? "top-degree" : "uniform-random";
}

inline AnchorStrategy anchor_strategy_from_string(const std::string& name) {
  if (name == "top-degree") return AnchorStrategy::top_degree;
  if (name == "uniform-random") return AnchorStrategy::uniform_random;
  throw std::runtime_error("unknown anchor strategy \"" + name + "\"");
}

struct AnchorVocab {
  std::vector<EntityId> anchors;
  size_t m = 20;
  size_t delta_max = 10;
  AnchorStrategy strategy = AnchorStrategy::top_degree;
  uint64_t seed = 0;
  size_t n_entities = 0;
  std::vector<AnchorToken> tokens;  // n_entities * m, row-major

  size_t k() const { return anchors.size(); }
  std::span<const AnchorToken> entity_tokens(EntityId e) const {
    return {tokens.data() + size_t(e) * m, m};
  }
};

namespace detail {

// Undirected adjacency over the train split (CSR).
struct UndirectedGraph {
  std::vector<size_t> offsets;
  std::vector<EntityId> neighbors;

  explicit UndirectedGraph(const TripleStore& store) {
    const size_t n = store.vocab.entity_count();
    std::vector<size_t> degree(n, 0);
    for (const Triple& t : store.train) {
      degree[t.head]++;
      degree[t.tail]++;
    }
    offsets.assign(n + 1, 0);
    for (size_t i = 0; i < n; ++i) offsets[i + 1] = offsets[i] + degree[i];
    neighbors.resize(offsets[n]);
    std::vector<size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const Triple& t : store.train) {
      neighbors[cursor[t.head]++] = t.tail;
      neighbors[cursor[t.tail]++] = t.head;
    }
  }

  std::span<const EntityId> neighbors_of(EntityId e) const {
    return {neighbors.data() + offsets[e], offsets[e + 1] - offsets[e]};
  }
};

}  // namespace detail

// Anchor selection. top-degree picks the k entities of highest undirected
// train-graph degree (ties by ascending entity id); uniform-random picks k
// distinct entities deterministically under the seed.
inline std::vector<EntityId> select_anchors(const TripleStore& store, size_t k,
                                            AnchorStrategy strategy, uint64_t seed) {
  const size_t n = store.vocab.entity_count();
  if (k > n)
    throw std::runtime_error("anchor count " + std::to_string(k) +
                             " exceeds entity count " + std::to_string(n));
  std::vector<EntityId> ids(n);
  for (size_t i = 0; i < n; ++i) ids[i] = static_cast<EntityId>(i);

  if (strategy == AnchorStrategy::top_degree) {
    std::vector<size_t> degree(n, 0);
    for (const Triple& t : store.train) {
      degree[t.head]++;
      degree[t.tail]++;
    }
    std::stable_sort(ids.begin(), ids.end(), [&](EntityId a, EntityId b) {
      return degree[a] != degree[b] ? degree[a] > degree[b] : a < b;
    });
  } else {
    Rng rng = substream(seed, "anchors");
    for (size_t i = 0; i < k && i + 1 < n; ++i) {
      const size_t j = i + rng.uniform_below(n - i);
      std::swap(ids[i], ids[j]);
    }
  }
  ids.resize(k);
  return ids;
}

// Token lists via one delta_max-bounded BFS per anchor. Each entity keeps its
// m nearest anchors, ties broken by ascending anchor entity id.
inline AnchorVocab tokenize_entities(const TripleStore& store, std::vector<EntityId> anchors,
                                     size_t m, size_t delta_max) {
  if (anchors.empty()) throw std::runtime_error("tokenize_entities: no anchors");
  if (delta_max == 0 || delta_max > 255)
    throw std::runtime_error("tokenize_entities: delta_max must be in [1, 255]");
  const size_t n = store.vocab.entity_count();
  const detail::UndirectedGraph graph(store);

  // anchor order by entity id, so equal-distance candidates arrive id-sorted
  std::vector<uint32_t> order(anchors.size());
  for (uint32_t i = 0; i < anchors.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](uint32_t a, uint32_t b) { return anchors[a] < anchors[b]; });

  struct Candidate {
    uint8_t distance;
    uint32_t anchor_id;  // entity id, for the tie rule
    uint32_t anchor_index;
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.anchor_id < b.anchor_id;
  };
  // per-entity max-heap of the m best candidates seen so far
  std::vector<std::vector<Candidate>> best(n);

  auto offer = [&](EntityId e, const Candidate& c) {
    auto& heap = best[e];
    if (heap.size() < m) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), better);
    } else if (better(c, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), better);
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end(), better);
    }
  };

  std::vector<int32_t> dist(n, -1);
  std::vector<EntityId> frontier, next, touched;
  for (uint32_t idx : order) {
    const EntityId a = anchors[idx];
    frontier.assign(1, a);
    touched.assign(1, a);
    dist[a] = 0;
    offer(a, Candidate{0, a, idx});
    for (uint8_t d = 1; d < delta_max && !frontier.empty(); ++d) {
      next.clear();
      for (EntityId u : frontier) {
        for (EntityId v : graph.neighbors_of(u)) {
          if (dist[v] >= 0) continue;
          dist[v] = d;
          touched.push_back(v);
          next.push_back(v);
          offer(v, Candidate{d, a, idx});
        }
      }
      frontier.swap(next);
    }
    for (EntityId u : touched) dist[u] = -1;
  }

  AnchorVocab vocab;
  vocab.anchors = std::move(anchors);
  vocab.m = m;
  vocab.delta_max = delta_max;
  vocab.n_entities = n;
  vocab.tokens.assign(n * m, AnchorToken{kPaddingAnchor, static_cast<uint8_t>(delta_max)});
  for (size_t e = 0; e < n; ++e) {
    auto& heap = best[e];
    std::sort(heap.begin(), heap.end(), better);
    for (size_t i = 0; i < heap.size(); ++i)
      vocab.tokens[e * m + i] = AnchorToken{heap[i].anchor_index, heap[i].distance};
  }
  return vocab;
}

inline AnchorVocab build_anchor_vocab(const TripleStore& store, size_t k, size_t m,
                                      size_t delta_max, AnchorStrategy strategy, uint64_t seed) {
  AnchorVocab vocab = tokenize_entities(store, select_anchors(store, k, strategy, seed), m, delta_max);
  vocab.strategy = strategy;
  vocab.seed = seed;
  return vocab;
}

// Mean over the m tokens of anchor_row + distance_row; the padding token
// contributes only the sentinel distance row.
inline void compose_entity_vector(std::span<const AnchorToken> tokens, const Table& anchor_table,
                                  const Table& dist_table, std::span<double> out) {
  if (anchor_table.cols != dist_table.cols || out.size() != anchor_table.cols)
    throw std::runtime_error("compose_entity_vector: dimension mismatch");
  const size_t d = out.size();
  for (size_t j = 0; j < d; ++j) out[j] = 0.0;
  const size_t pad_row = dist_table.rows - 1;
  for (const AnchorToken& tok : tokens) {
    const size_t dist_row = std::min<size_t>(tok.distance, pad_row);
    const auto dr = dist_table.row(dist_row);
    if (tok.anchor_index != kPaddingAnchor) {
      const auto ar = anchor_table.row(tok.anchor_index);
      for (size_t j = 0; j < d; ++j) out[j] += ar[j] + dr[j];
    } else {
      for (size_t j = 0; j < d; ++j) out[j] += dr[j];
    }
  }
  const double inv = 1.0 / double(tokens.size());
  for (size_t j = 0; j < d; ++j) out[j] *= inv;
}

inline std::vector<double> compose_entity_vector(std::span<const AnchorToken> tokens,
                                                 const Table& anchor_table,
                                                 const Table& dist_table) {
  std::vector<double> out(anchor_table.cols);
  compose_entity_vector(tokens, anchor_table, dist_table, out);
  return out;
}

// Scatter d(loss)/d(entity vector) through the mean composition onto the
// anchor and distance tables.
inline void scatter_entity_grad(std::span<const AnchorToken> tokens, TableId anchor_table,
                                std::span<const double> grad, SparseGrad& out,
                                size_t pad_row) {
  const size_t d = grad.size();
  const double inv = 1.0 / double(tokens.size());
  for (const AnchorToken& tok : tokens) {
    const size_t dist_row = std::min<size_t>(tok.distance, pad_row);
    auto& gd = out.at(TableId::dist_embed, static_cast<uint32_t>(dist_row), d);
    for (size_t j = 0; j < d; ++j) gd[j] += inv * grad[j];
    if (tok.anchor_index != kPaddingAnchor) {
      auto& ga = out.at(anchor_table, tok.anchor_index, d);
      for (size_t j = 0; j < d; ++j) ga[j] += inv * grad[j];
    }
  }
}

// Composed main/aux vectors for one entity under anchor-mode parameters.
struct ComposedEntity {
  std::vector<double> main;
  std::vector<double> aux;
};

inline ComposedEntity resolve_anchor_entity(const ModelParams& params, const AnchorVocab& vocab,
                                            EntityId e) {
  if (!params.anchor_mode) throw std::runtime_error("resolve_anchor_entity: not anchor-mode params");
  if (e >= vocab.n_entities)
    throw std::runtime_error("entity id out of range: " + std::to_string(e));
  ComposedEntity out;
  const auto toks = vocab.entity_tokens(e);
  out.main = compose_entity_vector(toks, params.table(TableId::entity_main),
                                   params.table(TableId::dist_embed));
  if (scorer_uses_entity_aux(params.scorer))
    out.aux = compose_entity_vector(toks, params.table(TableId::entity_aux),
                                    params.table(TableId::dist_embed));
  return out;
}

inline double score_anchor(const ModelParams& params, const AnchorVocab& vocab, const Triple& t,
                           int p) {
  if (t.relation >= params.n_relations)
    throw std::runtime_error("relation id out of range: " + std::to_string(t.relation));
  const ComposedEntity h = resolve_anchor_entity(params, vocab, t.head);
  const ComposedEntity tl = resolve_anchor_entity(params, vocab, t.tail);
  TripleVectors v;
  v.h = h.main;
  v.t = tl.main;
  if (scorer_uses_entity_aux(params.scorer)) {
    v.h_aux = h.aux;
    v.t_aux = tl.aux;
  }
  v.r = params.table(TableId::rel_main).row(t.relation);
  if (scorer_uses_rel_aux(params.scorer)) {
    v.r_head = params.table(TableId::rel_head_aux).row(t.relation);
    v.r_tail = params.table(TableId::rel_tail_aux).row(t.relation);
  }
  return score_vectors(params.scorer, v, p);
}

inline std::vector<double> resolve_and_score(const ModelParams& params, const AnchorVocab& vocab,
                                             std::span<const Triple> batch, int p) {
  std::vector<double> out(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) out[i] = score_anchor(params, vocab, batch[i], p);
  return out;
}

// Analytic score gradient in anchor mode: entity-vector gradients are pushed
// through the composition onto anchor and distance rows.
inline SparseGrad grad_score(const ModelParams& params, const AnchorVocab& vocab,
                             const Triple& triple, int p) {
  detail::check_norm_order(p);
  const size_t d = params.dim;
  const Scorer s = params.scorer;
  const ComposedEntity hc = resolve_anchor_entity(params, vocab, triple.head);
  const ComposedEntity tc = resolve_anchor_entity(params, vocab, triple.tail);
  const Table& rel_main = params.table(TableId::rel_main);
  if (triple.relation >= params.n_relations)
    throw std::runtime_error("relation id out of range: " + std::to_string(triple.relation));
  const auto r = rel_main.row(triple.relation);
  std::span<const double> r_head, r_tail;
  if (scorer_uses_rel_aux(s)) {
    r_head = params.table(TableId::rel_head_aux).row(triple.relation);
    r_tail = params.table(TableId::rel_tail_aux).row(triple.relation);
  }

  std::vector<double> delta(d);
  for (size_t j = 0; j < d; ++j) {
    double rh, rt, rr;
    switch (s) {
      case Scorer::trans:
        rh = hc.main[j] * (tc.aux[j] + 1.0);
        rt = tc.main[j] * (hc.aux[j] + 1.0);
        rr = (r_head[j] * hc.main[j] + r[j]) + r_tail[j] * tc.main[j];
        break;
      case Scorer::transe:
        rh = hc.main[j];
        rt = tc.main[j];
        rr = r[j];
        break;
      case Scorer::interht:
        rh = hc.main[j] * (tc.aux[j] + 1.0);
        rt = tc.main[j] * (hc.aux[j] + 1.0);
        rr = r[j];
        break;
      default:
        rh = hc.main[j] * r_head[j];
        rt = tc.main[j] * r_tail[j];
        rr = r[j];
        break;
    }
    delta[j] = (rh - rt) + rr;
  }
  detail::delta_sensitivity(delta, p);
  const std::vector<double>& u = delta;

  std::vector<double> gh(d, 0.0), gt(d, 0.0), gha(d, 0.0), gta(d, 0.0);
  SparseGrad g;
  g.at(TableId::rel_main, triple.relation, d);
  if (scorer_uses_rel_aux(s)) {
    g.at(TableId::rel_head_aux, triple.relation, d);
    g.at(TableId::rel_tail_aux, triple.relation, d);
  }
  {
    auto& gr = g.at(TableId::rel_main, triple.relation, d);
    switch (s) {
      case Scorer::trans:
        for (size_t j = 0; j < d; ++j) {
          gh[j] = u[j] * ((tc.aux[j] + 1.0) + r_head[j]);
          gt[j] = u[j] * (r_tail[j] - (hc.aux[j] + 1.0));
          gha[j] = -u[j] * tc.main[j];
          gta[j] = u[j] * hc.main[j];
          gr[j] += u[j];
        }
        break;
      case Scorer::transe:
        for (size_t j = 0; j < d; ++j) {
          gh[j] = u[j];
          gt[j] = -u[j];
          gr[j] += u[j];
        }
        break;
      case Scorer::interht:
        for (size_t j = 0; j < d; ++j) {
          gh[j] = u[j] * (tc.aux[j] + 1.0);
          gt[j] = -u[j] * (hc.aux[j] + 1.0);
          gha[j] = -u[j] * tc.main[j];
          gta[j] = u[j] * hc.main[j];
          gr[j] += u[j];
        }
        break;
      default:
        for (size_t j = 0; j < d; ++j) {
          gh[j] = u[j] * r_head[j];
          gt[j] = -u[j] * r_tail[j];
          gr[j] += u[j];
        }
        break;
    }
  }
  if (scorer_uses_rel_aux(s)) {
    auto& grh = g.at(TableId::rel_head_aux, triple.relation, d);
    auto& grt = g.at(TableId::rel_tail_aux, triple.relation, d);
    const double sign_t = s == Scorer::trans ? 1.0 : -1.0;
    for (size_t j = 0; j < d; ++j) {
      grh[j] += u[j] * hc.main[j];
      grt[j] += sign_t * u[j] * tc.main[j];
    }
  }

  const size_t pad_row = params.n_distance_rows - 1;
  scatter_entity_grad(vocab.entity_tokens(triple.head), TableId::entity_main, gh, g, pad_row);
  scatter_entity_grad(vocab.entity_tokens(triple.tail), TableId::entity_main, gt, g, pad_row);
  if (scorer_uses_entity_aux(s)) {
    scatter_entity_grad(vocab.entity_tokens(triple.head), TableId::entity_aux, gha, g, pad_row);
    scatter_entity_grad(vocab.entity_tokens(triple.tail), TableId::entity_aux, gta, g, pad_row);
  }
  return g;
}

inline void save_anchor_vocab(const AnchorVocab& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  nlohmann::json header = {
      {"format", "kge-anchors"}, {"version", 1},
      {"k", vocab.k()},          {"m", vocab.m},
      {"delta_max", vocab.delta_max}, {"strategy", to_string(vocab.strategy)},
      {"seed", vocab.seed},      {"n_entities", vocab.n_entities},
  };
  out << header.dump() << '\n';
  for (EntityId a : vocab.anchors) detail::write_u32le(out, a);
  for (const AnchorToken& t : vocab.tokens) {
    detail::write_u32le(out, t.anchor_index);
    out.put(static_cast<char>(t.distance));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline AnchorVocab load_anchor_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing anchor header");
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "kge-anchors")
    throw std::runtime_error(path.string() + ": not an anchor-vocab file");
  AnchorVocab vocab;
  const size_t k = header.at("k").get<size_t>();
  vocab.m = header.at("m").get<size_t>();
  vocab.delta_max = header.at("delta_max").get<size_t>();
  vocab.strategy = anchor_strategy_from_string(header.at("strategy").get<std::string>());
  vocab.seed = header.at("seed").get<uint64_t>();
  vocab.n_entities = header.at("n_entities").get<size_t>();

  std::vector<unsigned char> buf(k * 4 + vocab.n_entities * vocab.m * 5);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  if (static_cast<size_t>(in.gcount()) != buf.size())
    throw std::runtime_error(path.string() + ": truncated anchor-vocab payload");
  const unsigned char* p = buf.data();
  vocab.anchors.resize(k);
  for (size_t i = 0; i < k; ++i, p += 4) vocab.anchors[i] = detail::read_u32le(p);
  vocab.tokens.resize(vocab.n_entities * vocab.m);
  for (auto& t : vocab.tokens) {
    t.anchor_index = detail::read_u32le(p);
    t.distance = p[4];
    p += 5;
  }
  return vocab;
}

}  // namespace kge
