#pragma once
// Embedding tables and the transition-based scoring functions.
//
// Every scorer is expressed through the same decomposition
//   score = -|| R_h - R_t + R_r ||_p,
// and all four share one accumulation order, delta_j = (R_h_j - R_t_j) + R_r_j,
// so the algebraic reductions (trans -> interht -> transe at zeroed
// auxiliaries) hold bit-exactly, not just approximately. Tests rely on that.
//
//   transe:   R_h = h              R_t = t              R_r = r
//   interht:  R_h = h.(t~+1)       R_t = t.(h~+1)       R_r = r
//   trans:    R_h = h.(t~+1)       R_t = t.(h~+1)       R_r = rb.h + r + rh.t
//   triplere: R_h = h.r_head       R_t = t.r_tail       R_r = r_mid
//
// (. is the elementwise product; +1 is the unit-vector augmentation.)

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kge/dataset.hpp"

namespace kge {

enum class Scorer { trans, transe, interht, triplere };

inline const char* to_string(Scorer s) {
  switch (s) {
    case Scorer::trans: return "trans";
    case Scorer::transe: return "transe";
    case Scorer::interht: return "interht";
    default: return "triplere";
  }
}

inline Scorer scorer_from_string(const std::string& name) {
  if (name == "trans") return Scorer::trans;
  if (name == "transe") return Scorer::transe;
  if (name == "interht") return Scorer::interht;
  if (name == "triplere") return Scorer::triplere;
  throw std::runtime_error("unknown scorer \"" + name + "\"");
}

// Table roles. rel_main is the additive relation vector (r, or r^m for
// triplere); rel_head_aux multiplies the head side (r-bar, or r^h); rel_tail_aux
// multiplies the tail side (r-hat, or r^t). dist_embed exists in anchor mode.
enum class TableId : uint8_t {
  entity_main = 0,
  entity_aux = 1,
  rel_main = 2,
  rel_head_aux = 3,
  rel_tail_aux = 4,
  dist_embed = 5,
};
inline constexpr size_t kTableCount = 6;

inline const char* to_string(TableId id) {
  switch (id) {
    case TableId::entity_main: return "entity_main";
    case TableId::entity_aux: return "entity_aux";
    case TableId::rel_main: return "rel_main";
    case TableId::rel_head_aux: return "rel_head_aux";
    case TableId::rel_tail_aux: return "rel_tail_aux";
    default: return "dist_embed";
  }
}

struct Table {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  void resize(size_t r, size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
  bool present() const { return rows > 0; }
  std::span<double> row(size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(size_t i) const { return {data.data() + i * cols, cols}; }
};

inline bool scorer_uses_entity_aux(Scorer s) {
  return s == Scorer::trans || s == Scorer::interht;
}
inline bool scorer_uses_rel_aux(Scorer s) {
  return s == Scorer::trans || s == Scorer::triplere;
}

struct ModelParams {
  Scorer scorer = Scorer::trans;
  size_t dim = 0;
  size_t n_entity_slots = 0;  // entity count, or anchor count in anchor mode
  size_t n_relations = 0;
  bool anchor_mode = false;
  size_t n_distance_rows = 0;  // delta_max + 1, anchor mode only

  Table tables[kTableCount];

  Table& table(TableId id) { return tables[size_t(id)]; }
  const Table& table(TableId id) const { return tables[size_t(id)]; }

  static ModelParams make(Scorer scorer, size_t n_entity_slots, size_t n_relations, size_t dim,
                          bool anchor_mode = false, size_t n_distance_rows = 0) {
    if (dim == 0) throw std::runtime_error("embedding dimension must be positive");
    ModelParams p;
    p.scorer = scorer;
    p.dim = dim;
    p.n_entity_slots = n_entity_slots;
    p.n_relations = n_relations;
    p.anchor_mode = anchor_mode;
    p.n_distance_rows = anchor_mode ? n_distance_rows : 0;
    p.table(TableId::entity_main).resize(n_entity_slots, dim);
    if (scorer_uses_entity_aux(scorer)) p.table(TableId::entity_aux).resize(n_entity_slots, dim);
    p.table(TableId::rel_main).resize(n_relations, dim);
    if (scorer_uses_rel_aux(scorer)) {
      p.table(TableId::rel_head_aux).resize(n_relations, dim);
      p.table(TableId::rel_tail_aux).resize(n_relations, dim);
    }
    if (anchor_mode) p.table(TableId::dist_embed).resize(n_distance_rows, dim);
    return p;
  }

  size_t parameter_count() const {
    size_t n = 0;
    for (const Table& t : tables) n += t.rows * t.cols;
    return n;
  }
};

using Vec = std::span<const double>;

namespace detail {

inline void check_dims(std::initializer_list<Vec> vs) {
  size_t d = vs.begin()->size();
  for (const Vec& v : vs) {
    if (v.size() != d) throw std::runtime_error("scoring: vector dimension mismatch");
    for (double x : v)
      if (!std::isfinite(x)) throw std::runtime_error("scoring: non-finite input");
  }
}

inline void check_norm_order(int p) {
  if (p != 1 && p != 2) throw std::runtime_error("norm order must be 1 or 2");
}

inline double finish_norm(double acc, int p) { return p == 1 ? -acc : -std::sqrt(acc); }

}  // namespace detail

// -|| h.(t~+1) - t.(h~+1) + (rb.h + r + rh.t) ||_p
inline double score_trans(Vec h, Vec h_aux, Vec t, Vec t_aux, Vec r_head, Vec r, Vec r_tail,
                          int p) {
  detail::check_dims({h, h_aux, t, t_aux, r_head, r, r_tail});
  detail::check_norm_order(p);
  double acc = 0.0;
  for (size_t j = 0; j < h.size(); ++j) {
    const double rh = h[j] * (t_aux[j] + 1.0);
    const double rt = t[j] * (h_aux[j] + 1.0);
    const double rr = (r_head[j] * h[j] + r[j]) + r_tail[j] * t[j];
    const double d = (rh - rt) + rr;
    acc += p == 1 ? std::fabs(d) : d * d;
  }
  return detail::finish_norm(acc, p);
}

// -|| h + r - t ||_p
inline double score_transe(Vec h, Vec r, Vec t, int p) {
  detail::check_dims({h, r, t});
  detail::check_norm_order(p);
  double acc = 0.0;
  for (size_t j = 0; j < h.size(); ++j) {
    const double d = (h[j] - t[j]) + r[j];
    acc += p == 1 ? std::fabs(d) : d * d;
  }
  return detail::finish_norm(acc, p);
}

// -|| h.(t~+1) - t.(h~+1) + r ||_p
inline double score_interht(Vec h, Vec h_aux, Vec t, Vec t_aux, Vec r, int p) {
  detail::check_dims({h, h_aux, t, t_aux, r});
  detail::check_norm_order(p);
  double acc = 0.0;
  for (size_t j = 0; j < h.size(); ++j) {
    const double rh = h[j] * (t_aux[j] + 1.0);
    const double rt = t[j] * (h_aux[j] + 1.0);
    const double d = (rh - rt) + r[j];
    acc += p == 1 ? std::fabs(d) : d * d;
  }
  return detail::finish_norm(acc, p);
}

// -|| h.r_head - t.r_tail + r_mid ||_p
inline double score_triplere(Vec h, Vec t, Vec r_head, Vec r_tail, Vec r_mid, int p) {
  detail::check_dims({h, t, r_head, r_tail, r_mid});
  detail::check_norm_order(p);
  double acc = 0.0;
  for (size_t j = 0; j < h.size(); ++j) {
    const double d = (h[j] * r_head[j] - t[j] * r_tail[j]) + r_mid[j];
    acc += p == 1 ? std::fabs(d) : d * d;
  }
  return detail::finish_norm(acc, p);
}

// Resolved vector views for one triple (direct mode: table rows).
struct TripleVectors {
  Vec h, h_aux, t, t_aux, r, r_head, r_tail;
};

inline double score_vectors(Scorer scorer, const TripleVectors& v, int p) {
  switch (scorer) {
    case Scorer::trans:
      return score_trans(v.h, v.h_aux, v.t, v.t_aux, v.r_head, v.r, v.r_tail, p);
    case Scorer::transe:
      return score_transe(v.h, v.r, v.t, p);
    case Scorer::interht:
      return score_interht(v.h, v.h_aux, v.t, v.t_aux, v.r, p);
    default:
      return score_triplere(v.h, v.t, v.r_head, v.r_tail, v.r, p);
  }
}

inline TripleVectors resolve_direct(const ModelParams& params, const Triple& t) {
  if (params.anchor_mode)
    throw std::runtime_error("direct resolution requested on anchor-mode parameters");
  if (t.head >= params.n_entity_slots || t.tail >= params.n_entity_slots)
    throw std::runtime_error("entity id out of range: " +
                             std::to_string(std::max(t.head, t.tail)));
  if (t.relation >= params.n_relations)
    throw std::runtime_error("relation id out of range: " + std::to_string(t.relation));
  TripleVectors v;
  v.h = params.table(TableId::entity_main).row(t.head);
  v.t = params.table(TableId::entity_main).row(t.tail);
  if (scorer_uses_entity_aux(params.scorer)) {
    v.h_aux = params.table(TableId::entity_aux).row(t.head);
    v.t_aux = params.table(TableId::entity_aux).row(t.tail);
  }
  v.r = params.table(TableId::rel_main).row(t.relation);
  if (scorer_uses_rel_aux(params.scorer)) {
    v.r_head = params.table(TableId::rel_head_aux).row(t.relation);
    v.r_tail = params.table(TableId::rel_tail_aux).row(t.relation);
  }
  return v;
}

// Batch scoring over table rows; batch order is preserved and each entry
// equals the corresponding per-vector call.
inline std::vector<double> resolve_and_score(const ModelParams& params,
                                             std::span<const Triple> batch, int p) {
  std::vector<double> out(batch.size());
  for (size_t i = 0; i < batch.size(); ++i)
    out[i] = score_vectors(params.scorer, resolve_direct(params, batch[i]), p);
  return out;
}

// Sparse per-row gradient accumulator keyed by (table, row).
struct RowGrad {
  TableId table;
  uint32_t row;
  std::vector<double> grad;
};

struct SparseGrad {
  std::vector<RowGrad> rows;

  std::vector<double>& at(TableId table, uint32_t row, size_t dim) {
    for (RowGrad& rg : rows)
      if (rg.table == table && rg.row == row) return rg.grad;
    rows.push_back(RowGrad{table, row, std::vector<double>(dim, 0.0)});
    return rows.back().grad;
  }

  const std::vector<double>* find(TableId table, uint32_t row) const {
    for (const RowGrad& rg : rows)
      if (rg.table == table && rg.row == row) return &rg.grad;
    return nullptr;
  }

  void scale(double c) {
    for (RowGrad& rg : rows)
      for (double& g : rg.grad) g *= c;
  }

  // Merge other into this with a coefficient.
  void axpy(double c, const SparseGrad& other, size_t dim) {
    for (const RowGrad& rg : other.rows) {
      std::vector<double>& dst = at(rg.table, rg.row, dim);
      for (size_t j = 0; j < dim; ++j) dst[j] += c * rg.grad[j];
    }
  }
};

namespace detail {

// d(score)/d(delta_j) = -sign(delta_j) for p=1 (sign(0)=0), -delta_j/|delta|_2
// for p=2 (zero vector maps to zero gradient).
inline void delta_sensitivity(std::vector<double>& delta, int p) {
  if (p == 1) {
    for (double& d : delta) d = d > 0.0 ? -1.0 : (d < 0.0 ? 1.0 : 0.0);
  } else {
    double norm = 0.0;
    for (double d : delta) norm += d * d;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      for (double& d : delta) d = 0.0;
    } else {
      for (double& d : delta) d = -d / norm;
    }
  }
}

}  // namespace detail

// Analytic gradient of the score with respect to every participating table
// row (direct mode). The p=1 subgradient uses sign(0)=0.
inline SparseGrad grad_score(const ModelParams& params, const Triple& triple, int p) {
  const TripleVectors v = resolve_direct(params, triple);
  detail::check_norm_order(p);
  const size_t d = params.dim;
  const Scorer s = params.scorer;

  std::vector<double> delta(d);
  for (size_t j = 0; j < d; ++j) {
    double rh, rt, rr;
    switch (s) {
      case Scorer::trans:
        rh = v.h[j] * (v.t_aux[j] + 1.0);
        rt = v.t[j] * (v.h_aux[j] + 1.0);
        rr = (v.r_head[j] * v.h[j] + v.r[j]) + v.r_tail[j] * v.t[j];
        break;
      case Scorer::transe:
        rh = v.h[j];
        rt = v.t[j];
        rr = v.r[j];
        break;
      case Scorer::interht:
        rh = v.h[j] * (v.t_aux[j] + 1.0);
        rt = v.t[j] * (v.h_aux[j] + 1.0);
        rr = v.r[j];
        break;
      default:
        rh = v.h[j] * v.r_head[j];
        rt = v.t[j] * v.r_tail[j];
        rr = v.r[j];
        break;
    }
    delta[j] = (rh - rt) + rr;
  }
  detail::delta_sensitivity(delta, p);  // delta now holds u = d(score)/d(delta)

  // Create all entries up front: at() may grow the row vector, so references
  // are only taken once the set of touched rows is complete.
  SparseGrad g;
  g.at(TableId::entity_main, triple.head, d);
  g.at(TableId::entity_main, triple.tail, d);
  g.at(TableId::rel_main, triple.relation, d);
  if (scorer_uses_entity_aux(s)) {
    g.at(TableId::entity_aux, triple.head, d);
    g.at(TableId::entity_aux, triple.tail, d);
  }
  if (scorer_uses_rel_aux(s)) {
    g.at(TableId::rel_head_aux, triple.relation, d);
    g.at(TableId::rel_tail_aux, triple.relation, d);
  }
  auto& gh = g.at(TableId::entity_main, triple.head, d);
  auto& gt = g.at(TableId::entity_main, triple.tail, d);
  auto& gr = g.at(TableId::rel_main, triple.relation, d);
  const std::vector<double>& u = delta;

  switch (s) {
    case Scorer::trans: {
      auto& gha = g.at(TableId::entity_aux, triple.head, d);
      auto& gta = g.at(TableId::entity_aux, triple.tail, d);
      auto& grh = g.at(TableId::rel_head_aux, triple.relation, d);
      auto& grt = g.at(TableId::rel_tail_aux, triple.relation, d);
      for (size_t j = 0; j < d; ++j) {
        gh[j] += u[j] * ((v.t_aux[j] + 1.0) + v.r_head[j]);
        gt[j] += u[j] * (v.r_tail[j] - (v.h_aux[j] + 1.0));
        gha[j] += -u[j] * v.t[j];
        gta[j] += u[j] * v.h[j];
        grh[j] += u[j] * v.h[j];
        gr[j] += u[j];
        grt[j] += u[j] * v.t[j];
      }
      break;
    }
    case Scorer::transe: {
      for (size_t j = 0; j < d; ++j) {
        gh[j] += u[j];
        gt[j] += -u[j];
        gr[j] += u[j];
      }
      break;
    }
    case Scorer::interht: {
      auto& gha = g.at(TableId::entity_aux, triple.head, d);
      auto& gta = g.at(TableId::entity_aux, triple.tail, d);
      for (size_t j = 0; j < d; ++j) {
        gh[j] += u[j] * (v.t_aux[j] + 1.0);
        gt[j] += -u[j] * (v.h_aux[j] + 1.0);
        gha[j] += -u[j] * v.t[j];
        gta[j] += u[j] * v.h[j];
        gr[j] += u[j];
      }
      break;
    }
    default: {  // triplere
      auto& grh = g.at(TableId::rel_head_aux, triple.relation, d);
      auto& grt = g.at(TableId::rel_tail_aux, triple.relation, d);
      for (size_t j = 0; j < d; ++j) {
        gh[j] += u[j] * v.r_head[j];
        gt[j] += -u[j] * v.r_tail[j];
        grh[j] += u[j] * v.h[j];
        grt[j] += -u[j] * v.t[j];
        gr[j] += u[j];
      }
      break;
    }
  }
  return g;
}

}  // namespace kge
