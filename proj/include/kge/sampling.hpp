#pragma once
// Negative-sample generation and the margin loss with uniform or
// self-adversarial weighting.
//
// Uniform mode is the literal form
//   L = -log sigmoid(gamma - d_pos) - (1/n) sum_i log sigmoid(d_neg_i - gamma),
// with distances d = -score. Self-adversarial mode replaces the 1/n weights
// by a softmax over the negatives' current scores scaled by the temperature;
// the weights are treated as constants (no gradient flows through them).

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kge/anchor.hpp"
#include "kge/dataset.hpp"
#include "kge/rng.hpp"
#include "kge/scoring.hpp"

namespace kge {

enum class CorruptionSlot : uint8_t { head, tail };
enum class LossWeighting { uniform, self_adversarial };

inline const char* to_string(LossWeighting w) {
  return w == LossWeighting::uniform ? "uniform" : "self-adversarial";
}
inline LossWeighting weighting_from_string(const std::string& name) {
  if (name == "uniform") return LossWeighting::uniform;
  if (name == "self-adversarial") return LossWeighting::self_adversarial;
  throw std::runtime_error("unknown weighting \"" + name + "\"");
}

struct LossConfig {
  double gamma = 6.0;
  size_t n_negatives = 128;
  LossWeighting weighting = LossWeighting::self_adversarial;
  double adversarial_temperature = 1.0;

  void validate() const {
    if (!(gamma > 0.0)) throw std::runtime_error("loss config: gamma must be positive");
    if (n_negatives < 1) throw std::runtime_error("loss config: n_negatives must be >= 1");
    if (!(adversarial_temperature > 0.0))
      throw std::runtime_error("loss config: adversarial temperature must be positive");
  }
};

struct NegativeBatch {
  Triple positive;
  CorruptionSlot slot = CorruptionSlot::head;
  std::vector<EntityId> entities;  // replacement entities, one per negative

  Triple triple(size_t i) const {
    Triple t = positive;
    (slot == CorruptionSlot::head ? t.head : t.tail) = entities[i];
    return t;
  }
  size_t size() const { return entities.size(); }
};

namespace detail {

// Corruption sampling shared by the public op and the training loop.
// Uniform with replacement; in filtered mode candidates whose substitution is
// a known triple are rejected and resampled. If rejection makes no progress
// the valid candidate set is enumerated once: empty -> error, otherwise the
// remaining draws come from that list.
inline void corrupt_into(const Triple& positive, size_t n, CorruptionSlot slot,
                         const FilterIndex* filter, size_t n_entities, Rng& rng,
                         std::vector<EntityId>& out) {
  out.clear();
  out.reserve(n);
  if (n_entities < 2) throw std::runtime_error("corrupt: need at least 2 entities");
  Triple probe = positive;
  EntityId& slot_ref = slot == CorruptionSlot::head ? probe.head : probe.tail;
  if (!filter) {
    for (size_t i = 0; i < n; ++i)
      out.push_back(static_cast<EntityId>(rng.uniform_below(n_entities)));
    return;
  }
  const size_t max_rejects = 64 * n + 256;
  size_t rejects = 0;
  while (out.size() < n && rejects < max_rejects) {
    const EntityId e = static_cast<EntityId>(rng.uniform_below(n_entities));
    slot_ref = e;
    if (filter->contains(probe)) {
      ++rejects;
      continue;
    }
    out.push_back(e);
  }
  if (out.size() == n) return;
  std::vector<EntityId> valid;
  for (size_t e = 0; e < n_entities; ++e) {
    slot_ref = static_cast<EntityId>(e);
    if (!filter->contains(probe)) valid.push_back(static_cast<EntityId>(e));
  }
  if (valid.empty())
    throw std::runtime_error("corrupt: no valid filtered candidate for slot replacement");
  while (out.size() < n)
    out.push_back(valid[rng.uniform_below(valid.size())]);
}

inline double stable_softplus(double x) {
  // log(1 + e^x) without overflow for large |x|
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Softmax of (temperature * scores); writes weights summing to 1.
inline void adversarial_weights(std::span<const double> scores, double temperature,
                                std::span<double> weights) {
  double m = -std::numeric_limits<double>::infinity();
  for (double s : scores) m = std::max(m, temperature * s);
  double z = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    weights[i] = std::exp(temperature * scores[i] - m);
    z += weights[i];
  }
  for (size_t i = 0; i < scores.size(); ++i) weights[i] /= z;
}

}  // namespace detail

inline NegativeBatch corrupt(const Triple& positive, size_t n, CorruptionSlot slot,
                             const FilterIndex* filter, size_t n_entities, uint64_t rng_seed) {
  NegativeBatch batch;
  batch.positive = positive;
  batch.slot = slot;
  Rng rng(rng_seed);
  detail::corrupt_into(positive, n, slot, filter, n_entities, rng, batch.entities);
  return batch;
}

// Negative weights under the configured mode. neg_scores are the model
// scores f(h', t') of the negatives (used only in self-adversarial mode).
inline std::vector<double> negative_weights(std::span<const double> neg_scores,
                                            const LossConfig& cfg) {
  std::vector<double> w(neg_scores.size());
  if (cfg.weighting == LossWeighting::uniform) {
    std::fill(w.begin(), w.end(), 1.0 / double(neg_scores.size()));
  } else {
    detail::adversarial_weights(neg_scores, cfg.adversarial_temperature, w);
  }
  return w;
}

inline double loss(double d_pos, std::span<const double> d_negs, const LossConfig& cfg,
                   std::span<const double> neg_scores_for_weighting) {
  cfg.validate();
  if (d_negs.size() != cfg.n_negatives)
    throw std::runtime_error("loss: expected " + std::to_string(cfg.n_negatives) +
                             " negative distances, got " + std::to_string(d_negs.size()));
  if (!std::isfinite(d_pos)) throw std::runtime_error("loss: non-finite positive distance");
  for (double d : d_negs)
    if (!std::isfinite(d)) throw std::runtime_error("loss: non-finite negative distance");
  const std::vector<double> w = negative_weights(neg_scores_for_weighting, cfg);
  double value = detail::stable_softplus(-(cfg.gamma - d_pos));
  for (size_t i = 0; i < d_negs.size(); ++i)
    value += w[i] * detail::stable_softplus(-(d_negs[i] - cfg.gamma));
  return value;
}

struct LossGradResult {
  double value = 0.0;
  SparseGrad grad;  // d(loss)/d(row) over every touched table row
};

// Chain-rule composition of the loss with the score gradients. Distances are
// d = -score; the positive term contributes sigmoid(d_pos - gamma) * d(d_pos),
// negative terms -w_i * sigmoid(gamma - d_neg_i) * d(d_neg_i), with the
// adversarial weights detached. Works for direct and anchor-mode parameters
// (pass the vocab in anchor mode).
inline LossGradResult loss_grad(const ModelParams& params, const Triple& positive,
                                const NegativeBatch& negatives, const LossConfig& cfg, int p,
                                const AnchorVocab* vocab = nullptr) {
  cfg.validate();
  if (negatives.size() != cfg.n_negatives)
    throw std::runtime_error("loss_grad: negative batch size mismatch");
  auto score_of = [&](const Triple& t) {
    return vocab ? score_anchor(params, *vocab, t, p)
                 : score_vectors(params.scorer, resolve_direct(params, t), p);
  };
  auto grad_of = [&](const Triple& t) {
    return vocab ? grad_score(params, *vocab, t, p) : grad_score(params, t, p);
  };

  const double s_pos = score_of(positive);
  const double d_pos = -s_pos;
  std::vector<double> neg_scores(negatives.size()), d_negs(negatives.size());
  for (size_t i = 0; i < negatives.size(); ++i) {
    neg_scores[i] = score_of(negatives.triple(i));
    d_negs[i] = -neg_scores[i];
  }

  LossGradResult out;
  out.value = loss(d_pos, d_negs, cfg, neg_scores);

  const std::vector<double> w = negative_weights(neg_scores, cfg);
  // d(loss)/d(score): positive -sigmoid(d_pos - gamma); negative i
  // +w_i * sigmoid(gamma - d_neg_i).
  out.grad.axpy(-detail::sigmoid(d_pos - cfg.gamma), grad_of(positive), params.dim);
  for (size_t i = 0; i < negatives.size(); ++i) {
    const double c = w[i] * detail::sigmoid(cfg.gamma - d_negs[i]);
    out.grad.axpy(c, grad_of(negatives.triple(i)), params.dim);
  }
  return out;
}

}  // namespace kge
