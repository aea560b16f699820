#pragma once
// Deterministic synthetic knowledge-graph generator.
//
// Construction: entities are assigned types; each (head-type, tail-type)
// combination carries a fixed set of relations (a rule). Connected entity
// pairs are sampled, and every pair emits one triple per relation of its
// rule. Rules of size >= 2 produce pairs where the same entity pair holds
// several distinct relations. Held-out splits are drawn only from those
// multi-relation pairs, and each such pair always keeps at least one of its
// triples in train, so every held-out triple is recoverable from the rules
// plus the training graph.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "kge/dataset.hpp"
#include "kge/rng.hpp"

namespace kge {

struct GeneratorSpec {
  size_t entities = 0;
  size_t relations = 0;
  size_t pairs = 0;                     // 0 -> defaults to 3 * entities
  size_t relations_per_pair = 2;        // rule size for multi-relation pairs
  double multi_relation_fraction = 0.5; // min fraction of pairs with >= 2 relations
  size_t entity_types = 8;
  double holdout_fraction = 0.1;        // per held-out split, of multi-pattern triples
};

inline TripleStore generate_synthetic_kg(const GeneratorSpec& spec, uint64_t seed) {
  const size_t n = spec.entities;
  const size_t n_rel = spec.relations;
  const size_t n_pairs = spec.pairs == 0 ? 3 * n : spec.pairs;
  const size_t rpp = spec.relations_per_pair;
  const size_t n_types = std::min(spec.entity_types == 0 ? 1 : spec.entity_types, n);

  if (n < 2 || n_rel < 1) throw std::runtime_error("generator spec: need >= 2 entities and >= 1 relation");
  if (rpp > n_rel)
    throw std::runtime_error("generator spec infeasible: relations_per_pair " +
                             std::to_string(rpp) + " exceeds relation count " + std::to_string(n_rel));
  if (spec.multi_relation_fraction > 0.0 && rpp < 2)
    throw std::runtime_error("generator spec infeasible: multi-relation pairs need relations_per_pair >= 2");
  if (spec.multi_relation_fraction < 0.0 || spec.multi_relation_fraction > 1.0 ||
      spec.holdout_fraction < 0.0 || spec.holdout_fraction >= 0.5)
    throw std::runtime_error("generator spec: fractions out of range");
  if (n_pairs > n * (n - 1))
    throw std::runtime_error("generator spec infeasible: more pairs than distinct ordered entity pairs");

  Rng rng = substream(seed, "synthetic");

  std::vector<uint32_t> type_of(n);
  for (size_t i = 0; i < n; ++i) type_of[i] = static_cast<uint32_t>(rng.uniform_below(n_types));

  // Distinct ordered pairs (h != t).
  std::vector<std::pair<EntityId, EntityId>> pairs;
  pairs.reserve(n_pairs);
  std::unordered_set<uint64_t> seen;
  while (pairs.size() < n_pairs) {
    EntityId h = static_cast<EntityId>(rng.uniform_below(n));
    EntityId t = static_cast<EntityId>(rng.uniform_below(n));
    if (h == t) continue;
    if (seen.insert((uint64_t(h) << 32) | t).second) pairs.emplace_back(h, t);
  }

  // Mark type-pair rules as multi-relation, largest pair groups first, until
  // the marked groups cover at least the requested fraction of pairs.
  std::map<uint64_t, size_t> group_counts;
  for (auto& [h, t] : pairs) group_counts[uint64_t(type_of[h]) * n_types + type_of[t]]++;
  std::vector<std::pair<uint64_t, size_t>> groups(group_counts.begin(), group_counts.end());
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const size_t want_multi = static_cast<size_t>(
      std::ceil(spec.multi_relation_fraction * double(n_pairs)) + 0.5);
  std::unordered_set<uint64_t> multi_groups;
  size_t covered = 0;
  for (auto& [key, count] : groups) {
    if (covered >= want_multi) break;
    multi_groups.insert(key);
    covered += count;
  }

  // Relation set per rule, drawn in deterministic key order.
  std::map<uint64_t, std::vector<RelationId>> rules;
  std::vector<RelationId> scratch(n_rel);
  for (auto& [key, count] : group_counts) {
    const size_t size = multi_groups.count(key) ? rpp : 1;
    for (size_t i = 0; i < n_rel; ++i) scratch[i] = static_cast<RelationId>(i);
    std::vector<RelationId> rel_set(size);
    for (size_t i = 0; i < size; ++i) {
      const size_t j = i + rng.uniform_below(n_rel - i);
      std::swap(scratch[i], scratch[j]);
      rel_set[i] = scratch[i];
    }
    rules.emplace(key, std::move(rel_set));
  }

  // Emit triples pair-major; remember which triples may be withheld
  // (everything except each multi pair's first relation).
  std::vector<Triple> emitted;
  std::vector<size_t> eligible;
  size_t multi_triples = 0;
  for (auto& [h, t] : pairs) {
    const uint64_t key = uint64_t(type_of[h]) * n_types + type_of[t];
    const auto& rel_set = rules.at(key);
    for (size_t i = 0; i < rel_set.size(); ++i) {
      if (rel_set.size() >= 2) {
        ++multi_triples;
        if (i > 0) eligible.push_back(emitted.size());
      }
      emitted.push_back(Triple{h, rel_set[i], t});
    }
  }

  for (size_t i = eligible.size(); i > 1; --i)
    std::swap(eligible[i - 1], eligible[rng.uniform_below(i)]);
  size_t n_hold = static_cast<size_t>(spec.holdout_fraction * double(multi_triples));
  n_hold = std::min(n_hold, eligible.size() / 2);

  TripleStore store;
  store.vocab = Vocabulary::with_counts(n, n_rel);
  std::vector<uint8_t> where(emitted.size(), 0);
  for (size_t i = 0; i < n_hold; ++i) where[eligible[i]] = 1;
  for (size_t i = n_hold; i < 2 * n_hold; ++i) where[eligible[i]] = 2;
  for (size_t i = 0; i < emitted.size(); ++i) {
    (where[i] == 0 ? store.train : where[i] == 1 ? store.valid : store.test).push_back(emitted[i]);
  }
  return store;
}

}  // namespace kge
