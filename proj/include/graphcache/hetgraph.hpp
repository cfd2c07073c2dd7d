#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphcache/corpus.hpp"
#include "graphcache/topics.hpp"

namespace graphcache {

enum class PropertyKind { Topic, TypePair };

// A property cache node: a contextual topic or an entity-type pair.
struct PropertyId {
  PropertyKind kind = PropertyKind::Topic;
  int topic = -1;       // valid when kind == Topic
  std::string key;      // valid when kind == TypePair

  std::string label() const {
    return kind == PropertyKind::Topic ? "topic:" + std::to_string(topic)
                                       : "types:" + key;
  }
  bool operator==(const PropertyId& o) const = default;
};

// Bipartite sentence <-> property-cache adjacency. Immutable after build;
// internal property indices are dense and deterministic (topics by ascending
// id, then type pairs lexicographic).
struct HeteroGraph {
  std::size_t n_sentences = 0;
  int P = 0;
  bool typed = false;
  std::vector<PropertyId> properties;
  std::vector<std::vector<int>> sent_to_props;  // topic props in assignment
                                                // order, then the type pair
  std::vector<std::vector<int>> prop_to_sents;  // sorted ascending
  std::size_t n_edges = 0;
  std::unordered_map<int, int> topic_to_prop;
  std::unordered_map<std::string, int> type_to_prop;

  std::size_t n_props() const { return properties.size(); }

  std::size_t degree(int p) const {
    return prop_to_sents[static_cast<std::size_t>(p)].size();
  }

  const std::vector<int>& neighbors_of_property(int p) const {
    if (p < 0 || static_cast<std::size_t>(p) >= properties.size())
      throw DataError("property index out of range: " + std::to_string(p));
    return prop_to_sents[static_cast<std::size_t>(p)];
  }

  const std::vector<int>& properties_of_sentence(int s) const {
    if (s < 0 || static_cast<std::size_t>(s) >= n_sentences)
      throw DataError("sentence id out of range: " + std::to_string(s));
    return sent_to_props[static_cast<std::size_t>(s)];
  }

  // -1 when the topic / type pair has no cache in this graph.
  int topic_prop(int topic) const {
    auto it = topic_to_prop.find(topic);
    return it == topic_to_prop.end() ? -1 : it->second;
  }
  int type_prop(const std::string& key) const {
    auto it = type_to_prop.find(key);
    return it == type_to_prop.end() ? -1 : it->second;
  }

  // The sentence's type-pair property, or -1 in an untyped graph.
  int type_prop_of_sentence(int s) const {
    if (!typed) return -1;
    return properties_of_sentence(s).back();
  }
};

// Connects each sentence to its assigned topics and, when the dataset is
// typed, its entity-type pair. An empty assignment (P = 0) builds a graph
// without topic caches.
inline HeteroGraph build_graph(const Dataset& ds,
                               const TopicAssignment& assignment,
                               bool include_types = true) {
  HeteroGraph g;
  g.n_sentences = ds.size();
  g.P = assignment.P;
  g.typed = include_types && ds.has_types;

  if (g.P > 0) {
    for (const auto& inst : ds.instances) {
      if (static_cast<std::size_t>(inst.id) >= assignment.topics.size())
        throw DataError("topic assignment missing sentence " +
                        std::to_string(inst.id));
      if (static_cast<int>(assignment.topics[static_cast<std::size_t>(inst.id)].size()) != g.P)
        throw InvariantError("assignment for sentence " +
                             std::to_string(inst.id) +
                             " does not have exactly P topics");
    }
  }

  // Topic caches for topics assigned to at least one sentence, ascending id.
  std::map<int, int> topic_index;
  if (g.P > 0) {
    for (const auto& topics : assignment.topics)
      for (int t : topics) topic_index.emplace(t, -1);
  }
  for (auto& [topic, idx] : topic_index) {
    idx = static_cast<int>(g.properties.size());
    g.properties.push_back(PropertyId{PropertyKind::Topic, topic, {}});
    g.topic_to_prop.emplace(topic, idx);
  }

  // Type-pair caches for pairs that occur, lexicographic by key.
  std::map<std::string, int> type_index;
  if (g.typed) {
    for (const auto& inst : ds.instances) type_index.emplace(*entity_type_key(inst), -1);
    for (auto& [key, idx] : type_index) {
      idx = static_cast<int>(g.properties.size());
      g.properties.push_back(PropertyId{PropertyKind::TypePair, -1, key});
      g.type_to_prop.emplace(key, idx);
    }
  }

  g.sent_to_props.resize(g.n_sentences);
  g.prop_to_sents.resize(g.properties.size());
  for (const auto& inst : ds.instances) {
    auto& props = g.sent_to_props[static_cast<std::size_t>(inst.id)];
    if (g.P > 0)
      for (int t : assignment.topics[static_cast<std::size_t>(inst.id)])
        props.push_back(topic_index.at(t));
    if (g.typed) props.push_back(type_index.at(*entity_type_key(inst)));
    for (int p : props)
      g.prop_to_sents[static_cast<std::size_t>(p)].push_back(inst.id);
    g.n_edges += props.size();
  }

  // Edge-count identity and symmetry hold by construction; check anyway.
  std::size_t expect = g.n_sentences *
                       (static_cast<std::size_t>(g.P) + (g.typed ? 1 : 0));
  std::size_t transposed = 0;
  for (const auto& sents : g.prop_to_sents) transposed += sents.size();
  if (g.n_edges != expect || transposed != g.n_edges)
    throw InvariantError("edge count mismatch after graph build");
  return g;
}

// Debug edge list, "sentence <TAB> kind:key" per line. Not a stable format.
inline void dump_edges(const HeteroGraph& g, std::ostream& out) {
  for (std::size_t s = 0; s < g.n_sentences; ++s)
    for (int p : g.sent_to_props[s])
      out << s << '\t' << g.properties[static_cast<std::size_t>(p)].label() << '\n';
}

}  // namespace graphcache
