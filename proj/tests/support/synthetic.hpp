#pragma once

// Synthetic taxonomies, records and feature blobs shared by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hiertax/encoding.hpp"
#include "hiertax/rng.hpp"
#include "hiertax/taxonomy.hpp"

namespace hiertax::testing {

inline const std::vector<std::string>& word_bank() {
  static const std::vector<std::string> words = {
      "alder",   "basalt",  "cobalt",  "dahlia",  "ember",   "fjord",   "garnet",  "hazel",
      "indigo",  "juniper", "kelp",    "lagoon",  "magnet",  "nectar",  "onyx",    "pumice",
      "quartz",  "raven",   "saffron", "tundra",  "umber",   "velvet",  "walnut",  "xenon",
      "yarrow",  "zephyr",  "anvil",   "birch",   "cinder",  "dune",    "estuary", "flint",
      "glacier", "harbor",  "ivory",   "jasper",  "kiln",    "lichen",  "marble",  "nickel",
      "orchid",  "pepper",  "quill",   "rust",    "sable",   "thistle", "umbra",   "vortex",
      "willow",  "yeast",   "zinc",    "amber",   "bronze",  "copper",  "delta",   "falcon",
      "gravel",  "heron",   "iris",    "jade",    "kestrel", "lotus",   "mango",   "nutmeg",
      "oak",     "pine",    "quince",  "reed",    "sage",    "teak",    "urchin",  "vine",
      "wren",    "yew",     "acorn",   "bramble", "cedar",   "daisy",   "elm",     "fern"};
  return words;
}

/// Distinct two-word description for the n-th node.
inline std::string node_words(std::size_t n) {
  const auto& w = word_bank();
  return w[n % w.size()] + " " + w[(n / w.size() + 7 * n + 3) % w.size()] + " " +
         std::to_string(n);
}

/// CPV-style digit tree: `branching[0]` roots (codes 10000000, 11000000, ...),
/// then `branching[k]` children per node at depth k (at most 9). Each
/// description appends the node's own words to its parent's.
inline Taxonomy make_tree(const std::vector<int>& branching) {
  std::vector<TaxonomyEntry> entries;
  std::size_t counter = 0;
  struct Item {
    std::uint32_t value;
    int depth;
    std::string text;
  };
  std::vector<Item> frontier;
  for (int r = 0; r < branching.at(0); ++r) {
    const std::uint32_t v = static_cast<std::uint32_t>(10 + r) * 1000000u;
    frontier.push_back({v, 0, node_words(counter++)});
  }
  static constexpr std::uint32_t kPlace[] = {100000u, 10000u, 1000u, 100u, 10u, 1u};
  while (!frontier.empty()) {
    std::vector<Item> next;
    for (const Item& it : frontier) {
      entries.push_back({LabelCode::from_value(it.value), it.text, "en", std::nullopt, entries.size() + 2});
      const std::size_t level = static_cast<std::size_t>(it.depth) + 1;
      if (level >= branching.size()) continue;
      for (int c = 1; c <= branching[level]; ++c) {
        next.push_back({it.value + static_cast<std::uint32_t>(c) * kPlace[level - 1], it.depth + 1,
                        it.text + " " + node_words(counter++)});
      }
    }
    frontier = std::move(next);
  }
  return Taxonomy::build(std::move(entries));
}

/// Random digit tree with about `target` nodes.
inline Taxonomy random_tree(CounterRng& rng, std::size_t target, int max_depth = 5) {
  std::vector<TaxonomyEntry> entries;
  std::size_t counter = 0;
  const int n_roots = 2 + static_cast<int>(rng.uniform_index(6));
  struct Item {
    std::uint32_t value;
    int depth;
  };
  std::vector<Item> stack;
  for (int r = 0; r < n_roots; ++r) stack.push_back({static_cast<std::uint32_t>(10 + r) * 1000000u, 0});
  static constexpr std::uint32_t kPlace[] = {100000u, 10000u, 1000u, 100u, 10u, 1u};
  std::size_t i = 0;
  while (i < stack.size()) {
    const Item it = stack[i++];
    entries.push_back({LabelCode::from_value(it.value), node_words(counter++), "en", std::nullopt,
                       entries.size() + 2});
    if (it.depth + 1 >= max_depth || stack.size() >= target) continue;
    const int kids = static_cast<int>(rng.uniform_index(5));
    for (int c = 1; c <= kids && stack.size() < target; ++c) {
      stack.push_back({it.value + static_cast<std::uint32_t>(c) * kPlace[it.depth], it.depth + 1});
    }
  }
  return Taxonomy::build(std::move(entries));
}

inline TenderRecord make_record(std::string id, std::string text, std::optional<LabelCode> cpv) {
  TenderRecord r;
  r.id = std::move(id);
  r.object_text = std::move(text);
  r.cpv = cpv;
  return r;
}

/// One record per ground truth drawn uniformly from the taxonomy (or its
/// leaves).
inline std::vector<TenderRecord> random_records(const Taxonomy& tax, CounterRng& rng,
                                                std::size_t n, bool leaves_only) {
  std::vector<LabelCode> pool;
  for (const TaxonomyNode& node : tax.nodes()) {
    if (!leaves_only || node.is_leaf()) pool.push_back(node.code);
  }
  std::vector<TenderRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const LabelCode c = pool[rng.uniform_index(pool.size())];
    out.push_back(make_record("r" + std::to_string(i), tax.node(c).description("en"), c));
  }
  return out;
}

/// Leaf blobs in R^(nodes): the mean puts weight 8, 4, 2 on the one-hot
/// directions of the root, middle node and leaf.
struct Blobs {
  Eigen::MatrixXd x;
  std::vector<LabelCode> labels;
};

inline Blobs gaussian_blobs(const Taxonomy& tax, std::size_t per_leaf, double noise,
                            std::uint64_t seed) {
  CounterRng rng(seed);
  const auto gauss = [&rng] {
    const double u1 = std::max(rng.uniform01(), 1e-300);
    const double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  };
  const auto dim = static_cast<Eigen::Index>(tax.size());
  std::vector<LabelCode> leaves;
  for (const TaxonomyNode& n : tax.nodes()) {
    if (n.is_leaf()) leaves.push_back(n.code);
  }
  Blobs b;
  b.x.resize(static_cast<Eigen::Index>(leaves.size() * per_leaf), dim);
  Eigen::Index row = 0;
  for (const LabelCode& leaf : leaves) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    double weight = 8.0;
    for (const LabelCode& a : tax.ancestors_and_self(leaf)) {
      mean[static_cast<Eigen::Index>(tax.index_of(a))] = weight;
      weight /= 2.0;
    }
    for (std::size_t k = 0; k < per_leaf; ++k, ++row) {
      for (Eigen::Index j = 0; j < dim; ++j) b.x(row, j) = mean[j] + noise * gauss();
      b.labels.push_back(leaf);
    }
  }
  return b;
}

/// 45 roots (10000000..54000000), 51000000 with ten children via explicit
/// parents, 51800000 with three children: the chain 51 -> 518 -> 5182 has
/// sibling counts (44, 9, 2).
inline Taxonomy sibling_chain_taxonomy() {
  std::vector<TaxonomyEntry> e;
  std::size_t row = 2;
  for (std::uint32_t r = 10; r < 55; ++r) {
    e.push_back({LabelCode::from_value(r * 1000000u), "root " + std::to_string(r), "en", std::nullopt, row++});
  }
  const LabelCode d51 = LabelCode::parse("51000000");
  for (std::uint32_t c = 1; c <= 9; ++c) {
    e.push_back({LabelCode::from_value(51000000u + c * 100000u), "child", "en", std::nullopt, row++});
  }
  e.push_back({LabelCode::parse("51010000"), "extra child", "en", d51, row++});
  for (std::uint32_t c = 1; c <= 3; ++c) {
    e.push_back({LabelCode::from_value(51800000u + c * 10000u), "grandchild", "en", std::nullopt, row++});
  }
  return Taxonomy::build(std::move(e));
}

}  // namespace hiertax::testing
