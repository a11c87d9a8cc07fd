#pragma once

// Two-level routing taxonomy for the algorithmic experience bank: 8 primary
// categories and 68 secondary tags. The table below is the single source of
// truth; the shipped data file mirrors it and a test keeps the two in sync.

#include <algorithm>
#include <cctype>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace stopcert {

struct TaxonomyPair {
  std::string primary;
  std::string secondary;

  bool operator==(const TaxonomyPair&) const = default;
  bool operator<(const TaxonomyPair& other) const {
    return std::tie(primary, secondary) < std::tie(other.primary, other.secondary);
  }
};

class Taxonomy {
 public:
  Taxonomy(std::vector<std::string> primaries,
           std::vector<TaxonomyPair> secondaries)
      : primaries_(std::move(primaries)), secondaries_(std::move(secondaries)) {
    validate();
  }

  const std::vector<std::string>& primaries() const { return primaries_; }
  const std::vector<TaxonomyPair>& secondaries() const { return secondaries_; }

  bool has_primary(const std::string& primary) const {
    return std::find(primaries_.begin(), primaries_.end(), primary) !=
           primaries_.end();
  }

  bool has_pair(const std::string& primary, const std::string& secondary) const {
    return std::any_of(secondaries_.begin(), secondaries_.end(),
                       [&](const TaxonomyPair& pair) {
                         return pair.primary == primary &&
                                pair.secondary == secondary;
                       });
  }

  // Case-insensitive lookup of a secondary tag; also matches when the listed
  // name carries a parenthesized alias, e.g. "Fenwick Tree (BIT)".
  std::optional<TaxonomyPair> find_secondary(const std::string& tag) const {
    const std::string needle = fold(tag);
    for (const TaxonomyPair& pair : secondaries_) {
      const std::string name = fold(pair.secondary);
      if (name == needle) return pair;
      const auto paren = name.find(" (");
      if (paren != std::string::npos && name.substr(0, paren) == needle) {
        return pair;
      }
    }
    return std::nullopt;
  }

  static const Taxonomy& builtin();

 private:
  void validate() const {
    if (primaries_.size() != 8) {
      throw std::invalid_argument("taxonomy must have exactly 8 primaries");
    }
    if (secondaries_.size() != 68) {
      throw std::invalid_argument("taxonomy must have exactly 68 secondaries");
    }
    for (const TaxonomyPair& pair : secondaries_) {
      if (!has_primary(pair.primary)) {
        throw std::invalid_argument("secondary tag under unknown primary: " +
                                    pair.secondary);
      }
    }
  }

  static std::string fold(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
  }

  std::vector<std::string> primaries_;
  std::vector<TaxonomyPair> secondaries_;
};

inline const Taxonomy& Taxonomy::builtin() {
  static const Taxonomy instance = [] {
    std::vector<std::string> primaries = {
        "Basic Algorithms", "Dynamic Programming", "Strings", "Mathematics",
        "Data Structures",  "Graph Theory",        "Computational Geometry",
        "Miscellaneous"};
    auto add = [](std::vector<TaxonomyPair>& out, const std::string& primary,
                  std::initializer_list<const char*> tags) {
      for (const char* tag : tags) out.push_back({primary, tag});
    };
    std::vector<TaxonomyPair> secondaries;
    add(secondaries, "Basic Algorithms",
        {"Simulation", "Enumeration", "Recursion", "Greedy",
         "Divide and Conquer", "Binary Search", "Sorting", "Doubling",
         "Construction", "Prefix Sum & Difference Array"});
    add(secondaries, "Dynamic Programming",
        {"Memoized Search", "Knapsack DP", "Interval DP", "DP on DAG",
         "Tree DP", "Bitmask DP", "Digit DP", "Counting DP",
         "Probabilistic DP", "DP Optimization"});
    add(secondaries, "Strings",
        {"String Matching (KMP/Boyer-Moore)", "String Hashing", "Trie",
         "Aho-Corasick Automaton", "Suffix Array (SA)",
         "Suffix Automaton (SAM)", "Manacher", "Palindromic Tree"});
    add(secondaries, "Mathematics",
        {"Number Theory", "Combinatorics", "Linear Algebra", "Game Theory",
         "Probability & Expectation", "Polynomials", "Fast Exponentiation",
         "Primes", "Divisors", "Congruence"});
    add(secondaries, "Data Structures",
        {"Stack", "Queue", "Linked List", "Hash Table",
         "Disjoint Set Union (DSU)", "Fenwick Tree (BIT)", "Segment Tree",
         "Sqrt Decomposition", "Balanced BST", "Tree of Trees",
         "Persistent Data Structures"});
    add(secondaries, "Graph Theory",
        {"Graph Traversal (DFS/BFS)", "Shortest Path", "Minimum Spanning Tree",
         "Topological Sort", "Bipartite Graph", "Network Flow",
         "Strongly Connected Components (SCC)", "Biconnected Components",
         "Lowest Common Ancestor (LCA)", "Tree Problems"});
    add(secondaries, "Computational Geometry",
        {"Vector Operations", "Convex Hull", "Half-Plane Intersection",
         "Rotating Calipers", "Sweep Line"});
    add(secondaries, "Miscellaneous",
        {"Two Pointers", "Discretization", "Randomization",
         "Search (Pruning/Heuristics/A*)"});
    return Taxonomy(std::move(primaries), std::move(secondaries));
  }();
  return instance;
}

}  // namespace stopcert
