#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hiertax {

/// An 8-digit label code with an optional, opaque check digit.
///
/// Identity is the 8 digits only: two codes that differ just in their check
/// digit compare equal. The check digit is preserved and echoed, never
/// validated.
class LabelCode {
 public:
  LabelCode() = default;

  /// Accepts `DDDDDDDD-C` or a bare `DDDDDDDD`. Throws FormatError.
  static LabelCode parse(std::string_view text);
  static LabelCode from_value(std::uint32_t value,
                              std::optional<char> check = std::nullopt);

  std::uint32_t value() const noexcept { return value_; }
  std::optional<char> check_digit() const noexcept;
  std::string digits() const;
  /// `DDDDDDDD-C` when the check digit is known, the bare digits otherwise.
  std::string str() const;

  LabelCode with_check(std::optional<char> check) const noexcept;

  friend bool operator==(const LabelCode& a, const LabelCode& b) noexcept {
    return a.value_ == b.value_;
  }
  friend std::strong_ordering operator<=>(const LabelCode& a,
                                          const LabelCode& b) noexcept {
    return a.value_ <=> b.value_;
  }

 private:
  std::uint32_t value_ = 0;
  char check_ = 0;
};

std::ostream& operator<<(std::ostream& os, const LabelCode& code);

/// Digit-prefix parent: zero the last non-zero digit among positions 3-8.
/// Returns nullopt for a root (positions 3-8 all zero). The returned code
/// carries no check digit.
std::optional<LabelCode> derive_parent(LabelCode code);

struct TaxonomyNode {
  LabelCode code;
  std::map<std::string, std::string> descriptions;  // language tag -> text
  std::optional<LabelCode> parent;
  std::vector<LabelCode> children;  // strictly ascending
  int depth = 0;                    // root = 0

  bool is_leaf() const noexcept { return children.empty(); }
  bool is_root() const noexcept { return !parent.has_value(); }
  /// Throws FormatError when no description exists for `lang`.
  const std::string& description(const std::string& lang) const;
};

/// One input row for Taxonomy::build.
struct TaxonomyEntry {
  LabelCode code;
  std::string description;
  std::string lang;
  std::optional<LabelCode> parent;  // explicit parent wins over derivation
  std::size_t row = 0;              // source row for error messages
};

struct TaxonomyParseOptions {
  /// Language tag assigned to descriptions when the file has no `lang`
  /// column.
  std::string default_lang = "en";
};

/// Immutable label tree. Safe for concurrent reads.
class Taxonomy {
 public:
  Taxonomy() = default;

  /// Throws LoadError naming the offending row.
  static Taxonomy build(std::vector<TaxonomyEntry> entries);
  /// CSV with header `code,description[,parent][,lang]`.
  static Taxonomy parse(std::istream& in,
                        const TaxonomyParseOptions& options = {});
  static Taxonomy load(const std::string& path,
                       const TaxonomyParseOptions& options = {});

  std::size_t size() const noexcept { return nodes_.size(); }
  /// All nodes, ascending by code.
  std::span<const TaxonomyNode> nodes() const noexcept { return nodes_; }
  std::span<const LabelCode> roots() const noexcept { return roots_; }

  bool contains(LabelCode code) const noexcept;
  const TaxonomyNode* find(LabelCode code) const noexcept;
  /// Throws UnknownCodeError.
  const TaxonomyNode& node(LabelCode code) const;
  /// Dense position of `code` in nodes(); throws UnknownCodeError.
  std::size_t index_of(LabelCode code) const;

  /// The code as stored in the taxonomy file, with its check digit.
  LabelCode canonical(LabelCode code) const { return node(code).code; }

  /// Roots when `parent` is empty, the parent's children otherwise.
  std::span<const LabelCode> candidates(std::optional<LabelCode> parent) const;

  /// Root-to-code chain, inclusive; length is depth + 1.
  std::vector<LabelCode> ancestors_and_self(LabelCode code) const;
  bool is_ancestor_or_self(LabelCode ancestor, LabelCode code) const;
  /// Nodes sharing the parent of `code` (the other roots for a root).
  std::vector<LabelCode> siblings(LabelCode code) const;

  /// Language tags available on every node.
  std::vector<std::string> common_languages() const;

  friend bool operator==(const Taxonomy& a, const Taxonomy& b);

 private:
  std::vector<TaxonomyNode> nodes_;
  std::vector<LabelCode> roots_;
  std::unordered_map<std::uint32_t, std::size_t> index_;
};

struct TaxonomyStats {
  std::size_t n_classes = 0;
  std::size_t n_leaves = 0;
  std::size_t n_roots = 0;
  /// Number of levels on the longest root-to-leaf chain (a lone root is 1).
  std::size_t max_depth = 0;
  double mean_children = 0.0;
  double sd_children = 0.0;
  /// depth (root = 0) -> number of classes at that depth or shallower.
  std::map<int, std::size_t> classes_per_depth;
  /// child count -> number of nodes with that many children.
  std::map<std::size_t, std::size_t> children_histogram;
  /// words in description -> number of nodes.
  std::map<std::size_t, std::size_t> description_word_counts;
};

TaxonomyStats taxonomy_stats(const Taxonomy& tax,
                             const std::string& lang = std::string());

/// Long-format CSV: `section,key,value` rows for scalars and histograms.
void write_stats_csv(std::ostream& out, const TaxonomyStats& stats);

}  // namespace hiertax

template <>
struct std::hash<hiertax::LabelCode> {
  std::size_t operator()(const hiertax::LabelCode& c) const noexcept {
    return std::hash<std::uint32_t>{}(c.value());
  }
};
