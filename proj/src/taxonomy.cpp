#include "hiertax/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "hiertax/csv.hpp"
#include "hiertax/error.hpp"

namespace hiertax {

namespace {

constexpr std::uint32_t kPow10[9] = {1,       10,       100,       1000,     10000,
                                     100000, 1000000, 10000000, 100000000};

std::string lowercase_trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  const auto last = s.find_last_not_of(" \t");
  s = first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::string row_prefix(std::size_t row) {
  return "row " + std::to_string(row) + ": ";
}

}  // namespace

LabelCode LabelCode::parse(std::string_view text) {
  if (text.size() != 8 && text.size() != 10) {
    throw FormatError("malformed label code '" + std::string(text) + "'");
  }
  std::uint32_t value = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') {
      throw FormatError("malformed label code '" + std::string(text) + "'");
    }
    value = value * 10 + static_cast<std::uint32_t>(c - '0');
  }
  std::optional<char> check;
  if (text.size() == 10) {
    if (text[8] != '-' || text[9] < '0' || text[9] > '9') {
      throw FormatError("malformed label code '" + std::string(text) + "'");
    }
    check = text[9];
  }
  return from_value(value, check);
}

LabelCode LabelCode::from_value(std::uint32_t value, std::optional<char> check) {
  if (value >= kPow10[8] || value < kPow10[6]) {
    throw FormatError("label code out of range: " + std::to_string(value));
  }
  LabelCode code;
  code.value_ = value;
  code.check_ = check.value_or(0);
  return code;
}

std::optional<char> LabelCode::check_digit() const noexcept {
  if (check_ == 0) return std::nullopt;
  return check_;
}

std::string LabelCode::digits() const {
  std::ostringstream os;
  os << std::setw(8) << std::setfill('0') << value_;
  return os.str();
}

std::string LabelCode::str() const {
  std::string s = digits();
  if (check_ != 0) {
    s.push_back('-');
    s.push_back(check_);
  }
  return s;
}

LabelCode LabelCode::with_check(std::optional<char> check) const noexcept {
  LabelCode code = *this;
  code.check_ = check.value_or(0);
  return code;
}

std::ostream& operator<<(std::ostream& os, const LabelCode& code) {
  return os << code.str();
}

std::optional<LabelCode> derive_parent(LabelCode code) {
  // Positions 3..8 correspond to powers 10^5 .. 10^0.
  const std::uint32_t v = code.value();
  for (int power = 0; power <= 5; ++power) {
    const std::uint32_t digit = (v / kPow10[power]) % 10;
    if (digit != 0) return LabelCode::from_value(v - digit * kPow10[power]);
  }
  return std::nullopt;
}

const std::string& TaxonomyNode::description(const std::string& lang) const {
  const auto it = descriptions.find(lang);
  if (it == descriptions.end()) {
    throw FormatError("label " + code.str() + " has no description for language '" +
                      lang + "'");
  }
  return it->second;
}

Taxonomy Taxonomy::build(std::vector<TaxonomyEntry> entries) {
  struct Draft {
    TaxonomyNode node;
    std::optional<LabelCode> explicit_parent;
    std::size_t row = 0;
  };
  std::map<std::uint32_t, Draft> drafts;

  for (auto& e : entries) {
    if (e.description.empty()) {
      throw LoadError(row_prefix(e.row) + "empty description for " + e.code.str());
    }
    auto [it, inserted] = drafts.try_emplace(e.code.value());
    Draft& d = it->second;
    if (inserted) {
      d.node.code = e.code;
      d.explicit_parent = e.parent;
      d.row = e.row;
    } else {
      if (d.node.descriptions.contains(e.lang)) {
        throw LoadError(row_prefix(e.row) + "duplicate code " + e.code.str() +
                        " (first seen in row " + std::to_string(d.row) + ")");
      }
      if (e.code.check_digit() != d.node.code.check_digit()) {
        throw LoadError(row_prefix(e.row) + "conflicting check digit for " +
                        e.code.str());
      }
      if (e.parent && d.explicit_parent && *e.parent != *d.explicit_parent) {
        throw LoadError(row_prefix(e.row) + "conflicting parent for " + e.code.str());
      }
      if (e.parent) d.explicit_parent = e.parent;
    }
    d.node.descriptions.emplace(std::move(e.lang), std::move(e.description));
  }

  Taxonomy tax;
  tax.nodes_.reserve(drafts.size());
  std::vector<std::size_t> rows;
  rows.reserve(drafts.size());
  for (auto& [value, d] : drafts) {
    tax.index_.emplace(value, tax.nodes_.size());
    tax.nodes_.push_back(std::move(d.node));
    rows.push_back(d.row);
  }

  std::size_t i = 0;
  for (auto& [value, d] : drafts) {
    TaxonomyNode& node = tax.nodes_[i];
    const std::optional<LabelCode> parent =
        d.explicit_parent ? d.explicit_parent : derive_parent(node.code);
    if (parent) {
      if (*parent == node.code) {
        throw LoadError(row_prefix(rows[i]) + node.code.str() + " is its own parent");
      }
      const auto pit = tax.index_.find(parent->value());
      if (pit == tax.index_.end()) {
        throw LoadError(row_prefix(rows[i]) + "dangling parent " + parent->digits() +
                        " for " + node.code.str());
      }
      node.parent = tax.nodes_[pit->second].code;
    }
    ++i;
  }

  for (const TaxonomyNode& node : tax.nodes_) {
    if (node.parent) {
      tax.nodes_[tax.index_.at(node.parent->value())].children.push_back(node.code);
    } else {
      tax.roots_.push_back(node.code);
    }
  }
  // Nodes were visited in ascending order, so children and roots are sorted.

  // Depths; explicit parents can introduce cycles, which never reach a root.
  constexpr int kUnset = -1;
  constexpr int kVisiting = -2;
  for (TaxonomyNode& node : tax.nodes_) node.depth = kUnset;
  for (std::size_t start = 0; start < tax.nodes_.size(); ++start) {
    std::vector<std::size_t> stack;
    std::size_t cur = start;
    while (tax.nodes_[cur].depth == kUnset) {
      tax.nodes_[cur].depth = kVisiting;
      stack.push_back(cur);
      if (!tax.nodes_[cur].parent) break;
      cur = tax.index_.at(tax.nodes_[cur].parent->value());
    }
    if (tax.nodes_[cur].depth == kVisiting && tax.nodes_[cur].parent) {
      throw LoadError(row_prefix(rows[cur]) + "cycle through " +
                      tax.nodes_[cur].code.str());
    }
    int depth = tax.nodes_[cur].depth == kVisiting ? -1 : tax.nodes_[cur].depth;
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
      tax.nodes_[*it].depth = ++depth;
    }
  }
  return tax;
}

Taxonomy Taxonomy::parse(std::istream& in, const TaxonomyParseOptions& options) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw LoadError("taxonomy file is empty");

  int code_col = -1, desc_col = -1, parent_col = -1, lang_col = -1;
  for (std::size_t c = 0; c < header->size(); ++c) {
    const std::string name = lowercase_trim((*header)[c]);
    if (name == "code") code_col = static_cast<int>(c);
    else if (name == "description") desc_col = static_cast<int>(c);
    else if (name == "parent") parent_col = static_cast<int>(c);
    else if (name == "lang") lang_col = static_cast<int>(c);
  }
  if (code_col < 0 || desc_col < 0) {
    throw LoadError("row 1: header must contain 'code' and 'description'");
  }

  std::vector<TaxonomyEntry> entries;
  while (auto row = reader.next()) {
    const std::size_t rowno = reader.record_number();
    if (row->size() == 1 && trim((*row)[0]).empty()) continue;
    if (row->size() != header->size()) {
      throw LoadError(row_prefix(rowno) + "expected " + std::to_string(header->size()) +
                      " fields, found " + std::to_string(row->size()));
    }
    TaxonomyEntry e;
    e.row = rowno;
    try {
      e.code = LabelCode::parse(trim((*row)[code_col]));
      if (parent_col >= 0) {
        const std::string p = trim((*row)[parent_col]);
        if (!p.empty()) e.parent = LabelCode::parse(p);
      }
    } catch (const FormatError& err) {
      throw LoadError(row_prefix(rowno) + err.what());
    }
    e.description = trim((*row)[desc_col]);
    e.lang = lang_col >= 0 ? trim((*row)[lang_col]) : std::string();
    if (e.lang.empty()) e.lang = options.default_lang;
    entries.push_back(std::move(e));
  }
  return build(std::move(entries));
}

Taxonomy Taxonomy::load(const std::string& path, const TaxonomyParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open taxonomy file '" + path + "'");
  return parse(in, options);
}

bool Taxonomy::contains(LabelCode code) const noexcept {
  return index_.contains(code.value());
}

const TaxonomyNode* Taxonomy::find(LabelCode code) const noexcept {
  const auto it = index_.find(code.value());
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

const TaxonomyNode& Taxonomy::node(LabelCode code) const {
  return nodes_[index_of(code)];
}

std::size_t Taxonomy::index_of(LabelCode code) const {
  const auto it = index_.find(code.value());
  if (it == index_.end()) throw UnknownCodeError("unknown label code " + code.str());
  return it->second;
}

std::span<const LabelCode> Taxonomy::candidates(std::optional<LabelCode> parent) const {
  if (!parent) return roots_;
  return node(*parent).children;
}

std::vector<LabelCode> Taxonomy::ancestors_and_self(LabelCode code) const {
  const TaxonomyNode* n = &node(code);
  std::vector<LabelCode> chain(static_cast<std::size_t>(n->depth) + 1);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    *it = n->code;
    if (n->parent) n = &nodes_[index_.at(n->parent->value())];
  }
  return chain;
}

bool Taxonomy::is_ancestor_or_self(LabelCode ancestor, LabelCode code) const {
  const TaxonomyNode& a = node(ancestor);
  const TaxonomyNode* n = &node(code);
  while (n->depth > a.depth) n = &nodes_[index_.at(n->parent->value())];
  return n->code == a.code;
}

std::vector<LabelCode> Taxonomy::siblings(LabelCode code) const {
  const TaxonomyNode& n = node(code);
  std::vector<LabelCode> out;
  for (const LabelCode& c : candidates(n.parent)) {
    if (c != n.code) out.push_back(c);
  }
  return out;
}

std::vector<std::string> Taxonomy::common_languages() const {
  if (nodes_.empty()) return {};
  std::vector<std::string> langs;
  for (const auto& [lang, text] : nodes_.front().descriptions) {
    const bool everywhere = std::all_of(nodes_.begin(), nodes_.end(), [&](const auto& n) {
      return n.descriptions.contains(lang);
    });
    if (everywhere) langs.push_back(lang);
  }
  return langs;
}

bool operator==(const Taxonomy& a, const Taxonomy& b) {
  if (a.nodes_.size() != b.nodes_.size() || a.roots_ != b.roots_) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const TaxonomyNode& x = a.nodes_[i];
    const TaxonomyNode& y = b.nodes_[i];
    if (x.code.str() != y.code.str() || x.descriptions != y.descriptions ||
        x.parent != y.parent || x.children != y.children || x.depth != y.depth) {
      return false;
    }
  }
  return true;
}

TaxonomyStats taxonomy_stats(const Taxonomy& tax, const std::string& lang) {
  TaxonomyStats s;
  s.n_classes = tax.size();
  s.n_roots = tax.roots().size();
  if (s.n_classes == 0) return s;

  int max_depth = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::map<int, std::size_t> per_depth;
  for (const TaxonomyNode& n : tax.nodes()) {
    const auto k = n.children.size();
    if (k == 0) ++s.n_leaves;
    ++s.children_histogram[k];
    sum += static_cast<double>(k);
    sum_sq += static_cast<double>(k) * static_cast<double>(k);
    max_depth = std::max(max_depth, n.depth);
    ++per_depth[n.depth];

    const auto it = lang.empty() ? n.descriptions.begin() : n.descriptions.find(lang);
    if (it != n.descriptions.end()) {
      std::istringstream words(it->second);
      std::size_t count = 0;
      for (std::string w; words >> w;) ++count;
      ++s.description_word_counts[count];
    }
  }
  const double n = static_cast<double>(s.n_classes);
  s.max_depth = static_cast<std::size_t>(max_depth) + 1;
  s.mean_children = static_cast<double>(s.n_classes - s.n_roots) / n;
  const double mean = sum / n;
  s.sd_children = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));

  std::size_t cumulative = 0;
  for (const auto& [depth, count] : per_depth) {
    cumulative += count;
    s.classes_per_depth[depth] = cumulative;
  }
  return s;
}

void write_stats_csv(std::ostream& out, const TaxonomyStats& s) {
  out << "section,key,value\n";
  out << "summary,n_classes," << s.n_classes << '\n';
  out << "summary,n_leaves," << s.n_leaves << '\n';
  out << "summary,n_roots," << s.n_roots << '\n';
  out << "summary,max_depth," << s.max_depth << '\n';
  out << std::setprecision(6) << std::fixed;
  out << "summary,mean_children," << s.mean_children << '\n';
  out << "summary,sd_children," << s.sd_children << '\n';
  for (const auto& [depth, count] : s.classes_per_depth) {
    out << "classes_per_depth," << depth << ',' << count << '\n';
  }
  for (const auto& [children, count] : s.children_histogram) {
    out << "children_histogram," << children << ',' << count << '\n';
  }
  for (const auto& [words, count] : s.description_word_counts) {
    out << "description_word_counts," << words << ',' << count << '\n';
  }
}

}  // namespace hiertax
