#include <chrono>
#include <cstdlib>
#include <sstream>

#include "doctest.h"

#include "hiertax/error.hpp"
#include "hiertax/taxonomy.hpp"
#include "synthetic.hpp"

using namespace hiertax;

namespace {

Taxonomy parse_csv(const std::string& text) {
  std::istringstream in(text);
  return Taxonomy::parse(in);
}

LabelCode code(const char* s) { return LabelCode::parse(s); }

}  // namespace

TEST_CASE("label codes") {
  const LabelCode c = code("15811000-6");
  CHECK(c.value() == 15811000u);
  CHECK(c.check_digit() == '6');
  CHECK(c.str() == "15811000-6");
  CHECK(c.digits() == "15811000");
  CHECK(code("15811000") == c);
  CHECK_FALSE(code("15811000").check_digit().has_value());
  CHECK_THROWS_AS(code("1581100"), FormatError);
  CHECK_THROWS_AS(code("1581100x-1"), FormatError);
  CHECK_THROWS_AS(code("00000000-1"), FormatError);
}

TEST_CASE("derive_parent zeroes the last non-zero digit") {
  CHECK(derive_parent(code("15811000-6")) == code("15810000"));
  CHECK_FALSE(derive_parent(code("15000000-8")).has_value());
  CHECK(derive_parent(code("51820000")) == code("51800000"));
  CHECK(derive_parent(code("51800000")) == code("51000000"));
  CHECK(derive_parent(code("45000001")) == code("45000000"));
}

TEST_CASE("parse a three-row chain") {
  const Taxonomy tax = parse_csv(
      "code,description\n"
      "15000000-8,\"Food, beverages, tobacco and related products\"\n"
      "15800000-6,Miscellaneous food products\n"
      "15810000-9,Bread products\n");
  CHECK(tax.size() == 3);
  REQUIRE(tax.roots().size() == 1);
  CHECK(tax.roots()[0] == code("15000000"));
  CHECK(tax.node(code("15810000")).depth == 2);
  CHECK(tax.node(code("15000000")).description("en") ==
        "Food, beverages, tobacco and related products");
  const auto chain = tax.ancestors_and_self(code("15810000"));
  REQUIRE(chain.size() == 3);
  CHECK(chain[0] == code("15000000"));
  CHECK(chain[1] == code("15800000"));
  CHECK(chain[2] == code("15810000"));
  CHECK(tax.ancestors_and_self(code("15000000")).size() == 1);
  CHECK(tax.canonical(code("15810000")).str() == "15810000-9");
  CHECK(tax.is_ancestor_or_self(code("15000000"), code("15810000")));
  CHECK_FALSE(tax.is_ancestor_or_self(code("15810000"), code("15000000")));
}

TEST_CASE("load errors name the row") {
  SUBCASE("dangling derived parent") {
    try {
      parse_csv("code,description\n15000000-8,Food\n15810000-9,Bread\n");
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
  }
  SUBCASE("duplicate code") {
    CHECK_THROWS_AS(parse_csv("code,description\n15000000-8,Food\n15000000-8,Food again\n"),
                    LoadError);
  }
  SUBCASE("dangling explicit parent") {
    CHECK_THROWS_AS(parse_csv("code,description,parent\n15000000-8,Food,\n15800000-6,Misc,16000000\n"),
                    LoadError);
  }
  SUBCASE("missing description column") {
    CHECK_THROWS_AS(parse_csv("code,text\n15000000-8,Food\n"), FormatError);
  }
  SUBCASE("malformed code") {
    CHECK_THROWS_AS(parse_csv("code,description\n1500000-8,Food\n"), LoadError);
  }
}

TEST_CASE("explicit parent wins over derivation") {
  const Taxonomy tax = parse_csv(
      "code,description,parent\n"
      "51000000-9,Installation services,\n"
      "51010000-2,Extra child,51000000\n"
      "51800000-8,Installation of containers,\n");
  CHECK(tax.node(code("51010000")).parent == code("51000000"));
  CHECK(tax.node(code("51000000")).children.size() == 2);
}

TEST_CASE("multilingual rows add descriptions") {
  const Taxonomy tax = parse_csv(
      "code,description,lang\n"
      "15000000-8,Food,en\n"
      "15000000-8,Alimenti,it\n");
  CHECK(tax.size() == 1);
  CHECK(tax.node(code("15000000")).description("it") == "Alimenti");
  CHECK_THROWS_AS(tax.node(code("15000000")).description("de"), FormatError);
  CHECK(tax.common_languages() == std::vector<std::string>{"en", "it"});
}

TEST_CASE("unknown codes") {
  const Taxonomy tax = testing::make_tree({2, 2});
  CHECK_FALSE(tax.contains(code("99000000")));
  CHECK_THROWS_AS(tax.node(code("99000000")), UnknownCodeError);
  CHECK_THROWS_AS(tax.ancestors_and_self(code("99000000")), UnknownCodeError);
}

TEST_CASE("siblings and candidates") {
  const Taxonomy tax = testing::make_tree({3, 2});
  CHECK(tax.candidates(std::nullopt).size() == 3);
  CHECK(tax.siblings(code("10000000")).size() == 2);
  CHECK(tax.siblings(code("10100000")) == std::vector<LabelCode>{code("10200000")});
  CHECK(tax.candidates(code("10000000")).size() == 2);
}

TEST_CASE("stats on small trees") {
  SUBCASE("single root") {
    const TaxonomyStats s = taxonomy_stats(testing::make_tree({1}));
    CHECK(s.n_classes == 1);
    CHECK(s.n_leaves == 1);
    CHECK(s.mean_children == 0.0);
    CHECK(s.max_depth == 1);
  }
  SUBCASE("perfect binary tree of depth 2") {
    const TaxonomyStats s = taxonomy_stats(testing::make_tree({1, 2, 2}));
    CHECK(s.n_classes == 7);
    CHECK(s.n_leaves == 4);
    CHECK(s.n_roots == 1);
    CHECK(s.max_depth == 3);
    CHECK(s.mean_children == doctest::Approx(6.0 / 7.0).epsilon(1e-15));
    // Children counts {2,2,2,0,0,0,0}: population SD.
    const double mean = 6.0 / 7.0;
    const double var = (3 * (2 - mean) * (2 - mean) + 4 * mean * mean) / 7.0;
    CHECK(s.sd_children == doctest::Approx(std::sqrt(var)).epsilon(1e-15));
    CHECK(s.classes_per_depth.at(0) == 1);
    CHECK(s.classes_per_depth.at(1) == 3);
    CHECK(s.classes_per_depth.at(2) == 7);
    CHECK(s.children_histogram.at(0) == 4);
    CHECK(s.children_histogram.at(2) == 3);
  }
}

TEST_CASE("stats CSV and round trip through a file") {
  const Taxonomy tax = testing::make_tree({2, 3});
  std::ostringstream out;
  write_stats_csv(out, taxonomy_stats(tax));
  const std::string csv = out.str();
  CHECK(csv.rfind("section,key,value\n", 0) == 0);
  CHECK(csv.find("summary,n_classes,8") != std::string::npos);
}

TEST_CASE("building a CPV-sized taxonomy is fast") {
  // 45 roots with 9 children each, then 9 grandchildren per child, and so on
  // until 9454 nodes.
  std::vector<TaxonomyEntry> entries;
  std::size_t row = 2;
  std::vector<std::uint32_t> frontier;
  for (std::uint32_t r = 0; r < 45; ++r) frontier.push_back((10 + r) * 1000000u);
  static constexpr std::uint32_t kPlace[] = {100000u, 10000u, 1000u, 100u, 10u, 1u};
  int depth = 0;
  while (!frontier.empty() && entries.size() < 9454) {
    std::vector<std::uint32_t> next;
    for (std::uint32_t v : frontier) {
      if (entries.size() >= 9454) break;
      entries.push_back({LabelCode::from_value(v), "node " + std::to_string(v), "en", std::nullopt, row++});
      if (depth < 6) {
        for (std::uint32_t c = 1; c <= 9; ++c) next.push_back(v + c * kPlace[depth]);
      }
    }
    frontier = std::move(next);
    ++depth;
  }
  std::ostringstream csv;
  csv << "code,description\n";
  for (const auto& e : entries) csv << e.code.digits() << ',' << e.description << '\n';

  const auto t0 = std::chrono::steady_clock::now();
  std::istringstream in(csv.str());
  const Taxonomy tax = Taxonomy::parse(in);
  const TaxonomyStats s = taxonomy_stats(tax);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(s.n_classes == 9454);
  CHECK(secs < 5.0);
}
