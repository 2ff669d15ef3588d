#include <sstream>

#include <limits>

#include "doctest.h"

#include "hiertax/encoding.hpp"
#include "hiertax/error.hpp"
#include "hiertax/utf8.hpp"

using namespace hiertax;

TEST_CASE("value quantization") {
  CHECK(quantize_value(1000.00) == "[€€€€]");
  CHECK(quantize_value(9000.00) == "[€€€€]");
  CHECK(quantize_value(9999.99) == "[€€€€]");
  CHECK(quantize_value(10000.0) == "[€€€€€]");
  CHECK(quantize_value(1234567890.00) == "[€€€€€€€€€]");
  CHECK(quantize_value(0.50) == "[€]");
  CHECK(quantize_value(500) == "[€€€]");
  CHECK(quantize_value(123456, 3) == "[€€€]");
  CHECK_THROWS_AS(quantize_value(0.0), DomainError);
  CHECK_THROWS_AS(quantize_value(-3.0), DomainError);
  CHECK_THROWS_AS(quantize_value(std::numeric_limits<double>::infinity()), DomainError);
}

TEST_CASE("record serialization") {
  TenderRecord rec;
  rec.id = "1";
  rec.object_text = "Food stuff";
  rec.month = "April";
  rec.value_eur = 500;
  CHECK(serialize_record(rec) == "Food stuff [MONTH] April [VALUE] [€€€]");

  TenderRecord bare;
  bare.id = "2";
  bare.object_text = "Road works";
  CHECK(serialize_record(bare) == "Road works");

  rec.contractual_choice = "open procedure";
  rec.legal_form = "municipality";
  rec.macro_area = "North";
  CHECK(serialize_record(rec) ==
        "Food stuff [MONTH] April [VALUE] [€€€] [CONTRACTUAL_CHOICE] open procedure "
        "[LEGAL_FORM] municipality [MACRO_AREA] North");

  EncodingConfig cfg;
  cfg.field_order = {"macro_area", "month"};
  CHECK(serialize_record(rec, cfg) == "Food stuff [MACRO_AREA] North [MONTH] April");

  TenderRecord empty;
  empty.id = "3";
  empty.object_text = "   ";
  CHECK_THROWS_AS(serialize_record(empty), FormatError);
}

TEST_CASE("object truncation respects the budget and word boundaries") {
  TenderRecord rec;
  rec.id = "long";
  std::string text;
  for (int i = 0; i < 2000; ++i) text += "word ";
  rec.object_text = text;
  EncodingConfig cfg;
  cfg.max_object_chars = 2000;
  const std::string s = serialize_record(rec, cfg);
  CHECK(s.size() <= 2000);
  CHECK(s.substr(s.size() - 4) == "word");

  CHECK(truncate_at_whitespace("alpha beta gamma", 12) == "alpha beta");
  CHECK(truncate_at_whitespace("alpha beta gamma", 100) == "alpha beta gamma");
  CHECK(truncate_at_whitespace("supercalifragilistic", 5) == "super");
  // Code points, not bytes.
  CHECK(truncate_at_whitespace("èèè èèè", 3) == "èèè");
}

TEST_CASE("pairs and reserved sequences") {
  TenderRecord rec;
  rec.id = "p";
  rec.object_text = "Supply of fruit [SEP] vegetables";
  rec.month = "April";
  const TaxonomyNode a{LabelCode::parse("03000000-1"),
                       {{"en", "Agricultural and horticultural products"}}, std::nullopt, {}, 0};
  const TaxonomyNode b{LabelCode::parse("09000000-3"),
                       {{"en", "Petroleum products [CLS] fuel"}}, std::nullopt, {}, 0};
  const PairText pa = make_pair(rec, a, "en");
  const PairText pb = make_pair(rec, b, "en");
  CHECK(pa.label_text == "Agricultural and horticultural products");
  CHECK(pa.input_text == pb.input_text);
  CHECK(pa.input_text == "Supply of fruit (SEP) vegetables [MONTH] April");
  CHECK(pb.label_text == "Petroleum products (CLS) fuel");
  CHECK_THROWS_AS(make_pair(rec, a, "it"), FormatError);
}

TEST_CASE("record parsing") {
  const TenderRecord r = parse_record(
      R"({"id":7,"object":" Bread ","month":4,"value":0,"legal_form":"region","cpv":"15810000-9","lot":"A"})");
  CHECK(r.id == "7");
  CHECK(r.object_text == "Bread");
  CHECK(r.month == "April");
  CHECK_FALSE(r.value_eur.has_value());
  CHECK(r.legal_form == "region");
  CHECK(r.cpv == LabelCode::parse("15810000"));
  REQUIRE(r.extra.size() == 1);
  CHECK(r.extra[0].first == "lot");
  CHECK(r.category("lot") == "A");

  CHECK(parse_record(R"({"id":"a","object":"x","value":"1500.5"})").value_eur == 1500.5);
  CHECK(parse_record(R"({"id":"a","object":"x","month":"2019-11-03"})").month == "November");
  CHECK_THROWS_AS(parse_record(R"({"id":"a","object":"x","value":-1})"), FormatError);
  CHECK_THROWS_AS(parse_record(R"({"object":"x"})"), FormatError);
  CHECK_THROWS_AS(parse_record(R"({"id":"a","object":"x","cpv":"bogus"})"), FormatError);
  CHECK_THROWS_AS(parse_record("not json"), FormatError);
}

TEST_CASE("record lines keep going past bad input") {
  std::istringstream in("{\"id\":\"1\",\"object\":\"a\"}\n\nnot json\n{\"id\":\"2\",\"object\":\"b\"}\n");
  const auto lines = read_record_lines(in);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].record.has_value());
  CHECK_FALSE(lines[1].record.has_value());
  CHECK(lines[1].line == 3);
  CHECK(lines[2].record->id == "2");
  std::istringstream again("{\"id\":\"1\",\"object\":\"a\"}\nnot json\n");
  CHECK_THROWS_AS(read_records(again), FormatError);
}

TEST_CASE("utf8 helpers") {
  CHECK(utf8::encode(utf8::decode("Caffè €")) == "Caffè €");
  CHECK(utf8::decode("\xff").front() == U'�');
  CHECK(utf8::to_lower(U'È') == U'è');
  CHECK(utf8::to_lower(U'Q') == U'q');
}
