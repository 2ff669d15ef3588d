#include "hiertax/encoding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>

#include "json.hpp"

#include "hiertax/error.hpp"
#include "hiertax/utf8.hpp"

namespace hiertax {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 12> kMonths = {
    "January", "February", "March",     "April",   "May",      "June",
    "July",    "August",   "September", "October", "November", "December"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<std::string> category_value(const ordered_json& v) {
  if (v.is_null()) return std::nullopt;
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  s = trim(s);
  if (s.empty()) return std::nullopt;
  return s;
}

std::string field_token(std::string_view name) {
  std::string token = "[";
  for (char c : name) token.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  token.push_back(']');
  return token;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

std::optional<std::string> TenderRecord::category(std::string_view name) const {
  if (name == "month") return month;
  if (name == "contractual_choice") return contractual_choice;
  if (name == "legal_form") return legal_form;
  if (name == "macro_area") return macro_area;
  for (const auto& [key, value] : extra) {
    if (key == name) return value;
  }
  return std::nullopt;
}

std::string normalize_month(std::string_view text) {
  const std::string t = trim(text);
  const auto all_digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (all_digits(t) && t.size() <= 2) {
    const int m = std::stoi(t);
    if (m >= 1 && m <= 12) return std::string(kMonths[m - 1]);
  }
  // YYYY-MM or YYYY-MM-DD[...]
  if (t.size() >= 7 && t[4] == '-' && all_digits(std::string_view(t).substr(0, 4)) &&
      all_digits(std::string_view(t).substr(5, 2))) {
    const int m = std::stoi(t.substr(5, 2));
    if (m >= 1 && m <= 12) return std::string(kMonths[m - 1]);
  }
  return t;
}

TenderRecord parse_record(std::string_view json_line) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("record is not a JSON object");

  TenderRecord rec;
  bool has_id = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "id") {
      if (v.is_null()) throw FormatError("record id is null");
      rec.id = v.is_string() ? v.get<std::string>() : v.dump();
      has_id = true;
    } else if (key == "object") {
      if (!v.is_string()) throw FormatError("record " + rec.id + ": object must be a string");
      rec.object_text = trim(v.get<std::string>());
    } else if (key == "month") {
      if (auto c = category_value(v)) rec.month = normalize_month(*c);
    } else if (key == "value") {
      if (v.is_null()) continue;
      double amount = 0.0;
      if (v.is_number()) {
        amount = v.get<double>();
      } else if (v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        if (s.empty()) continue;
        try {
          std::size_t used = 0;
          amount = std::stod(s, &used);
          if (used != s.size()) throw FormatError("");
        } catch (const std::exception&) {
          throw FormatError("record " + rec.id + ": value is not a number");
        }
      } else {
        throw FormatError("record " + rec.id + ": value is not a number");
      }
      if (!std::isfinite(amount) || amount < 0.0) {
        throw FormatError("record " + rec.id + ": value must be a non-negative number");
      }
      if (amount > 0.0) rec.value_eur = amount;
    } else if (key == "contractual_choice") {
      rec.contractual_choice = category_value(v);
    } else if (key == "legal_form") {
      rec.legal_form = category_value(v);
    } else if (key == "macro_area") {
      rec.macro_area = category_value(v);
    } else if (key == "cpv") {
      if (auto c = category_value(v)) rec.cpv = LabelCode::parse(*c);
    } else {
      if (auto c = category_value(v)) rec.extra.emplace_back(key, *c);
    }
  }
  if (!has_id) throw FormatError("record has no id");
  if (rec.object_text.empty()) throw FormatError("record " + rec.id + ": empty object text");
  return rec;
}

std::vector<RecordLine> read_record_lines(std::istream& in) {
  std::vector<RecordLine> lines;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (trim(raw).empty()) continue;
    RecordLine rl;
    rl.line = lineno;
    rl.raw = raw;
    try {
      rl.record = parse_record(raw);
    } catch (const FormatError& e) {
      rl.error = "line " + std::to_string(lineno) + ": " + e.what();
    }
    lines.push_back(std::move(rl));
  }
  return lines;
}

std::vector<TenderRecord> read_records(std::istream& in) {
  std::vector<TenderRecord> out;
  for (auto& rl : read_record_lines(in)) {
    if (!rl.record) throw FormatError(rl.error);
    out.push_back(std::move(*rl.record));
  }
  return out;
}

std::vector<TenderRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open data file '" + path + "'");
  return read_records(in);
}

std::string quantize_value(double amount, int max_digits) {
  if (!(amount > 0.0) || !std::isfinite(amount)) {
    throw DomainError("quantize_value: amount must be a positive finite number");
  }
  if (max_digits < 1) throw DomainError("quantize_value: max_digits must be >= 1");
  const double integer_part = std::floor(amount);
  int k = 1;
  double bound = 10.0;
  while (k < max_digits && integer_part >= bound) {
    ++k;
    bound *= 10.0;
  }
  std::string token = "[";
  for (int i = 0; i < k; ++i) token += "\xE2\x82\xAC";
  token += "]";
  return token;
}

std::string sanitize_reserved(std::string_view text) {
  std::string s(text);
  replace_all(s, "[SEP]", "(SEP)");
  replace_all(s, "[CLS]", "(CLS)");
  return s;
}

std::string truncate_at_whitespace(std::string_view text, std::size_t max_chars) {
  std::size_t pos = 0;
  std::size_t count = 0;
  while (pos < text.size() && count < max_chars) {
    pos += std::min(utf8::sequence_length(static_cast<unsigned char>(text[pos])),
                    text.size() - pos);
    ++count;
  }
  if (pos >= text.size()) return std::string(text);

  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  std::size_t cut = pos;
  if (!is_ws(text[pos])) {
    std::size_t back = pos;
    while (back > 0 && !is_ws(text[back - 1])) --back;
    if (back > 0) cut = back;
  }
  while (cut > 0 && is_ws(text[cut - 1])) --cut;
  if (cut == 0) cut = pos;  // a single word longer than the budget
  return std::string(text.substr(0, cut));
}

std::string serialize_record(const TenderRecord& rec, const EncodingConfig& cfg) {
  const std::string object = trim(rec.object_text);
  if (object.empty()) throw FormatError("record " + rec.id + ": empty object text");

  std::string out = sanitize_reserved(truncate_at_whitespace(object, cfg.max_object_chars));
  for (const std::string& field : cfg.field_order) {
    if (field == "value") {
      if (!rec.value_eur) continue;
      out += " [VALUE] ";
      out += quantize_value(*rec.value_eur, cfg.max_value_digits);
      continue;
    }
    const auto value = rec.category(field);
    if (!value) continue;
    out += ' ';
    out += field_token(field);
    out += ' ';
    out += sanitize_reserved(*value);
  }
  return out;
}

PairText make_pair(const TenderRecord& rec, const TaxonomyNode& label,
                   const std::string& lang, const EncodingConfig& cfg) {
  return PairText{serialize_record(rec, cfg), sanitize_reserved(label.description(lang))};
}

}  // namespace hiertax
