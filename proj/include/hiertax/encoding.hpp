#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hiertax/taxonomy.hpp"

namespace hiertax {

/// One contract: its object text plus categorical and numeric metadata.
/// Missing metadata is represented by empty optionals and skipped on output.
struct TenderRecord {
  std::string id;
  std::string object_text;
  std::optional<std::string> month;
  std::optional<double> value_eur;  // > 0 when present
  std::optional<std::string> contractual_choice;
  std::optional<std::string> legal_form;
  std::optional<std::string> macro_area;
  std::vector<std::pair<std::string, std::string>> extra;  // file order
  std::optional<LabelCode> cpv;                            // ground truth

  /// Categorical value for a named field (extras included); nullopt when
  /// missing or when `name` is "value".
  std::optional<std::string> category(std::string_view name) const;
};

/// Parses one JSON-lines record. Keys `id, object, month, value,
/// contractual_choice, legal_form, macro_area, cpv`; unknown keys go to
/// `extra` in file order. A zero value is treated as missing. Throws
/// FormatError.
TenderRecord parse_record(std::string_view json_line);

/// One input line; `record` is empty and `error` set when it failed to parse.
struct RecordLine {
  std::size_t line = 0;
  std::string raw;
  std::optional<TenderRecord> record;
  std::string error;
};

std::vector<RecordLine> read_record_lines(std::istream& in);
/// Strict variant: throws FormatError on the first bad line.
std::vector<TenderRecord> read_records(std::istream& in);
std::vector<TenderRecord> load_records(const std::string& path);

/// Month name for an integer 1-12 or an ISO date; other text is kept as is.
std::string normalize_month(std::string_view text);

/// `[` + k euro signs + `]`, k = digits of the integer part clamped to
/// [1, max_digits]. Throws DomainError for amount <= 0 or non-finite.
std::string quantize_value(double amount, int max_digits = 9);

/// Rewrites `[SEP]` and `[CLS]` to `(SEP)` and `(CLS)`.
std::string sanitize_reserved(std::string_view text);

/// Cuts `text` to at most `max_chars` code points, backing up to the last
/// whitespace boundary when a word would be split.
std::string truncate_at_whitespace(std::string_view text, std::size_t max_chars);

struct EncodingConfig {
  std::vector<std::string> field_order = {"month", "value", "contractual_choice",
                                          "legal_form", "macro_area"};
  std::size_t max_object_chars = 2000;
  int max_value_digits = 9;
};

/// Document side of a scoring pair: object text followed by
/// ` [FIELD] value` for every present field in `field_order`.
std::string serialize_record(const TenderRecord& rec, const EncodingConfig& cfg = {});

struct PairText {
  std::string input_text;
  std::string label_text;

  friend bool operator==(const PairText&, const PairText&) = default;
};

PairText make_pair(const TenderRecord& rec, const TaxonomyNode& label,
                   const std::string& lang, const EncodingConfig& cfg = {});

}  // namespace hiertax
