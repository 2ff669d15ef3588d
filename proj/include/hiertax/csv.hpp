#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hiertax::csv {

/// Reads RFC 4180 records one at a time: quoted fields, doubled quotes,
/// embedded newlines, CRLF. A leading UTF-8 BOM is skipped.
class Reader {
 public:
  explicit Reader(std::istream& in);

  /// Next record, or nullopt at end of input. Throws FormatError on an
  /// unterminated quoted field.
  std::optional<std::vector<std::string>> next();
  /// 1-based record number of the record last returned.
  std::size_t record_number() const noexcept { return record_; }

 private:
  std::istream& in_;
  std::size_t record_ = 0;
  bool first_ = true;
};

std::string escape(std::string_view field);

}  // namespace hiertax::csv
