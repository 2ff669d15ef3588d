#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "hiertax/encoding.hpp"
#include "hiertax/taxonomy.hpp"

namespace hiertax {

struct DatasetSplit {
  std::vector<TenderRecord> train;  // input order
  std::vector<TenderRecord> test;   // input order
  std::set<LabelCode> seen;         // labels with a training instance
  std::set<LabelCode> unseen;       // held-out labels, test only
};

/// Holds out `n_unseen` labels drawn uniformly among labels with at least
/// two records, then splits the rest at random with `test_fraction` going to
/// test; a label left without training records gets one back. Throws
/// DomainError for an unlabeled record, a fraction outside [0, 1) or too few
/// eligible labels.
DatasetSplit split_dataset(const std::vector<TenderRecord>& records, double test_fraction,
                           std::size_t n_unseen, std::uint64_t seed);

/// One code per line; blank lines and `#` comments are skipped.
std::set<LabelCode> read_code_set(std::istream& in);
void write_code_set(std::ostream& out, const std::set<LabelCode>& codes);

}  // namespace hiertax
