#include "hiertax/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "hiertax/error.hpp"
#include "hiertax/rng.hpp"

namespace hiertax {

DatasetSplit split_dataset(const std::vector<TenderRecord>& records, double test_fraction,
                           std::size_t n_unseen, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw DomainError("test fraction must be in [0, 1)");
  }
  std::map<LabelCode, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].cpv) throw DomainError("record " + records[i].id + " has no cpv label");
    by_label[*records[i].cpv].push_back(i);
  }

  std::vector<LabelCode> eligible;
  for (const auto& [label, idx] : by_label) {
    if (idx.size() >= 2) eligible.push_back(label);
  }
  if (n_unseen > eligible.size()) {
    throw DomainError("cannot hold out " + std::to_string(n_unseen) + " classes: only " +
                      std::to_string(eligible.size()) + " have two or more records");
  }
  CounterRng rng(mix64(seed) ^ 0x5EED5EED5EED5EEDULL);
  for (std::size_t i = 0; i < n_unseen; ++i) {
    const std::size_t j = i + rng.uniform_index(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  DatasetSplit split;
  split.unseen.insert(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(n_unseen));

  std::vector<char> in_test(records.size(), 0);
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (split.unseen.contains(*records[i].cpv)) {
      in_test[i] = 1;
    } else {
      rest.push_back(i);
    }
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rest.size())));
  for (std::size_t k = 0; k < n_test; ++k) in_test[rest[k]] = 1;

  for (const auto& [label, idx] : by_label) {
    if (split.unseen.contains(label)) continue;
    if (std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return in_test[i] != 0; })) {
      in_test[idx.front()] = 0;
    }
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (in_test[i]) {
      split.test.push_back(records[i]);
    } else {
      split.train.push_back(records[i]);
      split.seen.insert(*records[i].cpv);
    }
  }
  return split;
}

std::set<LabelCode> read_code_set(std::istream& in) {
  std::set<LabelCode> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.insert(LabelCode::parse(std::string_view(line).substr(b, e - b + 1)));
  }
  return out;
}

void write_code_set(std::ostream& out, const std::set<LabelCode>& codes) {
  for (const LabelCode& c : codes) out << c.str() << '\n';
}

}  // namespace hiertax
