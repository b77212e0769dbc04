#pragma once

// CSV datasets: header `y` (incomplete) or `y,z` (complete, z 1-based).

#include <filesystem>
#include <iosfwd>

#include "misscrit/model.hpp"

namespace misscrit {

// Accepts either header; a z column, when present, is parsed and discarded.
IncompleteDataset read_incomplete_csv(std::istream& in);
IncompleteDataset read_incomplete_csv(const std::filesystem::path& path);

CompleteDataset read_complete_csv(std::istream& in);
CompleteDataset read_complete_csv(const std::filesystem::path& path);

void write_csv(std::ostream& out, const IncompleteDataset& data);
void write_csv(std::ostream& out, const CompleteDataset& data);
void write_csv(const std::filesystem::path& path, const IncompleteDataset& data);
void write_csv(const std::filesystem::path& path, const CompleteDataset& data);

// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

}  // namespace misscrit
