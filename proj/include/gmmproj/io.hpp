#pragma once

#include "gmmproj/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gmmproj {

// Header row, one label column, every other column numeric. Labels get
// dense ids in first-appearance order. Non-numeric or blank feature cells
// are rejected with the offending (1-based, header = line 1) line number.
LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column);

std::vector<std::string> split_csv_line(const std::string& line);

// Columns x0..x{D-1} followed by `label_column` holding class names.
void write_csv(const std::filesystem::path& path, const LabeledDataset& data,
               const std::string& label_column = "label");

}  // namespace gmmproj
