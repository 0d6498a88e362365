#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace ldfactor::cli {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Scientific notation with 5 significant digits, e.g. 1.1000e-14.
std::string format_real(double v);

Table cmd_approx(const RunConfig& cfg);
Table cmd_simulate(const RunConfig& cfg, bool naive);
Table cmd_compare(const RunConfig& cfg);
Table cmd_levy(const RunConfig& cfg);

void write_table(std::ostream& os, const Table& table, OutputFormat format);

}  // namespace ldfactor::cli
