#pragma once

#include <string>
#include <vector>

namespace plaid {

/// One curve; `std` may be empty, otherwise a mean +/- std band is drawn.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> std;
};

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

struct BarGroup {
  std::string label;           // legend entry, e.g. a method
  std::vector<double> values;  // one per category
};

/// Grouped bars; negative values hang below the zero line.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<BarGroup>& groups);

/// Pointwise mean and population std of equally long runs.
Series aggregate_series(const std::string& label, const std::vector<double>& x,
                        const std::vector<std::vector<double>>& runs);

}  // namespace plaid
