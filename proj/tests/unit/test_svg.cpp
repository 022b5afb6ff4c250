#include <doctest.h>

#include <cmath>

#include "plaid/error.hpp"
#include "plaid/svg.hpp"

using namespace plaid;

namespace {

std::size_t occurrences(const std::string& text, const std::string& what) {
  std::size_t n = 0;
  for (auto pos = text.find(what); pos != std::string::npos; pos = text.find(what, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("aggregate series uses population statistics") {
  const auto s = aggregate_series("r", {0, 1}, {{1.0, 2.0}, {3.0, 2.0}, {5.0, 2.0}});
  CHECK(s.mean == std::vector<double>{3.0, 2.0});
  CHECK(s.std[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
  CHECK(s.std[1] == 0.0);
  CHECK_THROWS_AS(aggregate_series("r", {0, 1}, {{1.0}}), ShapeError);
}

TEST_CASE("line chart") {
  Series plain{"a<b", {0, 1, 2}, {0.1, 0.5, 0.4}, {}};
  const auto banded = aggregate_series("band", {0, 1, 2}, {{0.2, 0.3, 0.4}, {0.4, 0.5, 0.6}});
  const auto svg = line_chart_svg("reward & time", "iterations", "reward", {plain, banded});
  CHECK(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0) == 0);
  CHECK(svg.ends_with("</svg>\n"));
  CHECK(occurrences(svg, "<polyline") == 2);
  CHECK(occurrences(svg, "fill-opacity") == 1);
  CHECK(svg.find("reward &amp; time") != std::string::npos);
  CHECK(svg.find("a&lt;b") != std::string::npos);
  CHECK(svg == line_chart_svg("reward & time", "iterations", "reward", {plain, banded}));
  plain.std = {1.0};
  CHECK_THROWS_AS(line_chart_svg("t", "x", "y", {plain}), ShapeError);
  // Degenerate inputs still produce a document.
  CHECK(line_chart_svg("t", "x", "y", {}).ends_with("</svg>\n"));
  CHECK(line_chart_svg("t", "x", "y", {Series{"c", {1}, {0.5}, {}}}).find("<polyline") != std::string::npos);
}

TEST_CASE("bar chart") {
  const auto svg = bar_chart_svg("forgetting", {"flat", "incline"}, {{"plaid", {0.1, -0.2}}, {"tl_only", {-1.0, 0.0}}});
  // Four bars plus the background and legend swatches.
  CHECK(occurrences(svg, "<rect") == 1 + 4 + 2);
  CHECK(svg.find(">flat</text>") != std::string::npos);
  CHECK(svg.find(">tl_only</text>") != std::string::npos);
  CHECK_THROWS_AS(bar_chart_svg("t", {"flat"}, {{"x", {1.0, 2.0}}}), ShapeError);
}
