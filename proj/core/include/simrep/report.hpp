#pragma once

// CSV tables and self-contained SVG plots. Plots carry every drawn value as
// data-x / data-y attributes formatted exactly as in the CSV output.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace simrep {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Appends a row; throws InputError when its width differs from the header.
  void add(std::vector<std::string> row);
};

/// RFC 4180: comma separated, CRLF line ends, fields quoted when needed.
std::string to_csv(const CsvTable& table);
/// Inverse of to_csv for well-formed input.
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  /// Optional +/- band around y.
  std::vector<double> err;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Point of series 0 drawn in red (the base value).
  std::optional<std::size_t> highlight;
  bool log_x = false;
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> labels;
  /// One or more series drawn side by side per label.
  std::vector<std::string> series_names;
  std::vector<std::vector<double>> values;
  /// Empty, or parallel to `values`.
  std::vector<std::vector<double>> errors;
};

struct HistogramPanel {
  std::string title;
  double low = 0.0;
  double high = 0.0;
  /// Per group (cluster) bin counts.
  std::vector<std::vector<std::size_t>> counts;
};

struct HistogramGrid {
  std::string title;
  std::vector<std::string> group_names;
  std::vector<HistogramPanel> panels;
};

std::string render_svg(const LineChart& chart);
std::string render_svg(const BarChart& chart);
std::string render_svg(const HistogramGrid& grid);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace simrep
