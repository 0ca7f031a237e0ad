#include "simrep/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "simrep/container.hpp"
#include "simrep/errors.hpp"

namespace simrep {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"};

std::string escape_xml(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi <= lo) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

class Canvas {
 public:
  Canvas(const std::string& title) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
         << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title)
         << "</text>\n";
  }
  std::ostringstream& out() { return out_; }
  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

  void axes(const Range& x, const Range& y, const std::string& x_label, const std::string& y_label, bool x_ticks) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    out_ << "<g class=\"axes\" stroke=\"black\">\n"
         << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\"/>\n"
         << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\"/>\n</g>\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = y.lo + (y.hi - y.lo) * i / 4.0;
      const double py = y0 - (y0 - y1) * i / 4.0;
      out_ << "<text x=\"" << x0 - 6 << "\" y=\"" << px(py + 4) << "\" text-anchor=\"end\">" << tick(v) << "</text>\n";
      if (x_ticks) {
        const double u = x.lo + (x.hi - x.lo) * i / 4.0;
        const double pxv = x0 + (x1 - x0) * i / 4.0;
        out_ << "<text x=\"" << px(pxv) << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << tick(u)
             << "</text>\n";
      }
    }
    out_ << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 14 << "\" text-anchor=\"middle\">"
         << escape_xml(x_label) << "</text>\n"
         << "<text x=\"16\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
         << (y0 + y1) / 2 << ")\">" << escape_xml(y_label) << "</text>\n";
  }

 private:
  std::ostringstream out_;
};

double map(double v, const Range& r, double a, double b) { return a + (v - r.lo) / (r.hi - r.lo) * (b - a); }

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, result.ptr);
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header.size())
    throw InputError("csv: row has " + std::to_string(row.size()) + " fields, header has " +
                     std::to_string(header.size()));
  rows.push_back(std::move(row));
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      const auto& f = row[i];
      if (f.find_first_of(",\"\r\n") == std::string::npos) {
        out += f;
      } else {
        out += '"';
        for (const char c : f) {
          if (c == '"') out += '"';
          out += c;
        }
        out += '"';
      }
    }
    out += "\r\n";
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  CsvTable table;
  if (rows.empty()) return table;
  table.header = std::move(rows.front());
  table.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
  return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_file_atomic(path, to_csv(table)); }

void write_text(const std::filesystem::path& path, const std::string& text) { write_file_atomic(path, text); }

std::string render_svg(const LineChart& chart) {
  Range xr{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Range yr{0.0, 0.0};
  auto xv = [&](double v) { return chart.log_x && v > 0 ? std::log10(v) : v; };
  for (const auto& s : chart.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.include(xv(s.x[i]));
      const double e = i < s.err.size() ? s.err[i] : 0.0;
      yr.include(s.y[i] + e);
      yr.include(s.y[i] - e);
    }
  if (!std::isfinite(xr.lo)) xr = {0.0, 1.0};
  xr.pad();
  yr.pad();
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;

  Canvas canvas(chart.title);
  auto& out = canvas.out();
  canvas.axes(xr, yr, chart.x_label + (chart.log_x ? " (log10)" : ""), chart.y_label, true);
  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const auto& s = chart.series[si];
    auto sx = [&](std::size_t i) { return map(xv(s.x[i]), xr, x0, x1); };
    auto sy = [&](double v) { return map(v, yr, y0, y1); };
    out << "<g class=\"series\" data-series=\"" << escape_xml(s.name) << "\">\n";
    if (!s.err.empty()) {
      out << "<polygon class=\"band\" fill=\"" << s.color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) out << px(sx(i)) << ',' << px(sy(s.y[i] + s.err[i])) << ' ';
      for (std::size_t i = s.x.size(); i-- > 0;) out << px(sx(i)) << ',' << px(sy(s.y[i] - s.err[i])) << ' ';
      out << "\"/>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
        << (s.dashed ? " stroke-dasharray=\"5,4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) out << px(sx(i)) << ',' << px(sy(s.y[i])) << ' ';
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const bool base = si == 0 && chart.highlight && *chart.highlight == i;
      out << "<circle class=\"" << (base ? "point base" : "point") << "\" cx=\"" << px(sx(i)) << "\" cy=\""
          << px(sy(s.y[i])) << "\" r=\"" << (base ? 5 : 3) << "\" fill=\"" << (base ? "red" : s.color)
          << "\" data-x=\"" << format_number(s.x[i]) << "\" data-y=\"" << format_number(s.y[i]) << '"';
      if (i < s.err.size()) out << " data-err=\"" << format_number(s.err[i]) << '"';
      out << "/>\n";
    }
    out << "</g>\n";
    out << "<text x=\"" << x1 - 150 << "\" y=\"" << y1 + 14 * (si + 1) << "\" fill=\"" << s.color << "\">"
        << escape_xml(s.name) << "</text>\n";
  }
  return canvas.finish();
}

std::string render_svg(const BarChart& chart) {
  Range yr{0.0, 0.0};
  for (std::size_t s = 0; s < chart.values.size(); ++s)
    for (std::size_t i = 0; i < chart.values[s].size(); ++i) {
      const double e = s < chart.errors.size() && i < chart.errors[s].size() ? chart.errors[s][i] : 0.0;
      yr.include(chart.values[s][i] + e);
      yr.include(chart.values[s][i] - e);
    }
  yr.pad();
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  Canvas canvas(chart.title);
  auto& out = canvas.out();
  canvas.axes({0.0, 1.0}, yr, "", chart.y_label, false);
  const std::size_t groups = chart.labels.size();
  const std::size_t nseries = std::max<std::size_t>(1, chart.values.size());
  const double slot = groups ? (x1 - x0) / static_cast<double>(groups) : 0.0;
  const double bar = slot * 0.8 / static_cast<double>(nseries);
  auto sy = [&](double v) { return map(v, yr, y0, y1); };
  for (std::size_t g = 0; g < groups; ++g) {
    const double gx = x0 + slot * static_cast<double>(g) + slot * 0.1;
    for (std::size_t s = 0; s < chart.values.size(); ++s) {
      const double v = chart.values[s][g];
      const double left = gx + bar * static_cast<double>(s);
      const double top = std::min(sy(v), sy(0.0)), h = std::abs(sy(v) - sy(0.0));
      out << "<rect class=\"bar\" x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(bar)
          << "\" height=\"" << px(h) << "\" fill=\"" << kPalette[s % 6] << "\" data-label=\""
          << escape_xml(chart.labels[g]) << "\" data-series=\""
          << escape_xml(s < chart.series_names.size() ? chart.series_names[s] : "") << "\" data-y=\""
          << format_number(v) << '"';
      if (s < chart.errors.size() && g < chart.errors[s].size()) {
        const double e = chart.errors[s][g];
        out << " data-err=\"" << format_number(e) << "\"/>\n";
        const double cx = left + bar / 2;
        out << "<line class=\"error\" stroke=\"black\" x1=\"" << px(cx) << "\" y1=\"" << px(sy(v - e)) << "\" x2=\""
            << px(cx) << "\" y2=\"" << px(sy(v + e)) << "\"/>\n";
      } else {
        out << "/>\n";
      }
    }
    out << "<text x=\"" << px(x0 + slot * (static_cast<double>(g) + 0.5)) << "\" y=\"" << y0 + 14
        << "\" text-anchor=\"end\" font-size=\"10\" transform=\"rotate(-35 "
        << px(x0 + slot * (static_cast<double>(g) + 0.5)) << ' ' << y0 + 14 << ")\">" << escape_xml(chart.labels[g])
        << "</text>\n";
  }
  for (std::size_t s = 0; s < chart.series_names.size(); ++s)
    out << "<text x=\"" << x1 - 150 << "\" y=\"" << y1 + 14 * (s + 1) << "\" fill=\"" << kPalette[s % 6] << "\">"
        << escape_xml(chart.series_names[s]) << "</text>\n";
  return canvas.finish();
}

std::string render_svg(const HistogramGrid& grid) {
  const std::size_t n = grid.panels.size();
  const std::size_t cols = std::min<std::size_t>(4, std::max<std::size_t>(1, n));
  const std::size_t rows = (n + cols - 1) / std::max<std::size_t>(1, cols);
  const double pw = 220.0, ph = 160.0;
  const double width = pw * static_cast<double>(cols) + 20, height = ph * static_cast<double>(rows) + 70;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"10\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(grid.title)
      << "</text>\n";
  for (std::size_t g = 0; g < grid.group_names.size(); ++g)
    out << "<text x=\"" << 20 + 110 * g << "\" y=\"40\" fill=\"" << kPalette[g % 6] << "\">"
        << escape_xml(grid.group_names[g]) << "</text>\n";
  for (std::size_t p = 0; p < n; ++p) {
    const auto& panel = grid.panels[p];
    const double ox = 20 + pw * static_cast<double>(p % cols), oy = 50 + ph * static_cast<double>(p / cols);
    const double iw = pw - 30, ih = ph - 50;
    std::size_t peak = 1;
    std::size_t bins = 0;
    for (const auto& c : panel.counts) {
      bins = std::max(bins, c.size());
      for (const auto v : c) peak = std::max(peak, v);
    }
    out << "<g class=\"panel\" data-title=\"" << escape_xml(panel.title) << "\" data-low=\""
        << format_number(panel.low) << "\" data-high=\"" << format_number(panel.high) << "\">\n"
        << "<text x=\"" << ox + iw / 2 << "\" y=\"" << oy + 12 << "\" text-anchor=\"middle\">" << escape_xml(panel.title)
        << "</text>\n"
        << "<line stroke=\"black\" x1=\"" << ox << "\" y1=\"" << oy + 20 + ih << "\" x2=\"" << ox + iw << "\" y2=\""
        << oy + 20 + ih << "\"/>\n"
        << "<text x=\"" << ox << "\" y=\"" << oy + 34 + ih << "\">" << tick(panel.low) << "</text>\n"
        << "<text x=\"" << ox + iw << "\" y=\"" << oy + 34 + ih << "\" text-anchor=\"end\">" << tick(panel.high)
        << "</text>\n";
    if (bins > 0) {
      const double bw = iw / static_cast<double>(bins);
      for (std::size_t g = 0; g < panel.counts.size(); ++g)
        for (std::size_t b = 0; b < panel.counts[g].size(); ++b) {
          const double h = ih * static_cast<double>(panel.counts[g][b]) / static_cast<double>(peak);
          out << "<rect class=\"bin\" x=\"" << px(ox + bw * static_cast<double>(b)) << "\" y=\""
              << px(oy + 20 + ih - h) << "\" width=\"" << px(bw) << "\" height=\"" << px(h) << "\" fill=\""
              << kPalette[g % 6] << "\" fill-opacity=\"0.5\" data-group=\"" << g << "\" data-bin=\"" << b
              << "\" data-count=\"" << panel.counts[g][b] << "\"/>\n";
        }
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace simrep
