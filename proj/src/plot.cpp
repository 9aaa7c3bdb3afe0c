#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "wsdiff/bench.hpp"

namespace wsdiff {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace

std::string render_svg(const std::vector<BpdRow>& rows, const std::string& title) {
  // Mean BPD over repetitions, per method and n; rows without a value are skipped.
  std::vector<std::string> methods;
  std::map<std::string, std::map<long, std::pair<double, int>>> sums;
  std::set<long> ns;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    ns.insert(r.n);
    if (!r.bpd) continue;
    auto& cell = sums[r.method][r.n];
    cell.first += *r.bpd;
    cell.second += 1;
  }

  double ymin = INFINITY;
  double ymax = -INFINITY;
  for (const auto& [m, by_n] : sums) {
    for (const auto& [n, acc] : by_n) {
      const double v = acc.first / acc.second;
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!std::isfinite(ymin)) {
    ymin = 0.0;
    ymax = 1.0;
  }
  if (ymax - ymin < 1e-9) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double xlo = ns.empty() ? 0.0 : std::log10(static_cast<double>(*ns.begin()));
  double xhi = ns.empty() ? 1.0 : std::log10(static_cast<double>(*ns.rbegin()));
  const double xspan = xhi - xlo < 1e-9 ? 1.0 : xhi - xlo;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](long n) {
    const double x = std::log10(static_cast<double>(n));
    return xhi - xlo < 1e-9 ? kLeft + pw / 2 : kLeft + pw * (x - xlo) / xspan;
  };
  auto py = [&](double y) { return kTop + ph * (1.0 - (y - ymin) / (ymax - ymin)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" style=\"fill:#ffffff\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" style=\"font:15px sans-serif;text-anchor:middle\">"
      << escape(title) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" style=\"fill:none;stroke:#444444;stroke-width:1\"/>\n";

  for (long n : ns) {
    const double x = px(n);
    svg << "<line x1=\"" << fmt(x, 6) << "\" y1=\"" << kTop + ph << "\" x2=\"" << fmt(x, 6) << "\" y2=\""
        << kTop + ph + 5 << "\" style=\"stroke:#444444\"/>\n";
    svg << "<text x=\"" << fmt(x, 6) << "\" y=\"" << kTop + ph + 20
        << "\" style=\"font:11px sans-serif;text-anchor:middle\">" << n << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double y = ymin + (ymax - ymin) * k / 4.0;
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << fmt(py(y), 6) << "\" x2=\"" << kLeft << "\" y2=\""
        << fmt(py(y), 6) << "\" style=\"stroke:#444444\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt(py(y) + 4, 6)
        << "\" style=\"font:11px sans-serif;text-anchor:end\">" << fmt(y, 3) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10
      << "\" style=\"font:12px sans-serif;text-anchor:middle\">n (log scale)</text>\n";
  svg << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 16 " << kTop + ph / 2
      << ")\" style=\"font:12px sans-serif;text-anchor:middle\">bits per dimension</text>\n";

  for (std::size_t i = 0; i < methods.size(); ++i) {
    const std::string colour = kPalette[i % std::size(kPalette)];
    const auto it = sums.find(methods[i]);
    std::ostringstream points;
    if (it != sums.end()) {
      bool first = true;
      for (const auto& [n, acc] : it->second) {
        points << (first ? "" : " ") << fmt(px(n), 6) << ',' << fmt(py(acc.first / acc.second), 6);
        first = false;
      }
    }
    svg << "<polyline points=\"" << points.str() << "\" style=\"fill:none;stroke:" << colour
        << ";stroke-width:2\"/>\n";
    const double ly = kTop + 16.0 + 18.0 * static_cast<double>(i);
    svg << "<line x1=\"" << kWidth - kRight + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kWidth - kRight + 32
        << "\" y2=\"" << ly - 4 << "\" style=\"stroke:" << colour << ";stroke-width:2\"/>\n";
    svg << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly
        << "\" style=\"font:12px sans-serif\">" << escape(methods[i]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> emit_plots(const BpdReport& report, const std::filesystem::path& out_dir) {
  if (report.rows.empty()) throw Error(ErrorKind::InvalidArgument, "cannot plot an empty report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  std::map<std::tuple<int, int, int>, std::vector<BpdRow>> groups;
  for (const auto& r : report.rows) groups[{r.case_id, r.side, r.components}].push_back(r);

  std::vector<std::filesystem::path> written;
  for (const auto& [key, rows] : groups) {
    const auto [case_id, side, components] = key;
    std::string stem = "bpd_case" + std::to_string(case_id) + "_K" + std::to_string(side);
    std::string title = "Case " + std::to_string(case_id) + ", K = " + std::to_string(side);
    if (components > 0) {
      stem += "_M" + std::to_string(components);
      title += ", M = " + std::to_string(components);
    }
    const auto path = out_dir / (stem + ".svg");
    std::ofstream out(path);
    out << render_svg(rows, title);
    if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
    written.push_back(path);
  }

  const auto csv = out_dir / "report.csv";
  std::ofstream out(csv);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + csv.string());
  write_report_csv(out, report);
  written.push_back(csv);
  return written;
}

}  // namespace wsdiff
