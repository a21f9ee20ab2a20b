#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cesbl/harness.hpp"

namespace cesbl {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

struct Series {
  std::string name;
  std::vector<double> mean, se;  // one entry per sweep point
};

// Sweep points keep their CSV order on a categorical axis, which also copes
// with non-finite values such as snr_db = inf.
void collect(const std::vector<SweepRow>& rows, std::vector<double>& xs,
             std::vector<std::string>& labels, std::vector<Series>& series,
             bool use_nmse) {
  for (const SweepRow& r : rows) {
    std::size_t xi = 0;
    for (; xi < xs.size(); ++xi)
      if (xs[xi] == r.sweep_value || (std::isnan(xs[xi]) && std::isnan(r.sweep_value)))
        break;
    if (xi == xs.size()) {
      xs.push_back(r.sweep_value);
      labels.push_back(fmt(r.sweep_value));
    }
    std::size_t si = 0;
    for (; si < series.size(); ++si)
      if (series[si].name == r.solver) break;
    if (si == series.size()) series.push_back({r.solver, {}, {}});
    Series& s = series[si];
    s.mean.resize(xs.size(), std::nan(""));
    s.se.resize(xs.size(), 0.0);
    s.mean[xi] = use_nmse ? r.nmse_ce_db_mean : r.mu_ad_mean;
    s.se[xi] = use_nmse ? r.nmse_ce_db_se : r.mu_ad_se;
  }
  for (Series& s : series) {
    s.mean.resize(xs.size(), std::nan(""));
    s.se.resize(xs.size(), 0.0);
  }
}

std::string render_svg(const std::vector<std::string>& labels,
                       const std::vector<Series>& series,
                       const std::string& x_title,
                       const std::string& y_title) {
  const double W = 640, H = 440;
  const double ml = 78, mr = 24, mt = 28, mb = 58;
  const double pw = W - ml - mr, ph = H - mt - mb;
  double lo = 1e300, hi = -1e300;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      if (std::isnan(s.mean[i])) continue;
      lo = std::min(lo, s.mean[i] - s.se[i]);
      hi = std::max(hi, s.mean[i] + s.se[i]);
    }
  if (lo > hi) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.06 * (hi - lo);
  lo -= pad;
  hi += pad;
  const std::size_t n = labels.size();
  auto xpos = [&](std::size_t i) {
    return ml + pw * (n == 1 ? 0.5 : (0.06 + 0.88 * i / double(n - 1)));
  };
  auto ypos = [&](double v) { return mt + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  // frame
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
     << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#333\"/>\n";
  // y ticks and grid
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const double y = ypos(v);
    os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + pw
       << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  // x ticks
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xpos(i);
    os << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x
       << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"#333\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << mt + ph + 20
       << "\" text-anchor=\"middle\">" << labels[i] << "</text>\n";
  }
  // axis titles
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 14
     << "\" text-anchor=\"middle\">" << x_title << "</text>\n";
  os << "<text x=\"18\" y=\"" << mt + ph / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << mt + ph / 2
     << ")\">" << y_title << "</text>\n";
  // series
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % 4];
    std::ostringstream pts;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(s.mean[i])) continue;
      pts << xpos(i) << ',' << ypos(s.mean[i]) << ' ';
    }
    os << "<polyline points=\"" << pts.str()
       << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(s.mean[i])) continue;
      const double x = xpos(i);
      const double yc = ypos(s.mean[i]);
      os << "<circle cx=\"" << x << "\" cy=\"" << yc << "\" r=\"3.2\" fill=\""
         << color << "\"/>\n";
      if (s.se[i] > 0.0) {
        const double y0 = ypos(s.mean[i] - s.se[i]);
        const double y1 = ypos(s.mean[i] + s.se[i]);
        os << "<line x1=\"" << x << "\" y1=\"" << y0 << "\" x2=\"" << x
           << "\" y2=\"" << y1 << "\" stroke=\"" << color << "\"/>\n";
        os << "<line x1=\"" << x - 4 << "\" y1=\"" << y0 << "\" x2=\"" << x + 4
           << "\" y2=\"" << y0 << "\" stroke=\"" << color << "\"/>\n";
        os << "<line x1=\"" << x - 4 << "\" y1=\"" << y1 << "\" x2=\"" << x + 4
           << "\" y2=\"" << y1 << "\" stroke=\"" << color << "\"/>\n";
      }
    }
    // legend entry
    const double ly = mt + 16 + 18 * static_cast<double>(si);
    os << "<line x1=\"" << ml + pw - 108 << "\" y1=\"" << ly << "\" x2=\""
       << ml + pw - 84 << "\" y2=\"" << ly << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ml + pw - 78 << "\" y=\"" << ly + 4 << "\">"
       << s.name << "</text>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace

std::vector<std::string> emit_plots(const std::vector<SweepRow>& rows,
                                    const std::string& dir) {
  if (rows.empty()) throw config_error("emit_plots: empty result set");
  const std::string x_title = rows.front().sweep_param;
  std::vector<std::string> written;
  const struct {
    const char* metric;
    bool use_nmse;
  } metrics[] = {{"mu_ad", false}, {"nmse_ce_db", true}};
  for (const auto& m : metrics) {
    std::vector<double> xs;
    std::vector<std::string> labels;
    std::vector<Series> series;
    collect(rows, xs, labels, series, m.use_nmse);
    const std::string path = dir + "/" + m.metric + ".svg";
    std::ofstream os(path);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    os << render_svg(labels, series, x_title, m.metric);
    if (!os) throw io_error("write failed on '" + path + "'");
    written.push_back(path);
  }
  return written;
}

}  // namespace cesbl
