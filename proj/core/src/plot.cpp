#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fracstep/harness.hpp"

namespace fracstep::harness {

namespace {

constexpr double kWidth = 900.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr std::size_t kMaxPoints = 4000;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", std::fabs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (raw <= step) break;
  }
  std::vector<double> ticks;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) ticks.push_back(v);
  return ticks;
}

// Min/max per bucket keeps the envelope of dense or chattering signals.
std::vector<std::size_t> decimate(const std::vector<double>& y, std::size_t count) {
  std::vector<std::size_t> idx;
  if (count <= kMaxPoints) {
    for (std::size_t k = 0; k < count; ++k) idx.push_back(k);
    return idx;
  }
  const std::size_t buckets = kMaxPoints / 2;
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t lo = b * count / buckets;
    const std::size_t hi = std::max(lo + 1, (b + 1) * count / buckets);
    std::size_t kmin = lo, kmax = lo;
    for (std::size_t k = lo; k < hi; ++k) {
      if (y[k] < y[kmin]) kmin = k;
      if (y[k] > y[kmax]) kmax = k;
    }
    idx.push_back(std::min(kmin, kmax));
    if (kmin != kmax) idx.push_back(std::max(kmin, kmax));
  }
  if (idx.back() != count - 1) idx.push_back(count - 1);
  return idx;
}

void write_file(const std::filesystem::path& file, const std::string& body) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << body;
}

}  // namespace

void write_line_chart(const std::vector<Series>& series, const std::string& title, const std::filesystem::path& file) {
  if (series.empty()) throw ChannelError("plot: no series to draw");
  double t0 = INFINITY, t1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    const std::size_t n = std::min(s.t->size(), s.y->size());
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite((*s.y)[k])) continue;
      t0 = std::min(t0, (*s.t)[k]);
      t1 = std::max(t1, (*s.t)[k]);
      y0 = std::min(y0, (*s.y)[k]);
      y1 = std::max(y1, (*s.y)[k]);
    }
  }
  if (!(t1 > t0)) t1 = t0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 1.0;
    y1 += 1.0;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto X = [&](double t) { return kLeft + (t - t0) / (t1 - t0) * pw; };
  auto Y = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title)
     << "</text>\n";
  for (double v : nice_ticks(t0, t1)) {
    os << "<line x1=\"" << num(X(v)) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(X(v)) << "\" y2=\""
       << num(kTop + ph) << "\" stroke=\"#e5e5e5\"/>\n";
    os << "<text x=\"" << num(X(v)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
       << tick_label(v) << "</text>\n";
  }
  for (double v : nice_ticks(y0, y1)) {
    os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(Y(v)) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
       << num(Y(v)) << "\" stroke=\"#e5e5e5\"/>\n";
    os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(Y(v) + 4) << "\" text-anchor=\"end\">" << tick_label(v)
       << "</text>\n";
  }
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 10) << "\" text-anchor=\"middle\">t (s)</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    const std::size_t n = std::min(s.t->size(), s.y->size());
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    bool first = true;
    for (std::size_t k : decimate(*s.y, n)) {
      if (!std::isfinite((*s.y)[k])) continue;
      if (!first) os << ' ';
      os << num(X((*s.t)[k])) << ',' << num(Y((*s.y)[k]));
      first = false;
    }
    os << "\"/>\n";
    const double ly = kTop + 12 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << num(kLeft + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 36)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(kLeft + pw + 42) << "\" y=\"" << num(ly + 4) << "\">" << esc(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  write_file(file, os.str());
}

void emit_plot(const Table& table, const std::vector<std::string>& channels, const std::filesystem::path& file) {
  if (channels.empty()) throw ChannelError("plot: channel list is empty");
  std::vector<Series> series;
  std::string title;
  for (const auto& ch : channels) {
    series.push_back({ch, &table.column("t"), &table.column(ch)});
    title += (title.empty() ? "" : ", ") + ch;
  }
  write_line_chart(series, title, file);
}

void emit_phase3d(const Table& table, const std::filesystem::path& file) {
  const auto& a = table.column("x1");
  const auto& b = table.column("x2");
  const auto& c = table.column("x3");
  const std::size_t n = a.size();
  if (n == 0) throw ChannelError("phase3d: empty trajectory");

  // normalise each axis to [-1, 1], then rotate about the vertical and tilt
  auto range = [](const std::vector<double>& v) {
    double lo = INFINITY, hi = -INFINITY;
    for (double x : v) {
      if (std::isfinite(x)) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    }
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    }
    return std::pair{lo, hi};
  };
  const auto ra = range(a), rb = range(b), rc = range(c);
  auto unit = [](double v, std::pair<double, double> r) { return 2.0 * (v - r.first) / (r.second - r.first) - 1.0; };
  const double az = 35.0 * std::numbers::pi / 180.0;
  const double el = 25.0 * std::numbers::pi / 180.0;
  auto project = [&](double u, double v, double w) {
    const double sx = u * std::cos(az) - v * std::sin(az);
    const double depth = u * std::sin(az) + v * std::cos(az);
    const double sy = w * std::cos(el) - depth * std::sin(el);
    return std::pair{kWidth / 2 + 170.0 * sx, kHeight / 2 + 30.0 - 150.0 * sy};
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight + 120
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">x1, x2, x3</text>\n";
  // bounding box edges
  for (int m = 0; m < 8; ++m) {
    for (int bit = 0; bit < 3; ++bit) {
      if (m & (1 << bit)) continue;
      const int q = m | (1 << bit);
      auto s = [](int k, int i) { return (k >> i) & 1 ? 1.0 : -1.0; };
      const auto p0 = project(s(m, 0), s(m, 1), s(m, 2));
      const auto p1 = project(s(q, 0), s(q, 1), s(q, 2));
      os << "<line x1=\"" << num(p0.first) << "\" y1=\"" << num(p0.second) << "\" x2=\"" << num(p1.first)
         << "\" y2=\"" << num(p1.second) << "\" stroke=\"#d0d0d0\"/>\n";
    }
  }
  const char* names[] = {"x1", "x2", "x3"};
  const std::pair<double, double>* ranges[] = {&ra, &rb, &rc};
  for (int i = 0; i < 3; ++i) {
    double e[3] = {-1.0, -1.0, -1.0};
    e[i] = 1.12;
    const auto p = project(e[0], e[1], e[2]);
    os << "<text x=\"" << num(p.first) << "\" y=\"" << num(p.second) << "\" text-anchor=\"middle\">" << names[i] << " ["
       << tick_label(ranges[i]->first) << ", " << tick_label(ranges[i]->second) << "]</text>\n";
  }
  os << "<polyline fill=\"none\" stroke=\"" << kPalette[0] << "\" stroke-width=\"0.8\" points=\"";
  const std::size_t stride = std::max<std::size_t>(1, n / (4 * kMaxPoints));
  bool first = true;
  for (std::size_t k = 0; k < n; k += stride) {
    if (!std::isfinite(a[k]) || !std::isfinite(b[k]) || !std::isfinite(c[k])) continue;
    const auto p = project(unit(a[k], ra), unit(b[k], rb), unit(c[k], rc));
    if (!first) os << ' ';
    os << num(p.first) << ',' << num(p.second);
    first = false;
  }
  os << "\"/>\n</svg>\n";
  write_file(file, os.str());
}

}  // namespace fracstep::harness
