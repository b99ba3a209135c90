#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ccgym/error.hpp"
#include "ccgym/harness.hpp"

namespace ccgym {

namespace fs = std::filesystem;

namespace {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

/// Bucket means so long traces stay readable.
Series downsample(std::string label, const std::vector<double>& x,
                  const std::vector<double>& y, int max_points) {
  Series s;
  s.label = std::move(label);
  const std::size_t n = y.size();
  const std::size_t buckets = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, max_points)));
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t lo = b * n / buckets;
    const std::size_t hi = (b + 1) * n / buckets;
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      sx += x[i];
      sy += y[i];
    }
    const double m = static_cast<double>(hi - lo);
    s.x.push_back(sx / m);
    s.y.push_back(sy / m);
  }
  return s;
}

std::string escape(std::string_view s) {
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

std::string tick_label(double v) {
  std::ostringstream o;
  o.precision(4);
  o << v;
  return o.str();
}

std::string render_chart(std::string_view title, std::string_view xlabel,
                         std::string_view ylabel, const std::vector<Series>& series) {
  const double width = 900, height = 520;
  const double left = 80, right = 220, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
    << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    o << "<line x1=\"" << sx(xv) << "\" y1=\"" << top + ph << "\" x2=\"" << sx(xv) << "\" y2=\""
      << top + ph + 5 << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << sx(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << tick_label(xv) << "</text>\n";
    o << "<line x1=\"" << left - 5 << "\" y1=\"" << sy(yv) << "\" x2=\"" << left << "\" y2=\""
      << sy(yv) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << left - 8 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">"
      << tick_label(yv) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15
    << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  o << "<text transform=\"translate(18," << top + ph / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      o << sx(s.x[i]) << "," << sy(s.y[i]) << " ";
    }
    o << "\"/>\n";
    const double ly = top + 12 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 36
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

struct LoadedRun {
  std::string label;
  TraceTable trace;
};

std::string summary_value(const std::vector<std::pair<std::string, std::string>>& kv,
                          std::string_view key) {
  for (const auto& [k, v] : kv) {
    if (k == key) return v;
  }
  return {};
}

}  // namespace

std::vector<fs::path> emit_plots(const std::vector<fs::path>& run_dirs,
                                 const fs::path& out_dir, const PlotOptions& options) {
  if (run_dirs.empty()) throw ArgumentError("emit_plots: no run directories given");

  std::vector<LoadedRun> runs;
  for (const auto& dir : run_dirs) {
    LoadedRun run;
    run.trace = read_trace(dir / "trace.csv");
    if (run.trace.rows.empty()) {
      throw ArgumentError((dir / "trace.csv").string() + ": trace has no data rows");
    }
    std::string label = dir.filename().string();
    if (fs::exists(dir / "summary.txt")) {
      const auto kv = read_summary(dir / "summary.txt");
      const std::string l = summary_value(kv, "label");
      const std::string seed = summary_value(kv, "seed");
      if (!l.empty()) label = seed.empty() ? l : l + " seed " + seed;
    }
    run.label = label;
    for (const char* required : {"step", "reward"}) run.trace.column(required);
    runs.push_back(std::move(run));
  }

  std::string queue_port = options.queue_port;
  if (queue_port.empty()) {
    const auto& t = runs.front().trace;
    double best = -1.0;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (t.columns[c].rfind("qmean_", 0) != 0) continue;
      double sum = 0.0;
      for (const auto& r : t.rows) sum += r[c];
      if (sum > best) {
        best = sum;
        queue_port = t.columns[c].substr(6);
      }
    }
    if (queue_port.empty()) throw LookupError("trace has no qmean_* columns");
  }

  std::vector<Series> reward, bandwidth, queue;
  for (const auto& run : runs) {
    const auto steps = run.trace.column_values("step");
    reward.push_back(downsample(run.label, steps, run.trace.column_values("reward"),
                                options.max_points));
    bool any_bw = false;
    for (const auto& col : run.trace.columns) {
      if (col.rfind("bw_", 0) != 0 || col == "bw_term") continue;
      any_bw = true;
      auto bw = run.trace.column_values(col);
      for (double& v : bw) v /= 1e6;
      bandwidth.push_back(downsample(run.label + " " + col.substr(3), steps, bw,
                                     options.max_points));
    }
    if (!any_bw) throw LookupError("trace has no per-host bandwidth columns");
    queue.push_back(downsample(run.label, steps,
                               run.trace.column_values("qmean_" + queue_port),
                               options.max_points));
  }

  const std::vector<std::pair<std::string, std::string>> files{
      {"reward.svg", render_chart("Reward per step", "step", "reward", reward)},
      {"bandwidth.svg", render_chart("Host egress bandwidth", "step", "Mbit/s", bandwidth)},
      {"queue.svg",
       render_chart("Mean queue at " + queue_port, "step", "bytes", queue)},
  };

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  for (const auto& [name, body] : files) {
    const fs::path path = out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) throw IoError("cannot write " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace ccgym
