#include "modmd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace modmd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

struct Series {
  std::string name;
  std::string color;
  std::vector<double> x, mean, lo, hi;
};

// Log-log line plot with a shaded +-1 std band per series.
std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Series>& series) {
  const double W = 640, H = 420, ml = 70, mr = 130, mt = 40, mb = 55;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.x[i] > 0) || !(s.mean[i] > 0)) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, std::max(s.lo[i], s.mean[i] * 1e-3));
      ymax = std::max(ymax, s.hi[i]);
    }
  }
  if (!(xmin < INFINITY)) xmin = 1, xmax = 10, ymin = 1e-6, ymax = 1;
  double lx0 = std::floor(std::log10(xmin)), lx1 = std::ceil(std::log10(xmax));
  double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax));
  if (lx1 <= lx0) lx1 = lx0 + 1;
  if (ly1 <= ly0) ly1 = ly0 + 1;
  const auto px = [&](double x) { return ml + (std::log10(x) - lx0) / (lx1 - lx0) * (W - ml - mr); };
  const auto py = [&](double y) {
    y = std::clamp(y, std::pow(10.0, ly0), std::pow(10.0, ly1));
    return H - mb - (std::log10(y) - ly0) / (ly1 - ly0) * (H - mt - mb);
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\""
    << H - mt - mb << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double e = lx0; e <= lx1; e += 1) {
    const double x = px(std::pow(10.0, e));
    o << "<line x1=\"" << x << "\" y1=\"" << H - mb << "\" x2=\"" << x << "\" y2=\"" << H - mb + 5
      << "\" stroke=\"black\"/><text x=\"" << x << "\" y=\"" << H - mb + 18
      << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
  }
  for (double e = ly0; e <= ly1; e += 1) {
    const double y = py(std::pow(10.0, e));
    o << "<line x1=\"" << ml - 5 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
      << "\" stroke=\"black\"/><text x=\"" << ml - 8 << "\" y=\"" << y + 4
      << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  }
  o << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel
    << "</text>\n";
  o << "<text x=\"16\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (mt + H - mb) / 2 << ")\">" << ylabel << "</text>\n";

  int legend = 0;
  for (const auto& s : series) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.x[i] > 0 && s.mean[i] > 0) idx.push_back(i);
    if (!idx.empty()) {
      std::ostringstream band;
      for (std::size_t i : idx) band << px(s.x[i]) << "," << py(std::max(s.hi[i], s.mean[i])) << " ";
      for (auto it = idx.rbegin(); it != idx.rend(); ++it)
        band << px(s.x[*it]) << "," << py(s.lo[*it] > 0 ? s.lo[*it] : std::pow(10.0, ly0)) << " ";
      o << "<polygon points=\"" << band.str() << "\" fill=\"" << s.color << "\" fill-opacity=\"0.18\"/>\n";
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i : idx) o << px(s.x[i]) << "," << py(s.mean[i]) << " ";
      o << "\"/>\n";
      for (std::size_t i : idx)
        o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.mean[i]) << "\" r=\"3\" fill=\"" << s.color
          << "\"/>\n";
    }
    const double ly = mt + 15 + 18 * legend++;
    o << "<line x1=\"" << W - mr + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - mr + 36 << "\" y2=\"" << ly
      << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/><text x=\"" << W - mr + 42 << "\" y=\""
      << ly + 4 << "\">" << s.name << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

json manifest_base(const ExperimentConfig& c, const std::string& kind) {
  json m;
  m["manifest_version"] = 1;
  m["tool"] = "modmd";
  m["version"] = kVersion;
  m["run"] = kind;
  m["config"] = to_json(c);
  m["seed_derivation"] =
      "splitmix64 chain over (master seed, stream tag, point, trial); stream tags: 1 observables, "
      "2 noise, 3 shadows, 4 baseline noise, 5 baseline shadows";
  m["reference_dt"] = {{"tfim_convergence", 0.08}, {"molecular_noise", 0.33},
                       {"note", "published values assume an unstated spectral shift; runs use the derived dt"}};
  m["system_size_note"] = "dense simulation; TFIM runs at L <= 12 instead of the published L = 15";
  m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                       "." + std::to_string(EIGEN_MINOR_VERSION);
#ifdef __VERSION__
  m["compiler"] = __VERSION__;
#endif
  return m;
}

const char* kSweepSchema = R"js({
  "results.csv": {
    "row_type": "raw for one (point, trial, method); mean, std or median for aggregates over trials",
    "sweep": "sweep-k | sweep-gap | sweep-noise",
    "point": "index into the swept grid",
    "param": "swept value: K, transverse field h, or noise epsilon",
    "x": "plotted abscissa: K, spectral gap E1-E0, or epsilon",
    "K": "number of Hankel columns minus one",
    "d": "Hankel block depth",
    "trial": "trial index on raw rows; number of valid trials on aggregate rows",
    "method": "MODMD (full observable pool) or ODMD (identity observable only)",
    "status": "ok | shortfall | degenerate (raw rows); empty on aggregate rows",
    "residual": "relative least-squares residual ||X' - A X||_F / ||X'||_F",
    "rank": "retained singular values",
    "E{n}_est": "estimated level n in physical energy units (nan when not found)",
    "E{n}_exact": "level n from exact diagonalization",
    "err{n}": "|E{n}_est - E{n}_exact| on raw rows; the aggregate statistic on aggregate rows"
  },
  "timings.csv": "wall-clock seconds per raw row; not covered by the determinism contract",
  "manifest.json": "resolved config, seed derivation and versions; pass it back with --config to replay",
  "plot_level{n}.svg": "mean error vs x with +-1 std band, one file per tracked level"
})js";

const char* kForecastSchema = R"js({
  "forecast.csv": {
    "row_type": "raw for one (k*, trial); mean or std over trials",
    "point": "index into the k* grid",
    "kstar": "last fitted sample index",
    "K": "Hankel columns minus one", "d": "Hankel block depth",
    "trial": "trial index on raw rows; valid trial count on aggregate rows",
    "status": "ok | degenerate",
    "mean_rmse": "RMSE over the horizon averaged over observables",
    "rmse_i{j}": "RMSE over the horizon for observable j"
  },
  "forecast_series.csv": "trial 0 predictions: kstar, step, time index, observable, predicted, exact",
  "timings.csv": "wall-clock seconds per raw row; not covered by the determinism contract",
  "manifest.json": "resolved config, seed derivation and versions",
  "forecast_rmse.svg": "mean RMSE vs k* with +-1 std band"
})js";

}  // namespace

std::string results_csv(const SweepResult& r) {
  std::ostringstream o;
  o << "row_type,sweep,point,param,x,K,d,trial,method,status,residual,rank";
  for (int n = 0; n < r.n_eig; ++n) o << ",E" << n << "_est,E" << n << "_exact,err" << n;
  o << "\n";
  for (const auto& row : r.rows) {
    o << "raw," << r.sweep << "," << row.point << "," << num(row.param) << "," << num(row.x) << "," << row.K
      << "," << row.d << "," << row.trial << "," << row.method << "," << row.status << ","
      << num(row.residual) << "," << row.rank;
    for (int n = 0; n < r.n_eig; ++n)
      o << "," << num(row.estimates[n]) << "," << num(row.exact[n]) << "," << num(row.errors[n]);
    o << "\n";
  }
  const auto agg = aggregate(r);
  for (const std::string stat : {"mean", "std", "median"}) {
    for (std::size_t i = 0; i < agg.size(); i += r.n_eig) {
      const AggregateRow& a = agg[i];
      o << stat << "," << r.sweep << "," << a.point << "," << num(a.param) << "," << num(a.x) << "," << a.K
        << "," << a.d << "," << a.n_valid << "," << a.method << ",,,";
      for (int n = 0; n < r.n_eig; ++n) {
        const AggregateRow& b = agg[i + n];
        const double v = stat == "mean" ? b.mean : stat == "std" ? b.stddev : b.median;
        o << ",,," << num(v);
      }
      o << "\n";
    }
  }
  return o.str();
}

std::string forecast_csv(const ForecastResult& r) {
  std::ostringstream o;
  const int I = r.rows.empty() ? 0 : static_cast<int>(r.rows.front().rmse.size());
  o << "row_type,point,kstar,K,d,trial,status,mean_rmse";
  for (int i = 0; i < I; ++i) o << ",rmse_i" << i;
  o << "\n";
  int P = 0;
  for (const auto& row : r.rows) {
    P = std::max(P, row.point + 1);
    o << "raw," << row.point << "," << row.kstar << "," << row.K << "," << row.d << "," << row.trial << ","
      << row.status << "," << num(row.mean_rmse);
    for (double v : row.rmse) o << "," << num(v);
    o << "\n";
  }
  for (int pt = 0; pt < P; ++pt) {
    std::vector<const ForecastRow*> g;
    for (const auto& row : r.rows)
      if (row.point == pt && std::isfinite(row.mean_rmse)) g.push_back(&row);
    if (g.empty()) continue;
    const auto stats = [&](auto get) {
      double s = 0;
      for (auto* x : g) s += get(*x);
      const double mean = s / g.size();
      double ss = 0;
      for (auto* x : g) ss += (get(*x) - mean) * (get(*x) - mean);
      return std::pair<double, double>{mean, g.size() > 1 ? std::sqrt(ss / (g.size() - 1)) : 0.0};
    };
    for (int which = 0; which < 2; ++which) {
      const auto* f = g.front();
      o << (which == 0 ? "mean" : "std") << "," << pt << "," << f->kstar << "," << f->K << "," << f->d << ","
        << g.size() << ",,";
      const auto m = stats([](const ForecastRow& x) { return x.mean_rmse; });
      o << num(which == 0 ? m.first : m.second);
      for (int i = 0; i < I; ++i) {
        const auto s = stats([i](const ForecastRow& x) { return x.rmse[i]; });
        o << "," << num(which == 0 ? s.first : s.second);
      }
      o << "\n";
    }
  }
  return o.str();
}

OutputFiles emit_outputs(const SweepResult& r, const ExperimentConfig& c, const std::string& dir) {
  const fs::path base = prepare_dir(dir);
  OutputFiles files;
  const auto put = [&](const std::string& name, const std::string& text) {
    write_file(base / name, text);
    files.paths.push_back((base / name).string());
  };
  put("results.csv", results_csv(r));
  put("schema.json", kSweepSchema);

  std::ostringstream t;
  t << "point,trial,method,wall_seconds\n";
  for (const auto& row : r.rows)
    t << row.point << "," << row.trial << "," << row.method << "," << num(row.wall_seconds) << "\n";
  put("timings.csv", t.str());

  const auto agg = aggregate(r);
  for (int level : r.tracked_levels) {
    std::vector<Series> series;
    for (const auto& [method, color] : {std::pair{"MODMD", "#1f77b4"}, std::pair{"ODMD", "#ff7f0e"}}) {
      Series s;
      s.name = method;
      s.color = color;
      for (const auto& a : agg) {
        if (a.method != method || a.level != level) continue;
        s.x.push_back(a.x);
        s.mean.push_back(a.mean);
        s.lo.push_back(a.mean - a.stddev);
        s.hi.push_back(a.mean + a.stddev);
      }
      series.push_back(std::move(s));
    }
    put("plot_level" + std::to_string(level) + ".svg",
        svg_plot(r.sweep + ": |dE" + std::to_string(level) + "|", r.x_name, "mean absolute error", series));
  }

  json m = manifest_base(c, r.sweep);
  m["resolved"] = {{"workers", resolve_workers(c.workers)}, {"dt_per_point", r.point_dt}};
  files.paths.push_back((base / "manifest.json").string());
  m["files"] = files.paths;
  write_file(base / "manifest.json", m.dump(2) + "\n");
  return files;
}

OutputFiles emit_outputs(const ForecastResult& r, const ExperimentConfig& c, const std::string& dir) {
  const fs::path base = prepare_dir(dir);
  OutputFiles files;
  const auto put = [&](const std::string& name, const std::string& text) {
    write_file(base / name, text);
    files.paths.push_back((base / name).string());
  };
  put("forecast.csv", forecast_csv(r));
  put("schema.json", kForecastSchema);

  std::ostringstream s;
  s << "kstar,step,k,observable,predicted,exact\n";
  for (const auto& ser : r.series)
    for (Eigen::Index j = 0; j < ser.predicted.cols(); ++j)
      for (Eigen::Index i = 0; i < ser.predicted.rows(); ++i)
        s << ser.kstar << "," << j + 1 << "," << ser.kstar + j + 1 << "," << i << "," << num(ser.predicted(i, j))
          << "," << num(ser.exact(i, j)) << "\n";
  put("forecast_series.csv", s.str());

  std::ostringstream t;
  t << "point,trial,wall_seconds\n";
  for (const auto& row : r.rows) t << row.point << "," << row.trial << "," << num(row.wall_seconds) << "\n";
  put("timings.csv", t.str());

  Series ser;
  ser.name = "MODMD";
  ser.color = "#1f77b4";
  int P = 0;
  for (const auto& row : r.rows) P = std::max(P, row.point + 1);
  for (int pt = 0; pt < P; ++pt) {
    std::vector<double> v;
    int ks = 0;
    for (const auto& row : r.rows)
      if (row.point == pt && std::isfinite(row.mean_rmse)) v.push_back(row.mean_rmse), ks = row.kstar;
    if (v.empty()) continue;
    double mean = 0;
    for (double x : v) mean += x;
    mean /= v.size();
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
    ser.x.push_back(ks);
    ser.mean.push_back(mean);
    ser.lo.push_back(mean - sd);
    ser.hi.push_back(mean + sd);
  }
  put("forecast_rmse.svg", svg_plot("forecast RMSE over " + std::to_string(r.horizon) + " steps", "k*",
                                    "mean RMSE", {ser}));

  json m = manifest_base(c, "forecast");
  m["resolved"] = {{"workers", resolve_workers(c.workers)}, {"dt", r.dt}};
  files.paths.push_back((base / "manifest.json").string());
  m["files"] = files.paths;
  write_file(base / "manifest.json", m.dump(2) + "\n");
  return files;
}

}  // namespace modmd
