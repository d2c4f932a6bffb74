#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "solvers.hpp"
#include "tensor.hpp"

namespace msmp {

namespace detail {

// Diverging blue-white-red map over [-1, 1].
inline void diverging_rgb(double v, unsigned char out[3]) {
  v = std::isfinite(v) ? std::max(-1.0, std::min(1.0, v)) : 0.0;
  double r, g, b;
  if (v < 0) {
    const double a = 1.0 + v;  // 0 at -1, 1 at 0
    r = 0.23 + 0.77 * a;
    g = 0.30 + 0.70 * a;
    b = 0.75 + 0.25 * a;
  } else {
    const double a = 1.0 - v;
    r = 0.71 + 0.29 * a;
    g = 0.02 + 0.98 * a;
    b = 0.15 + 0.85 * a;
  }
  out[0] = static_cast<unsigned char>(std::lround(255.0 * r));
  out[1] = static_cast<unsigned char>(std::lround(255.0 * g));
  out[2] = static_cast<unsigned char>(std::lround(255.0 * b));
}

}  // namespace detail

// Binary PPM (P6) with x horizontal and t vertical (t = 0 on top); values
// mapped through a diverging palette over [-scale, scale]. The comment line
// carries metadata (the relative error annotation).
inline void write_ppm(const std::string& path, const Trajectory& t, int64_t channel,
                      const Trajectory* reference, double scale, const std::string& comment) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  check(f != nullptr, "cannot open " + path);
  std::fprintf(f, "P6\n# %s\n%lld %lld\n255\n", comment.c_str(),
               static_cast<long long>(t.n_x), static_cast<long long>(t.n_t));
  std::vector<unsigned char> row(static_cast<size_t>(3 * t.n_x));
  for (int64_t m = 0; m < t.n_t; ++m) {
    for (int64_t i = 0; i < t.n_x; ++i) {
      double v = t.at(m, i, channel);
      if (reference) v -= reference->at(m, i, channel);
      detail::diverging_rgb(scale > 0 ? v / scale : 0.0, &row[static_cast<size_t>(3 * i)]);
    }
    check(std::fwrite(row.data(), 1, row.size(), f) == row.size(), "write failure: " + path);
  }
  std::fclose(f);
}

struct HeatmapFiles {
  std::vector<std::string> images;
  std::string csv;
};

// Truth, prediction, and pointwise-error heatmaps per channel plus one CSV
// carrying the raw grids at full precision. RE is annotated in the image
// comments and the CSV header.
inline HeatmapFiles emit_heatmaps(const std::string& dir, const std::string& base,
                                  const Trajectory& truth, const Trajectory& pred, double re) {
  check(truth.n_t == pred.n_t && truth.n_x == pred.n_x && truth.n_ch == pred.n_ch,
        "emit_heatmaps: shape mismatch");
  HeatmapFiles out;
  char rebuf[64];
  std::snprintf(rebuf, sizeof rebuf, "RE=%.6g", re);
  for (int64_t c = 0; c < truth.n_ch; ++c) {
    double vmax = 0.0, emax = 0.0;
    for (int64_t m = 0; m < truth.n_t; ++m)
      for (int64_t i = 0; i < truth.n_x; ++i) {
        vmax = std::max({vmax, std::fabs(truth.at(m, i, c)),
                         std::isfinite(pred.at(m, i, c)) ? std::fabs(pred.at(m, i, c)) : 0.0});
        const double e = pred.at(m, i, c) - truth.at(m, i, c);
        if (std::isfinite(e)) emax = std::max(emax, std::fabs(e));
      }
    const std::string stem = dir + "/" + base + "_ch" + std::to_string(c);
    write_ppm(stem + "_truth.ppm", truth, c, nullptr, vmax, rebuf);
    write_ppm(stem + "_pred.ppm", pred, c, nullptr, vmax, rebuf);
    write_ppm(stem + "_error.ppm", pred, c, &truth, emax, rebuf);
    out.images.push_back(stem + "_truth.ppm");
    out.images.push_back(stem + "_pred.ppm");
    out.images.push_back(stem + "_error.ppm");
  }
  out.csv = dir + "/" + base + "_grids.csv";
  std::FILE* f = std::fopen(out.csv.c_str(), "w");
  check(f != nullptr, "cannot open " + out.csv);
  std::fprintf(f, "# %s\n", rebuf);
  std::fprintf(f, "t_index,x_index,channel,truth,pred,error\n");
  for (int64_t m = 0; m < truth.n_t; ++m)
    for (int64_t i = 0; i < truth.n_x; ++i)
      for (int64_t c = 0; c < truth.n_ch; ++c)
        std::fprintf(f, "%lld,%lld,%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(m),
                     static_cast<long long>(i), static_cast<long long>(c), truth.at(m, i, c),
                     pred.at(m, i, c), pred.at(m, i, c) - truth.at(m, i, c));
  std::fclose(f);
  return out;
}

struct GridCsv {
  std::vector<double> truth, pred, error;  // indexed [t][x][ch] flat
  int64_t rows = 0;
};

inline GridCsv load_grid_csv(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "r");
  check(f != nullptr, "cannot open " + path);
  GridCsv g;
  char line[512];
  while (std::fgets(line, sizeof line, f)) {
    if (line[0] == '#' || line[0] == 't') continue;
    long long m, i, c;
    double tv, pv, ev;
    if (std::sscanf(line, "%lld,%lld,%lld,%lg,%lg,%lg", &m, &i, &c, &tv, &pv, &ev) == 6) {
      g.truth.push_back(tv);
      g.pred.push_back(pv);
      g.error.push_back(ev);
      ++g.rows;
    }
  }
  std::fclose(f);
  return g;
}

}  // namespace msmp
