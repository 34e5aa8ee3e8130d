#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "srzoo/analyze.hpp"
#include "srzoo/tensor.hpp"

namespace srzoo {

// One table row; absent cells stay unset. Units follow the report header:
// seconds, millions of params, GMACs, millions of activations, MB.
struct MetricsRow {
  std::string team;
  std::optional<double> psnr_val;
  std::optional<double> psnr_test;
  std::optional<double> runtime_s;
  std::optional<double> params_M;
  std::optional<double> flops_G;
  std::optional<double> activations_M;
  std::optional<double> memory_M;
  std::optional<int64_t> conv_count;
  bool ranked = false;
};

// AIM 2020 efficient SR challenge, track 1 results. Cells the organizers could
// not verify (marked with * in the report) are left absent.
inline std::vector<MetricsRow> builtin_fixture() {
  auto row = [](std::string team, std::optional<double> pv, std::optional<double> pt,
                std::optional<double> rt, std::optional<double> pm, std::optional<double> fl,
                std::optional<double> ac, std::optional<double> mem,
                std::optional<int64_t> conv, bool ranked) {
    MetricsRow r;
    r.team = std::move(team);
    r.psnr_val = pv;
    r.psnr_test = pt;
    r.runtime_s = rt;
    r.params_M = pm;
    r.flops_G = fl;
    r.activations_M = ac;
    r.memory_M = mem;
    r.conv_count = conv;
    r.ranked = ranked;
    return r;
  };
  const std::optional<double> none;
  const std::optional<int64_t> noi;
  return {
      row("NJU_MCG", 29.04, 28.75, 0.037, 0.433, 27.10, 112.03, 200, 64, true),
      row("AiriA_CG", 29.00, 28.70, 0.037, 0.687, 44.98, 118.49, 168, 33, true),
      row("UESTC-MediaLab", 29.01, 28.70, 0.060, 0.461, 30.06, 219.61, 146, 57, true),
      row("XPixel", 29.01, 28.70, 0.066, 0.272, 32.19, 270.53, 311, 121, true),
      row("HaiYun", 29.09, 28.78, 0.058, 0.777, 49.67, 132.31, 225, 104, true),
      row("IPCV_IITM", 29.10, 28.68, 0.064, 0.761, 50.85, 130.41, 229, 59, true),
      row("404NotFound", 29.01, 28.70, 0.073, 0.599, 39.36, 170.06, 271, 90, true),
      row("MDISL-lab", 29.01, 28.68, 0.067, 0.660, 42.40, 149.09, 516, 61, true),
      row("MLVC", 29.00, 28.72, 0.104, 0.441, 27.11, 212.24, 112, 159, true),
      row("XMUlab", 29.00, 28.77, 0.078, 0.691, 53.62, 184.74, 468, 72, true),
      row("MCML-Yonsei", 29.01, 28.66, 0.070, 1.289, 84.43, 188.74, 798, 68, true),
      row("LMSR", 29.00, 28.71, none, none, none, none, none, noi, false),
      row("ZJUESR2020", 29.04, 28.74, 0.105, 0.516, 54.38, 225.44, 594, 42, true),
      row("SC-CVLAB", 29.01, 28.72, 0.157, 0.353, 26.96, 302.30, 595, 91, true),
      row("HiImageTeam", 29.01, 28.68, 0.153, 0.530, 90.11, 325.05, 378, 101, true),
      row("SAMSUNG_TOR_AIC", 28.98, 28.71, 0.240, 0.558, 31.88, 576.45, 477, 59, true),
      row("neptuneai", 29.14, 28.84, 0.217, 1.227, 147.72, 535.82, 597, 45, true),
      row("lyl", 29.44, 29.13, none, none, none, none, none, noi, false),
      row("CET_CVLab", 29.00, 28.74, 5.00, none, none, none, none, noi, false),
      row("wozhu", 28.98, none, none, none, none, none, none, noi, false),
      row("InnoPeak_SR", 28.93, 28.60, 0.053, 0.361, 81.72, 145.75, 66, 35, false),
      row("Summer", 28.87, 28.54, 0.043, 0.488, 31.82, 125.30, 227, 35, false),
      row("Zhang9678", 28.78, 28.50, none, none, none, none, none, noi, false),
      row("H-ZnCa", 28.69, 28.42, 0.045, 0.364, 32.01, 170.45, 299, 67, false),
      row("MLP_SR", 27.89, 27.77, 1.313, 0.047, none, none, 1064, noi, false),
      row("IMDN", 29.13, 28.78, 0.050, 0.893, 58.53, 154.14, 120, 43, false),
      row("MSRResNet", 29.00, 28.70, 0.114, 1.517, 166.36, 292.55, 610, 37, false),
  };
}

enum class RankTies { competition, average };

// 1-based ranks, smallest value first. Competition ranking gives tied values
// their lowest position (1,1,3,...); average ranking gives the midpoint and is
// what rank correlation uses.
inline std::vector<double> rank_metric(const std::vector<double>& v,
                                       RankTies ties = RankTies::competition) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = ties == RankTies::competition ? static_cast<double>(i + 1)
                                                   : (static_cast<double>(i + j) / 2.0 + 1.0);
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// Spearman rank-order correlation: Pearson correlation of average ranks.
// Throws DataError when either input is constant (ranks have no variance).
inline double srocc(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("srocc: size mismatch");
  if (a.size() < 2) throw DataError("srocc: need at least 2 points");
  const auto ra = rank_metric(a, RankTies::average);
  const auto rb = rank_metric(b, RankTies::average);
  const size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double num = 0.0, da = 0.0, db = 0.0;
  for (size_t i = 0; i < n; ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0.0 || db == 0.0) throw DataError("srocc: constant input");
  return num / (std::sqrt(da) * std::sqrt(db));
}

struct RankCorrelations {
  int rows_used = 0;
  double params = 0.0;
  double flops = 0.0;
  double activations = 0.0;
  double memory = 0.0;
};

// Rank correlation of each efficiency metric against measured runtime, over
// the rows where runtime and all four metrics are present.
inline RankCorrelations correlate_with_runtime(const std::vector<MetricsRow>& rows) {
  std::vector<double> rt, pm, fl, ac, mem;
  for (const auto& r : rows) {
    if (!r.runtime_s || !r.params_M || !r.flops_G || !r.activations_M || !r.memory_M) continue;
    rt.push_back(*r.runtime_s);
    pm.push_back(*r.params_M);
    fl.push_back(*r.flops_G);
    ac.push_back(*r.activations_M);
    mem.push_back(*r.memory_M);
  }
  RankCorrelations c;
  c.rows_used = static_cast<int>(rt.size());
  c.params = srocc(pm, rt);
  c.flops = srocc(fl, rt);
  c.activations = srocc(ac, rt);
  c.memory = srocc(mem, rt);
  return c;
}

inline RankCorrelations reproduce_table2() { return correlate_with_runtime(builtin_fixture()); }

namespace detail {

inline std::string fmt(double v, const char* f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string cell(const std::optional<double>& v, const char* f) {
  return v ? fmt(*v, f) : std::string();
}

struct ColumnText {
  std::string psnr_val, psnr_test, runtime, params, flops, acts, mem, conv;
};

inline ColumnText row_text(const MetricsRow& r) {
  ColumnText t;
  t.psnr_val = cell(r.psnr_val, "%.2f");
  t.psnr_test = cell(r.psnr_test, "%.2f");
  t.runtime = cell(r.runtime_s, "%.3f");
  t.params = cell(r.params_M, "%.3f");
  t.flops = cell(r.flops_G, "%.2f");
  t.acts = cell(r.activations_M, "%.2f");
  t.mem = cell(r.memory_M, "%.0f");
  t.conv = r.conv_count ? std::to_string(*r.conv_count) : std::string();
  return t;
}

inline const char* kReportColumns =
    "team,psnr_val,psnr_test,runtime_s,params_M,flops_G,activations_M,memory_M,conv_count,"
    "ranked";

}  // namespace detail

// Renders rows in a fixed column order with fixed per-column number formats,
// so equal inputs yield byte-identical output. Formats: csv, json, md.
inline std::string emit_report(const std::vector<MetricsRow>& rows, const std::string& format) {
  std::ostringstream os;
  if (format == "csv") {
    os << detail::kReportColumns << "\n";
    for (const auto& r : rows) {
      const auto t = detail::row_text(r);
      os << r.team << "," << t.psnr_val << "," << t.psnr_test << "," << t.runtime << ","
         << t.params << "," << t.flops << "," << t.acts << "," << t.mem << "," << t.conv << ","
         << (r.ranked ? "true" : "false") << "\n";
    }
  } else if (format == "json") {
    os << "[\n";
    for (size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const auto t = detail::row_text(r);
      os << "  {\"team\": \"" << r.team << "\"";
      auto put = [&os](const char* key, const std::string& v) {
        if (!v.empty()) os << ", \"" << key << "\": " << v;
      };
      put("psnr_val", t.psnr_val);
      put("psnr_test", t.psnr_test);
      put("runtime_s", t.runtime);
      put("params_M", t.params);
      put("flops_G", t.flops);
      put("activations_M", t.acts);
      put("memory_M", t.mem);
      put("conv_count", t.conv);
      os << ", \"ranked\": " << (r.ranked ? "true" : "false") << "}";
      os << (i + 1 < rows.size() ? ",\n" : "\n");
    }
    os << "]\n";
  } else if (format == "md") {
    os << "| team | psnr_val | psnr_test | runtime_s | params_M | flops_G | activations_M | "
          "memory_M | conv_count | ranked |\n";
    os << "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
      const auto t = detail::row_text(r);
      os << "| " << r.team << " | " << t.psnr_val << " | " << t.psnr_test << " | " << t.runtime
         << " | " << t.params << " | " << t.flops << " | " << t.acts << " | " << t.mem << " | "
         << t.conv << " | " << (r.ranked ? "true" : "false") << " |\n";
    }
  } else {
    throw DataError("unknown report format '" + format + "' (expected csv, json or md)");
  }
  return os.str();
}

inline std::vector<MetricsRow> parse_fixture_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("fixture csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != detail::kReportColumns)
    throw DataError("fixture csv: unexpected header '" + line + "'");
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    f.push_back(cur);
    if (f.size() != 10) throw DataError("fixture csv: bad row '" + line + "'");
    MetricsRow r;
    r.team = f[0];
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    r.psnr_val = opt(f[1]);
    r.psnr_test = opt(f[2]);
    r.runtime_s = opt(f[3]);
    r.params_M = opt(f[4]);
    r.flops_G = opt(f[5]);
    r.activations_M = opt(f[6]);
    r.memory_M = opt(f[7]);
    if (!f[8].empty()) r.conv_count = std::stoll(f[8]);
    if (f[9] == "true") r.ranked = true;
    else if (f[9] == "false") r.ranked = false;
    else throw DataError("fixture csv: bad ranked flag '" + f[9] + "'");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<MetricsRow> load_fixture_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  return parse_fixture_csv(f);
}

// Our own measurements in fixture units: millions of parameters and
// activations, GMACs, mebibytes.
inline MetricsRow row_from_report(const EfficiencyReport& r) {
  MetricsRow m;
  m.team = r.model;
  m.params_M = static_cast<double>(r.params) / 1e6;
  m.flops_G = static_cast<double>(r.flops) / 1e9;
  m.activations_M = static_cast<double>(r.activations) / 1e6;
  m.memory_M = static_cast<double>(r.peak_memory_bytes) / (1024.0 * 1024.0);
  m.conv_count = r.conv_layers;
  return m;
}

}  // namespace srzoo
