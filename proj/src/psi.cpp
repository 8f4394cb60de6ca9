#include "islanding/psi.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "islanding/error.hpp"
#include "text_io.hpp"

namespace islanding::psi {

namespace {

double diag_sum(const coh::KsGM& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.u; ++i) s += m.a(i, i);
  return s;
}

double upper_sum(const coh::KsGM& m) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < m.u; ++i) {
    for (std::size_t j = i + 1; j < m.u; ++j) s += m.a(i, j);
  }
  return s;
}

void require_pairs(const coh::KsGM& m, const char* what) {
  if (m.u < 2) throw UndefinedIndexError(std::string(what) + " needs at least two coherent groups");
}

}  // namespace

double cgc(const coh::KsGM& m) {
  if (m.u < 1) throw UndefinedIndexError("CGC needs at least one group");
  return diag_sum(m) / static_cast<double>(m.u);
}

double igc(const coh::KsGM& m) {
  require_pairs(m, "IGC");
  const double n = static_cast<double>(m.u);
  return 2.0 / (n * (n - 1.0)) * upper_sum(m);
}

double dcgc(const coh::KsGM& m, double floor) {
  require_pairs(m, "DCGC");
  if (igc(m) < floor) throw SaturatedIndexError("DCGC undefined: IGC below floor", floor);
  const double n = static_cast<double>(m.u);
  return (n - 1.0) / 2.0 * diag_sum(m) / upper_sum(m);
}

PsiSample evaluate(const coh::KsGM& m, double time) {
  PsiSample s;
  s.time = time;
  s.cgc = cgc(m);
  s.igc = igc(m);
  if (s.igc < kIndexFloor) {
    s.saturated = true;
    s.dcgc = s.cgc / kIndexFloor;
  } else {
    s.dcgc = dcgc(m);
  }
  return s;
}

GrowthPercent growth_percent(const PsiSample& sample, const PsiSample& baseline) {
  if (baseline.cgc < kIndexFloor || baseline.igc < kIndexFloor || baseline.dcgc < kIndexFloor) {
    throw InputError("unreliable baseline: an index is below the floor");
  }
  GrowthPercent g;
  g.time = sample.time;
  g.g_cgc = 100.0 * (sample.cgc - baseline.cgc) / baseline.cgc;
  g.g_igc = 100.0 * (sample.igc - baseline.igc) / baseline.igc;
  g.g_dcgc = 100.0 * (sample.dcgc - baseline.dcgc) / baseline.dcgc;
  return g;
}

GrowthPercent peak_growth(const std::vector<GrowthPercent>& series) {
  if (series.empty()) return {};
  GrowthPercent p = series.front();
  for (const auto& g : series) {
    p.g_cgc = std::max(p.g_cgc, g.g_cgc);
    p.g_igc = std::max(p.g_igc, g.g_igc);
    p.g_dcgc = std::max(p.g_dcgc, g.g_dcgc);
  }
  p.time = series.back().time;
  return p;
}

Thresholds calibrate_thresholds(const std::vector<CalibrationRow>& rows) {
  std::optional<Thresholds> th;
  for (const auto& r : rows) {
    if (r.label != prot::StabilityClass::island_formation) continue;
    if (!th) {
      th = Thresholds{r.peak.g_cgc, r.peak.g_igc, r.peak.g_dcgc};
      continue;
    }
    th->th_cgc = std::min(th->th_cgc, r.peak.g_cgc);
    th->th_igc = std::min(th->th_igc, r.peak.g_igc);
    th->th_dcgc = std::min(th->th_dcgc, r.peak.g_dcgc);
  }
  if (!th) throw CalibrationError("no island_formation scenario among the calibration rows");
  return *th;
}

Detector::Detector(Thresholds th, double confirm) : th_(th), confirm_(confirm) {
  if (!(confirm >= 0.0)) throw InputError("confirmation window must be non-negative");
}

void Detector::update(Track& tr, double value, double threshold, double t) {
  if (tr.confirmed) return;
  if (value >= threshold) {
    if (!tr.run_start) tr.run_start = t;
    // Tick times carry round-off; the window closes within a nanosecond of confirm.
    if (t - *tr.run_start >= confirm_ - 1e-9) tr.confirmed = tr.run_start;
  } else {
    tr.run_start.reset();
  }
}

std::optional<IslandingSignal> Detector::push(const GrowthPercent& g) {
  if (signal_.fired) return std::nullopt;
  update(cgc_, g.g_cgc, th_.th_cgc, g.time);
  update(igc_, g.g_igc, th_.th_igc, g.time);
  update(dcgc_, g.g_dcgc, th_.th_dcgc, g.time);
  signal_.t_cgc = cgc_.confirmed;
  signal_.t_igc = igc_.confirmed;
  signal_.t_dcgc = dcgc_.confirmed;
  if (cgc_.confirmed && igc_.confirmed && dcgc_.confirmed) {
    signal_.fired = true;
    signal_.time = g.time;
    return signal_;
  }
  return std::nullopt;
}

IslandingSignal detect(const std::vector<GrowthPercent>& stream, const Thresholds& th, double confirm) {
  Detector d(th, confirm);
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& g : stream) {
    if (!(g.time > last)) throw InputError("detect: stream is not strictly time-ordered");
    last = g.time;
    if (d.push(g)) break;
  }
  return d.signal();
}

Thresholds parse_thresholds(std::string_view json_text) {
  using nlohmann::json;
  Thresholds th;
  try {
    const auto j = json::parse(json_text);
    th.th_cgc = j.at("th_cgc").get<double>();
    th.th_igc = j.at("th_igc").get<double>();
    th.th_dcgc = j.at("th_dcgc").get<double>();
  } catch (const json::exception& e) {
    throw InputError(std::string("thresholds file: ") + e.what());
  }
  if (!(th.th_cgc >= 0 && th.th_igc >= 0 && th.th_dcgc >= 0)) {
    throw InputError("thresholds file: thresholds must be non-negative");
  }
  return th;
}

Thresholds load_thresholds(const std::string& path) {
  return parse_thresholds(detail::read_text_file(path, "thresholds file"));
}

std::string thresholds_to_json(const Thresholds& th) {
  return "{\n  \"th_cgc\": " + detail::format_double(th.th_cgc) + ",\n  \"th_igc\": " +
         detail::format_double(th.th_igc) + ",\n  \"th_dcgc\": " + detail::format_double(th.th_dcgc) + "\n}\n";
}

}  // namespace islanding::psi
