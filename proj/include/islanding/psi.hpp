#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "islanding/coherency.hpp"
#include "islanding/protection.hpp"

namespace islanding::psi {

/// Floor on IGC (and on baseline values used for growth).
inline constexpr double kIndexFloor = 1e-6;

struct PsiSample {
  double time = 0.0;
  double cgc = 0.0;
  double igc = 0.0;
  double dcgc = 0.0;
  bool saturated = false;  // igc fell below the floor; dcgc computed against the floor
};

struct GrowthPercent {
  double time = 0.0;
  double g_cgc = 0.0;
  double g_igc = 0.0;
  double g_dcgc = 0.0;
};

struct Thresholds {
  double th_cgc = 0.0;
  double th_igc = 0.0;
  double th_dcgc = 0.0;
  bool operator==(const Thresholds&) const = default;
};

struct IslandingSignal {
  bool fired = false;
  double time = 0.0;
  std::optional<double> t_cgc, t_igc, t_dcgc;  // confirmed crossing times
};

double cgc(const coh::KsGM& m);
/// Throws UndefinedIndexError for u < 2.
double igc(const coh::KsGM& m);
/// Throws UndefinedIndexError for u < 2 and SaturatedIndexError when igc < floor.
double dcgc(const coh::KsGM& m, double floor = kIndexFloor);

/// All three indices at once; a sub-floor IGC saturates DCGC instead of throwing.
PsiSample evaluate(const coh::KsGM& m, double time);

/// Throws InputError (unreliable baseline) when a baseline index is below the floor.
GrowthPercent growth_percent(const PsiSample& sample, const PsiSample& baseline);

/// Component-wise maximum growth over a series (the "peak" used for calibration).
GrowthPercent peak_growth(const std::vector<GrowthPercent>& series);

struct CalibrationRow {
  std::string scenario;
  prot::StabilityClass label = prot::StabilityClass::stable_low_swing;
  GrowthPercent peak;
};

/// Per-index minimum of the peaks over island_formation rows. Throws CalibrationError.
Thresholds calibrate_thresholds(const std::vector<CalibrationRow>& rows);

/// Incremental detector: per-index crossing = first tick of a run of ticks
/// with g >= th that lasts through the confirmation window; fires at the tick
/// where the last index confirms (max crossing + confirm), all three indices required.
class Detector {
 public:
  Detector(Thresholds th, double confirm);
  /// Feeds one tick; returns the signal the first time it fires.
  std::optional<IslandingSignal> push(const GrowthPercent& g);
  const IslandingSignal& signal() const { return signal_; }

 private:
  struct Track {
    std::optional<double> run_start;
    std::optional<double> confirmed;
  };
  void update(Track& tr, double value, double threshold, double t);

  Thresholds th_;
  double confirm_;
  Track cgc_, igc_, dcgc_;
  IslandingSignal signal_;
};

IslandingSignal detect(const std::vector<GrowthPercent>& stream, const Thresholds& th, double confirm = 0.04);

Thresholds parse_thresholds(std::string_view json_text);
Thresholds load_thresholds(const std::string& path);
std::string thresholds_to_json(const Thresholds& th);

}  // namespace islanding::psi
