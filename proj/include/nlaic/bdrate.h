#ifndef NLAIC_BDRATE_H_
#define NLAIC_BDRATE_H_

#include <string>
#include <vector>

namespace nlaic {

struct RDPoint {
  double bpp = 0.0;
  double psnr = 0.0;
  double msssim = 0.0;     // raw d in [0,1]
  double msssim_db = 0.0;  // -10 log10(1-d)
};

struct RDCurve {
  std::string label;
  std::vector<RDPoint> points;

  // Strictly increasing bpp; >= min_points entries.
  void validate(size_t min_points = 1) const;
};

enum class BdMetric { kPsnr, kMsssimDb };

// Bjontegaard delta rate of `test` against `anchor` in percent (negative
// means the test codec spends fewer bits at equal quality). Cubic fit of
// log10(rate) over the quality metric, integrated across the overlapping
// quality range. Requires >= 4 points per curve.
double bd_rate(const RDCurve& anchor, const RDCurve& test, BdMetric metric = BdMetric::kPsnr);

}  // namespace nlaic

#endif  // NLAIC_BDRATE_H_
