// Independent reference implementations used by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include "smoky/box.hpp"
#include "smoky/geometry.hpp"

namespace oracle {

/// Area of overlap by counting unit cells of the integer grid covered by both boxes.
inline double raster_intersection(int ax1, int ay1, int ax2, int ay2, int bx1, int by1, int bx2,
                                  int by2) {
  long long count = 0;
  const int lo_x = std::min(ax1, bx1), hi_x = std::max(ax2, bx2);
  const int lo_y = std::min(ay1, by1), hi_y = std::max(ay2, by2);
  for (int y = lo_y; y < hi_y; ++y) {
    const bool in_a = y >= ay1 && y < ay2;
    const bool in_b = y >= by1 && y < by2;
    if (!in_a || !in_b) continue;
    for (int x = lo_x; x < hi_x; ++x) {
      if (x >= ax1 && x < ax2 && x >= bx1 && x < bx2) ++count;
    }
  }
  return static_cast<double>(count);
}

inline double raster_iou(int ax1, int ay1, int ax2, int ay2, int bx1, int by1, int bx2, int by2) {
  const double inter = raster_intersection(ax1, ay1, ax2, ay2, bx1, by1, bx2, by2);
  const double a = static_cast<double>(ax2 - ax1) * (ay2 - ay1);
  const double b = static_cast<double>(bx2 - bx1) * (by2 - by1);
  return inter / (a + b - inter);
}

/// Exhaustive matching: scores every vehicle under both cases and picks by an
/// explicit lexicographic key.
struct BruteMatch {
  std::optional<std::size_t> index;
  bool overlap = false;
};

inline BruteMatch brute_force_match(const smoky::BoundingBox& s,
                                    const std::vector<smoky::ScoredDetection>& vehicles,
                                    double l_dist, bool front_filter = true,
                                    double min_iou = 0.0) {
  struct Cand {
    double iou, dist, score;
    std::size_t idx;
  };
  std::vector<Cand> front;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& v = vehicles[i].box;
    const double scy = (s.y1() + s.y2()) * 0.5;
    const double vcy = (v.y1() + v.y2()) * 0.5;
    if (front_filter && !(vcy < scy)) continue;
    const double ix = std::max(0.0, std::min(s.x2(), v.x2()) - std::max(s.x1(), v.x1()));
    const double iy = std::max(0.0, std::min(s.y2(), v.y2()) - std::max(s.y1(), v.y1()));
    const double inter = ix * iy;
    const double uni = s.width() * s.height() + v.width() * v.height() - inter;
    const double ax = (v.x1() + v.x2()) * 0.5, ay = v.y2();
    const double xs[3] = {s.x1(), (s.x1() + s.x2()) * 0.5, s.x2()};
    double d = 0.0;
    for (double x : xs) d += std::sqrt((x - ax) * (x - ax) + (s.y1() - ay) * (s.y1() - ay));
    front.push_back({inter > 0.0 ? inter / uni : 0.0, d / 3.0, vehicles[i].score, i});
  }
  BruteMatch out;
  std::vector<Cand> overl;
  for (const auto& c : front) {
    if (c.iou > 0.0 && c.iou > min_iou) overl.push_back(c);
  }
  if (!overl.empty()) {
    const auto best = std::min_element(overl.begin(), overl.end(), [](const Cand& a, const Cand& b) {
      return std::make_tuple(-a.iou, -a.score, a.idx) < std::make_tuple(-b.iou, -b.score, b.idx);
    });
    out.index = best->idx;
    out.overlap = true;
    return out;
  }
  if (front.empty()) return out;
  const auto best = std::min_element(front.begin(), front.end(), [](const Cand& a, const Cand& b) {
    return std::make_tuple(a.dist, -a.score, a.idx) < std::make_tuple(b.dist, -b.score, b.idx);
  });
  if (best->dist < l_dist) out.index = best->idx;
  return out;
}

/// Square region by explicit case analysis on where the grown square hits the frame.
struct Square {
  double x1, y1, x2, y2;
};

inline Square square_region(double x1, double y1, double x2, double y2, double fw, double fh,
                            double min_side) {
  double side = std::max({x2 - x1, y2 - y1, min_side});
  side = std::min({side, fw, fh});
  const double cx = (x1 + x2) / 2.0, cy = (y1 + y2) / 2.0;
  auto place = [side](double c, double limit) {
    double lo = c - side / 2.0;
    if (lo < 0.0) lo = 0.0;
    if (lo + side > limit) lo = limit - side;
    return lo;
  };
  const double sx = place(cx, fw), sy = place(cy, fh);
  return {sx, sy, sx + side, sy + side};
}

/// Plain cross-correlation of one (C,H,W) image with (O,C,k,k) weights, zero padding.
inline std::vector<double> conv2d(const std::vector<double>& x, int c, int h, int w,
                                  const std::vector<double>& wt, int o, int k, int pad,
                                  const std::vector<double>& bias) {
  std::vector<double> y(static_cast<std::size_t>(o) * h * w, 0.0);
  for (int oc = 0; oc < o; ++oc)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        double acc = bias.empty() ? 0.0 : bias[oc];
        for (int ic = 0; ic < c; ++ic)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int sy = yy + ky - pad, sx = xx + kx - pad;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              acc += x[(static_cast<std::size_t>(ic) * h + sy) * w + sx] *
                     wt[((static_cast<std::size_t>(oc) * c + ic) * k + ky) * k + kx];
            }
        y[(static_cast<std::size_t>(oc) * h + yy) * w + xx] = acc;
      }
  return y;
}

struct Rates {
  std::optional<double> dr, far, precision, f1;
};

inline Rates rates(long long tp, long long fp, long long tn, long long fn) {
  Rates r;
  if (tp + fn > 0) r.dr = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (fp + tn > 0) r.far = static_cast<double>(fp) / static_cast<double>(fp + tn);
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (r.dr && r.precision && (*r.dr + *r.precision) > 0.0) {
    r.f1 = 2.0 * *r.precision * *r.dr / (*r.precision + *r.dr);
  }
  return r;
}

}  // namespace oracle
