// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace uvt {

bool Box::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 &&
         h > 0.0;
}

Box Box::from_corners(double x1, double y1, double x2, double y2) {
  return {x1, y1, x2 - x1, y2 - y1};
}

bool ImageDims::valid() const {
  return std::isfinite(width) && std::isfinite(height) && width > 0.0 && height > 0.0;
}

Box union_box(const Box& a, const Box& b) {
  const double x1 = std::min(a.x, b.x);
  const double y1 = std::min(a.y, b.y);
  const double x2 = std::max(a.right(), b.right());
  const double y2 = std::max(a.bottom(), b.bottom());
  return Box::from_corners(x1, y1, x2, y2);
}

double intersection_area(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const Box& a, const Box& b) {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::array<double, kBoxFeatureDim> box_location_feature(const Box& b, const ImageDims& img) {
  return {b.x / img.width, b.y / img.height, b.right() / img.width, b.bottom() / img.height,
          b.area() / img.area()};
}

std::array<double, kPairFeatureDim> pair_location_feature(const Box& s, const Box& o,
                                                           const ImageDims& img) {
  return {(s.x - o.x) / o.w,
          (s.y - o.y) / o.h,
          std::log(s.w / o.w),
          std::log(s.h / o.h),
          (o.x - s.x) / s.w,
          (o.y - s.y) / s.h,
          std::log(o.w / s.w),
          std::log(o.h / s.h),
          union_box(s, o).area() / img.area()};
}

std::array<double, kLocationDim> triplet_location_vector(const Box& s, const Box& o,
                                                          const ImageDims& img) {
  std::array<double, kLocationDim> out{};
  const auto ls = box_location_feature(s, img);
  const auto lo = box_location_feature(o, img);
  const auto lp = pair_location_feature(s, o, img);
  auto it = std::copy(ls.begin(), ls.end(), out.begin());
  it = std::copy(lo.begin(), lo.end(), it);
  std::copy(lp.begin(), lp.end(), it);
  return out;
}

}  // namespace uvt
