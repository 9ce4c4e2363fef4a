// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>

namespace uvt {

/// Axis-aligned box in pixels: (x, y) is the top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  bool valid() const;

  /// Converts from corner-corner form (x1, y1, x2, y2).
  static Box from_corners(double x1, double y1, double x2, double y2);

  friend bool operator==(const Box&, const Box&) = default;
};

struct ImageDims {
  double width = 0.0;
  double height = 0.0;

  double area() const { return width * height; }
  bool valid() const;

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

inline constexpr std::size_t kBoxFeatureDim = 5;
inline constexpr std::size_t kPairFeatureDim = 9;
inline constexpr std::size_t kLocationDim = 19;

Box union_box(const Box& a, const Box& b);
double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);

/// (left/W, top/H, right/W, bottom/H, area/image area). No clamping.
std::array<double, kBoxFeatureDim> box_location_feature(const Box& b, const ImageDims& img);

/// Relative offsets and log size ratios in both directions plus the union-box
/// area ratio.
std::array<double, kPairFeatureDim> pair_location_feature(const Box& s, const Box& o,
                                                           const ImageDims& img);

/// box_location_feature(s) ++ box_location_feature(o) ++ pair_location_feature(s, o).
std::array<double, kLocationDim> triplet_location_vector(const Box& s, const Box& o,
                                                          const ImageDims& img);

}  // namespace uvt
